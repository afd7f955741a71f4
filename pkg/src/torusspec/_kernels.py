"""Compiled inner loops for the geodesic integrators.

All kernels take the metric as flat coefficient arrays
(a1, b1, a2, b2, cc, cs, sc, ss, eps) so that numba sees concrete types:
f1 = sum a1[k] cos(2 pi k x1) + b1[k] sin(2 pi k x1), same for f2, and an
optional bivariate perturbation eps * U.  States are lifted to the universal
cover (windings live in the floats; callers split them off).

The Hamiltonian step is implicit midpoint solved by fixed-point iteration
(contraction factor ~ dt, a handful of sweeps), composed into a fourth-order
scheme by the standard triple jump.  The mechanical kernel integrates the
decoupled second-order form x_j'' = f_j'(x_j) with velocity Verlet, which
passes through turning points smoothly.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi

# triple-jump composition weights (fourth order)
_CBRT2 = 2.0 ** (1.0 / 3.0)
_W1 = 1.0 / (2.0 - _CBRT2)
_W0 = -_CBRT2 / (2.0 - _CBRT2)


@njit(cache=True)
def _f_and_d(x, a, b):
    """f(x) and f'(x) for one trig series."""
    f = a[0]
    d = 0.0
    for k in range(1, a.shape[0]):
        w = TWO_PI * k
        c = math.cos(w * x)
        s = math.sin(w * x)
        f += a[k] * c + b[k] * s
        d += w * (-a[k] * s + b[k] * c)
    return f, d


@njit(cache=True)
def _rho_grad(x1, x2, a1, b1, a2, b2, cc, cs, sc, ss, eps):
    """(rho, d rho/dx1, d rho/dx2) at a lifted point."""
    f1, d1 = _f_and_d(x1, a1, b1)
    f2, d2 = _f_and_d(x2, a2, b2)
    rho = 1.0 + f1 + f2
    g1 = d1
    g2 = d2
    if eps != 0.0:
        J = cc.shape[0]
        K = cc.shape[1]
        for j in range(J):
            wj = TWO_PI * j
            c1 = math.cos(wj * x1)
            s1 = math.sin(wj * x1)
            for k in range(K):
                wk = TWO_PI * k
                c2 = math.cos(wk * x2)
                s2 = math.sin(wk * x2)
                u = cc[j, k] * c1 * c2 + cs[j, k] * c1 * s2
                u += sc[j, k] * s1 * c2 + ss[j, k] * s1 * s2
                du1 = wj * (
                    -cc[j, k] * s1 * c2
                    - cs[j, k] * s1 * s2
                    + sc[j, k] * c1 * c2
                    + ss[j, k] * c1 * s2
                )
                du2 = wk * (
                    -cc[j, k] * c1 * s2
                    + cs[j, k] * c1 * c2
                    - sc[j, k] * s1 * s2
                    + ss[j, k] * s1 * c2
                )
                rho += eps * u
                g1 += eps * du1
                g2 += eps * du2
    return rho, g1, g2


@njit(cache=True)
def _field(z, a1, b1, a2, b2, cc, cs, sc, ss, eps):
    """Hamiltonian vector field of H = |xi|^2 / (2 rho)."""
    rho, g1, g2 = _rho_grad(z[0], z[1], a1, b1, a2, b2, cc, cs, sc, ss, eps)
    q = (z[2] * z[2] + z[3] * z[3]) / (2.0 * rho * rho)
    return np.array([z[2] / rho, z[3] / rho, q * g1, q * g2])


@njit(cache=True)
def _midpoint_step(z, dt, a1, b1, a2, b2, cc, cs, sc, ss, eps):
    """One implicit-midpoint step, fixed-point iteration on the midpoint state."""
    w = z + 0.5 * dt * _field(z, a1, b1, a2, b2, cc, cs, sc, ss, eps)
    for _ in range(30):
        fw = _field(w, a1, b1, a2, b2, cc, cs, sc, ss, eps)
        wn = z + 0.5 * dt * fw
        delta = 0.0
        for i in range(4):
            delta = max(delta, abs(wn[i] - w[i]))
        w = wn
        if delta < 1e-15:
            break
    return 2.0 * w - z


@njit(cache=True)
def _step(z, dt, order, a1, b1, a2, b2, cc, cs, sc, ss, eps):
    if order == 2:
        return _midpoint_step(z, dt, a1, b1, a2, b2, cc, cs, sc, ss, eps)
    z = _midpoint_step(z, _W1 * dt, a1, b1, a2, b2, cc, cs, sc, ss, eps)
    z = _midpoint_step(z, _W0 * dt, a1, b1, a2, b2, cc, cs, sc, ss, eps)
    return _midpoint_step(z, _W1 * dt, a1, b1, a2, b2, cc, cs, sc, ss, eps)


@njit(cache=True)
def flow_kernel(z0, T, dt, order, n_samples, a1, b1, a2, b2, cc, cs, sc, ss, eps):
    """Integrate Hamilton's equations over [0, T] with a uniform step <= dt.

    Returns an (n_samples, 5) array of rows (t, x1, x2, xi1, xi2), the first
    row at t=0 and the last exactly at t=T.  Coordinates stay lifted.
    """
    n_steps = max(1, int(round(abs(T) / dt)))
    h = T / n_steps
    out = np.empty((n_samples, 5))
    z = z0.copy()
    out[0, 0] = 0.0
    out[0, 1:] = z
    # record at (approximately) uniform step indices, always including the end
    next_rec = 1
    for i in range(1, n_steps + 1):
        z = _step(z, h, order, a1, b1, a2, b2, cc, cs, sc, ss, eps)
        while next_rec < n_samples and i == (next_rec * n_steps) // (n_samples - 1):
            out[next_rec, 0] = i * h
            out[next_rec, 1:] = z
            next_rec += 1
    while next_rec < n_samples:
        out[next_rec, 0] = T
        out[next_rec, 1:] = z
        next_rec += 1
    return out


@njit(cache=True)
def final_state_kernel(z0, T, dt, order, a1, b1, a2, b2, cc, cs, sc, ss, eps):
    """Endpoint only; avoids allocating a path when shooting."""
    n_steps = max(1, int(round(abs(T) / dt)))
    h = T / n_steps
    z = z0.copy()
    for _ in range(n_steps):
        z = _step(z, h, order, a1, b1, a2, b2, cc, cs, sc, ss, eps)
    return z


@njit(cache=True)
def verlet_kernel(x0, v0, T, dt, a1, b1, a2, b2):
    """Velocity Verlet for the decoupled mechanical system x_j'' = f_j'(x_j).

    Returns an (n+1, 5) array of rows (t, x1, x2, v1, v2) at every step.
    """
    n = max(1, int(round(abs(T) / dt)))
    h = T / n
    out = np.empty((n + 1, 5))
    x1, x2 = x0[0], x0[1]
    v1, v2 = v0[0], v0[1]
    _, d1 = _f_and_d(x1, a1, b1)
    _, d2 = _f_and_d(x2, a2, b2)
    out[0] = (0.0, x1, x2, v1, v2)
    for i in range(1, n + 1):
        v1h = v1 + 0.5 * h * d1
        v2h = v2 + 0.5 * h * d2
        x1 += h * v1h
        x2 += h * v2h
        _, d1 = _f_and_d(x1, a1, b1)
        _, d2 = _f_and_d(x2, a2, b2)
        v1 = v1h + 0.5 * h * d1
        v2 = v2h + 0.5 * h * d2
        out[i] = (i * h, x1, x2, v1, v2)
    return out
