"""Geodesic flow, separated trajectories, shooting, and rational tori.

The Hamiltonian H = |xi|^2 / (2 rho) is non-separable, so the flow uses
implicit midpoint (symplectic here) composed to fourth order by the standard
triple jump; energy drift is monitored over the returned samples and gates
the step size.  For Liouville metrics the Maupertuis reduction turns
geodesics into the decoupled mechanical system x_j'' = f_j'(x_j), integrated
by velocity Verlet, which passes smoothly through librational turning
points.

Loop functions psi_{m,n}(x) are computed with the unit-speed normalization
H = 1/2, where flight time equals Riemannian length, by Newton shooting on
(initial direction, time) seeded from the unperturbed rational torus and
continued in epsilon for conformally perturbed metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lengths as _lengths
from ._kernels import final_state_kernel, flow_kernel, verlet_kernel
from .errors import (
    NoConvergenceError,
    NoTorusError,
    StepTooLargeError,
    TurningPointError,
    ValidationError,
)
from .metrics import ConformalMetric, LiouvilleMetric

DEFAULT_DT = 1e-3
ENERGY_DRIFT_TOL = 1e-8
SHOOT_TOL = 1e-9
EPS_STEP = 1e-2

_NO_PERT = np.zeros((1, 1))


def metric_coeffs(metric):
    """Flat coefficient tuple (a1, b1, a2, b2, cc, cs, sc, ss, eps) for kernels."""
    if isinstance(metric, ConformalMetric):
        U = metric.U
        return (
            metric.f1.a,
            metric.f1.b,
            metric.f2.a,
            metric.f2.b,
            U.cc,
            U.cs,
            U.sc,
            U.ss,
            metric.epsilon,
        )
    return (
        metric.f1.a,
        metric.f1.b,
        metric.f2.a,
        metric.f2.b,
        _NO_PERT,
        _NO_PERT,
        _NO_PERT,
        _NO_PERT,
        0.0,
    )


@dataclass(frozen=True)
class GeodesicState:
    """Phase-space point; torus coordinates in [0,1) with integer windings."""

    x1: float
    x2: float
    xi1: float
    xi2: float
    w1: int = 0
    w2: int = 0

    @classmethod
    def from_lifted(cls, z):
        w1, w2 = int(np.floor(z[0])), int(np.floor(z[1]))
        return cls(float(z[0]) - w1, float(z[1]) - w2, float(z[2]), float(z[3]), w1, w2)

    def lifted(self):
        return np.array(
            [self.w1 + self.x1, self.w2 + self.x2, self.xi1, self.xi2]
        )

    def energy(self, metric):
        rho = float(metric.density(self.x1, self.x2))
        return (self.xi1**2 + self.xi2**2) / (2.0 * rho)


@dataclass(frozen=True)
class FlowPath:
    """Sampled integral curve; rows are (t, x1_lifted, x2_lifted, xi1, xi2)."""

    samples: np.ndarray
    final: GeodesicState
    energy_drift: float  # max relative H drift over the samples

    @property
    def positions(self):
        return self.samples[:, 1:3]


def flow(metric, s0: GeodesicState, t, dt=DEFAULT_DT, order=4, n_samples=513):
    """Integrate Hamilton's equations for H = |xi|^2/(2 rho) over [0, t].

    Fixed step of size <= dt (t is always hit exactly).  At most
    n_steps + 1 rows are returned, so sample times are strictly increasing.
    Raises StepTooLargeError when the relative energy drift along the
    samples exceeds 1e-8 * max(|t|, 1); symplectic drift is oscillatory, so
    the sampled maximum is representative.
    """
    z0 = s0.lifted()
    if z0[2] == 0.0 and z0[3] == 0.0:
        raise ValidationError("flow needs a state with nonzero momentum")
    if t == 0.0:
        raise ValidationError("flow needs a nonzero duration")
    if order not in (2, 4):
        raise ValidationError("order must be 2 or 4")
    n_steps = max(1, int(round(abs(t) / dt)))
    out = flow_kernel(
        z0,
        float(t),
        float(dt),
        order,
        min(int(n_samples), n_steps + 1),
        *metric_coeffs(metric),
    )
    rho = metric.density(out[:, 1], out[:, 2])
    H = (out[:, 3] ** 2 + out[:, 4] ** 2) / (2.0 * rho)
    drift = float(np.max(np.abs(H - H[0])) / abs(H[0]))
    if drift > ENERGY_DRIFT_TOL * max(abs(t), 1.0):
        raise StepTooLargeError(
            f"relative energy drift {drift:.3e} over t={t:g} exceeds "
            f"{ENERGY_DRIFT_TOL:g} * max(|t|, 1); shrink dt"
        )
    return FlowPath(out, GeodesicState.from_lifted(out[-1, 1:]), drift)


def maupertuis_trajectory(metric, e, x0, signs, T, dt=1e-4, mode="auto"):
    """Separated trajectory x1' = s1 sqrt(2(e+f1)), x2' = s2 sqrt(2(1-e+f2)).

    Integrates the equivalent second-order form x_j'' = f_j'(x_j) (velocity
    Verlet), which reflects smoothly at turning points, so librational
    branches need no special casing.  mode="winding" instead demands the
    first-order branch stay valid for the whole run and raises
    TurningPointError if either velocity changes sign.

    Returns an array of rows (t, x1, x2, v1, v2) at every step, coordinates
    lifted to the universal cover.
    """
    if isinstance(metric, ConformalMetric):
        raise ValidationError("Maupertuis separation needs a Liouville metric")
    if mode not in ("auto", "winding"):
        raise ValidationError(f"unknown mode {mode!r}")
    if T <= 0.0:
        raise ValidationError("duration must be positive")
    x0 = np.asarray(x0, dtype=float)
    v1sq = 2.0 * (e + float(metric.f1(x0[0])))
    v2sq = 2.0 * (1.0 - e + float(metric.f2(x0[1])))
    if v1sq < 0.0 or v2sq < 0.0:
        raise ValidationError(
            "x0 lies in the classically forbidden region for this energy split"
        )
    s1, s2 = signs
    v0 = np.array(
        [np.copysign(np.sqrt(v1sq), s1), np.copysign(np.sqrt(v2sq), s2)]
    )
    out = verlet_kernel(
        x0, v0, float(T), float(dt), metric.f1.a, metric.f1.b, metric.f2.a, metric.f2.b
    )
    if mode == "winding":
        if np.any(out[:, 3] * out[0, 3] <= 0.0) or np.any(out[:, 4] * out[0, 4] <= 0.0):
            raise TurningPointError(
                "winding-mode request hit a turning point (e + f = 0)"
            )
    return out


def maupertuis_length(metric, path):
    """Riemannian length of a Maupertuis path: int sqrt(2) rho(x(t)) dt."""
    from scipy.integrate import simpson

    rho = metric.density(path[:, 1], path[:, 2])
    return float(np.sqrt(2.0) * simpson(rho, x=path[:, 0]))


# -- rational tori ---------------------------------------------------------


@dataclass(frozen=True)
class RationalTorus:
    cls: tuple
    e: float
    period: float  # closure time in the Maupertuis parametrization
    length: float


def find_rational_torus(metric, cls) -> RationalTorus:
    """The invariant torus of rotational class (m,n).

    For m*n != 0 the energy split solves |m| T1(e) = |n| T2(e) (monotone
    bisection, see the length-spectrum module); the Maupertuis closure time
    is |m| T1(e)/sqrt(2) since x1' = sqrt(2(e+f1)).

    Axis classes (m,0) / (0,n) are foliated by coordinate lines exactly when
    the transverse profile is constant (otherwise the transverse equation
    has turning points and the class is librational); the split then puts
    all the energy into the winding coordinate.
    """
    m, n = cls
    if m == 0 and n == 0:
        raise ValidationError("(0,0) is not a geodesic class")
    if m == 0 or n == 0:
        f_wind, f_trans = (metric.f1, metric.f2) if n == 0 else (metric.f2, metric.f1)
        if not f_trans.is_constant():
            raise NoTorusError(
                f"class ({m},{n}) has no rotational torus: the transverse "
                "profile is not constant, so the coordinate lines do not close"
            )
        k = abs(m) if n == 0 else abs(n)
        ew = 1.0 + f_trans.mean  # e + f along the winding coordinate = rho
        return RationalTorus(
            cls=(int(m), int(n)),
            e=ew if n == 0 else -metric.f1.mean,
            period=k * _lengths._circle_integral(f_wind, ew, -0.5) / np.sqrt(2.0),
            length=k * _lengths._circle_integral(f_wind, ew, 0.5),
        )
    e, length, t1, _ = _lengths.solve_rotational(metric, m, n)
    return RationalTorus(
        cls=(int(m), int(n)),
        e=e,
        period=abs(m) * t1 / np.sqrt(2.0),
        length=length,
    )


def torus_state(metric, torus: RationalTorus, x) -> GeodesicState:
    """Unit-speed Hamiltonian state (H = 1/2) of the torus leaf through x.

    With this normalization the time-L flow map (L the torus length) closes
    the leaf, and flight time equals arclength for shooting.
    """
    m, n = torus.cls
    x = np.asarray(x, dtype=float)
    if m == 0 or n == 0:
        # axis leaf: all momentum along the winding coordinate, |xi|^2 = rho
        r = np.sqrt(float(metric.density(x[0], x[1])))
        xi1 = np.copysign(r, m) if n == 0 else 0.0
        xi2 = np.copysign(r, n) if m == 0 else 0.0
    else:
        v1sq = 2.0 * (torus.e + float(metric.f1(x[0])))
        v2sq = 2.0 * (1.0 - torus.e + float(metric.f2(x[1])))
        if v1sq <= 0.0 or v2sq <= 0.0:
            raise ValidationError("point is not on a leaf of the rational torus")
        # xi = v / sqrt(2) gives |xi|^2 = rho, i.e. H = 1/2
        xi1 = np.copysign(np.sqrt(v1sq / 2.0), m)
        xi2 = np.copysign(np.sqrt(v2sq / 2.0), n)
    return GeodesicState(
        float(x[0] % 1.0),
        float(x[1] % 1.0),
        float(xi1),
        float(xi2),
        int(np.floor(x[0])),
        int(np.floor(x[1])),
    )


# -- loop functions by shooting --------------------------------------------


def _shoot(coeffs, rho0, x, theta, T, dt):
    """Endpoint of the unit-speed geodesic from x with direction theta."""
    r = np.sqrt(rho0)
    z0 = np.array([x[0], x[1], r * np.cos(theta), r * np.sin(theta)])
    return final_state_kernel(z0, T, dt, 4, *coeffs)[:2]


def loop_function(metric, cls, x, dt=DEFAULT_DT, max_newton=50, tol=SHOOT_TOL):
    """(m,n)-loop function: length of the geodesic from x to x + (m,n).

    Newton shooting on (initial direction, flight time) in the unit-speed
    normalization, seeded from the unperturbed rational torus; conformal
    perturbations are reached by continuation in epsilon with steps of 1e-2.
    Returns (psi, unit initial direction).  Raises NoConvergenceError when a
    stage fails to reach endpoint residual tol within max_newton steps.
    """
    m, n = cls
    base = metric.base if isinstance(metric, ConformalMetric) else metric
    torus = find_rational_torus(base, (m, n))
    x = np.asarray(x, dtype=float)
    s = torus_state(base, torus, x)
    theta = float(np.arctan2(s.xi2, s.xi1))
    T = torus.length
    target = np.array([x[0] + m, x[1] + n])

    full = metric_coeffs(metric)
    eps = full[-1]
    if eps != 0.0:
        n_stages = max(1, int(np.ceil(abs(eps) / EPS_STEP)))
        eps_values = eps * np.arange(1, n_stages + 1) / n_stages
    else:
        eps_values = np.array([0.0])

    for eps_k in eps_values:
        coeffs = (*full[:-1], float(eps_k))
        rho0 = float(base.density(x[0], x[1]))
        if eps_k != 0.0:
            rho0 += eps_k * float(metric.U(x[0], x[1]))
        for _ in range(max_newton):
            R = _shoot(coeffs, rho0, x, theta, T, dt) - target
            if np.max(np.abs(R)) < tol:
                break
            h = 1e-7
            Rt = _shoot(coeffs, rho0, x, theta + h, T, dt) - target
            RT = _shoot(coeffs, rho0, x, theta, T + h, dt) - target
            J = np.column_stack([(Rt - R) / h, (RT - R) / h])
            try:
                step = np.linalg.solve(J, -R)
            except np.linalg.LinAlgError:
                raise NoConvergenceError(
                    f"singular shooting Jacobian for class ({m},{n}) at eps={eps_k:g}"
                )
            theta += float(step[0])
            T += float(step[1])
        else:
            raise NoConvergenceError(
                f"loop shooting for class ({m},{n}) did not reach residual "
                f"{tol:g} at eps={eps_k:g}"
            )
    return float(T), np.array([np.cos(theta), np.sin(theta)])


# -- twist check -------------------------------------------------------------


def twist_rank(metric, torus: RationalTorus, x, step=1e-5, dt=DEFAULT_DT):
    """Rank of the momentum-to-position derivative of the time-L flow map.

    Central finite differences of u -> position of Phi^L(s(x) + u) with u
    perturbing the two momentum components; returns (rank, condition number)
    where rank counts singular values above 1e-6 times the largest.
    """
    s = torus_state(metric.base if isinstance(metric, ConformalMetric) else metric,
                    torus, x)
    z0 = s.lifted()
    coeffs = metric_coeffs(metric)
    T = torus.length

    def endpoint(d1, d2):
        z = z0.copy()
        z[2] += d1
        z[3] += d2
        return final_state_kernel(z, T, dt, 4, *coeffs)[:2]

    J = np.column_stack(
        [
            (endpoint(step, 0.0) - endpoint(-step, 0.0)) / (2.0 * step),
            (endpoint(0.0, step) - endpoint(0.0, -step)) / (2.0 * step),
        ]
    )
    sv = np.linalg.svd(J, compute_uv=False)
    rank = int(np.sum(sv > 1e-6 * sv[0]))
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0.0 else np.inf
    return rank, cond


# -- curve comparison --------------------------------------------------------


def max_curve_deviation(points, reference):
    """Max distance from each of `points` to the polyline through `reference`.

    Both arguments are (n, 2) arrays of lifted plane coordinates.  One-sided
    Hausdorff distance; use densely sampled curves.
    """
    P = np.asarray(points, dtype=float)
    Q = np.asarray(reference, dtype=float)
    A, B = Q[:-1], Q[1:]
    AB = B - A
    L2 = np.maximum(np.einsum("ij,ij->i", AB, AB), 1e-300)
    worst = 0.0
    # chunk over points to bound the (points x segments) temporary
    for lo in range(0, P.shape[0], 512):
        chunk = P[lo : lo + 512]
        diff = chunk[:, None, :] - A[None, :, :]
        t = np.clip(np.einsum("pij,ij->pi", diff, AB) / L2, 0.0, 1.0)
        proj = A[None, :, :] + t[:, :, None] * AB[None, :, :]
        d = np.min(np.linalg.norm(chunk[:, None, :] - proj, axis=2), axis=1)
        worst = max(worst, float(d.max()))
    return worst
