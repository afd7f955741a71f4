"""Truncated Fourier series on the unit circle and the unit 2-torus.

These are the only function representations used by the workbench: every
profile (f1, f2, river bumps) is a ``PeriodicFunction`` and every bivariate
perturbation U is a ``BivariateFunction``.  Keeping the data band-limited
makes means, derivatives and file round-trips exact.
"""

from __future__ import annotations

import numpy as np

from .errors import ConstantFunctionError

TWO_PI = 2.0 * np.pi


def _as_coeff_array(v, min_len=1):
    a = np.atleast_1d(np.asarray(v, dtype=float)).copy()
    if a.ndim != 1:
        raise ValueError("coefficient arrays must be one-dimensional")
    if a.size < min_len:
        a = np.pad(a, (0, min_len - a.size))
    return a


class PeriodicFunction:
    """Real trigonometric polynomial f(x) = a0 + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x).

    Parameters
    ----------
    cos : array_like
        Cosine coefficients ``a_0 .. a_K``.
    sin : array_like, optional
        Sine coefficients aligned with ``cos``; entry 0 must be zero (there is
        no sin(0) mode) and is forced to zero.

    The period is fixed to 1.  Instances are immutable.
    """

    __slots__ = ("a", "b", "_wk", "_pure_cos")

    def __init__(self, cos, sin=None):
        a = _as_coeff_array(cos)
        b = np.zeros_like(a) if sin is None else _as_coeff_array(sin)
        k = max(a.size, b.size)
        if a.size < k:
            a = np.pad(a, (0, k - a.size))
        if b.size < k:
            b = np.pad(b, (0, k - b.size))
        b[0] = 0.0
        # strip trailing zero modes so degree() is meaningful
        nz = max(np.flatnonzero((a != 0) | (b != 0)), default=0)
        last = int(nz) if np.ndim(nz) == 0 else int(nz[-1])
        a = a[: last + 1]
        b = b[: last + 1]
        a.setflags(write=False)
        b.setflags(write=False)
        self.a = a
        self.b = b
        self._wk = TWO_PI * np.arange(a.size)
        self._pure_cos = not b.any()

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls):
        return cls([0.0])

    @classmethod
    def constant(cls, c):
        return cls([float(c)])

    @classmethod
    def from_samples(cls, values, degree=None):
        """Project uniform samples onto a trig polynomial by discrete Fourier analysis.

        ``values[j] = f(j/n)``.  Modes above ``degree`` (default ``n//2 - 1``)
        are dropped.
        """
        v = np.asarray(values, dtype=float)
        n = v.size
        if n < 4:
            raise ValueError("need at least 4 samples")
        spec = np.fft.rfft(v) / n
        kmax = n // 2 - 1 if degree is None else int(degree)
        kmax = min(kmax, n // 2 - 1)
        a = np.zeros(kmax + 1)
        b = np.zeros(kmax + 1)
        a[0] = spec[0].real
        a[1:] = 2.0 * spec[1 : kmax + 1].real
        b[1:] = -2.0 * spec[1 : kmax + 1].imag
        return cls(a, b)

    # -- basic queries ------------------------------------------------

    @property
    def degree(self):
        """Highest retained mode index K (0 for constants)."""
        return self.a.size - 1

    @property
    def mean(self):
        return float(self.a[0])

    def is_constant(self, tol=0.0):
        if self.degree == 0:
            return True
        tail = np.abs(self.a[1:]).max(initial=0.0) + np.abs(self.b[1:]).max(initial=0.0)
        return tail <= tol

    def __call__(self, x, deriv=0):
        """Evaluate the series or its ``deriv``-th derivative, vectorized over x."""
        xv = np.asarray(x, dtype=float)
        ang = np.multiply.outer(np.atleast_1d(xv), self._wk)
        if deriv == 0:
            wa, wb = self.a, self.b
        else:
            w = self._wk**deriv
            wa, wb = w * self.a, w * self.b
        # quarter-turn rotation of the (cos, sin) pair per derivative order
        r = deriv % 4
        if r == 0:
            ca, cb = wa, wb
        elif r == 1:
            ca, cb = wb, -wa
        elif r == 2:
            ca, cb = -wa, -wb
        else:
            ca, cb = -wb, wa
        if self._pure_cos and (r == 0 or r == 2):
            val = np.cos(ang) @ ca
        elif self._pure_cos and (r == 1 or r == 3):
            val = np.sin(ang) @ cb
        else:
            val = np.cos(ang) @ ca + np.sin(ang) @ cb
        return val if xv.shape else float(val[0])

    def delta(self, x0, d):
        """f(x0 + d) - f(x0) without cancellation, vectorized over d.

        Each mode's increment is computed from the angle-addition form
        cos(A+B) - cos(A) = -2 cos A sin^2(B/2) - sin A sin B (and its sine
        twin), whose terms are O(B) individually, so the result keeps full
        relative accuracy even when d is many orders below the coefficient
        scale.  Used where e + f approaches a root of itself and direct
        evaluation would lose every significant digit.
        """
        d = np.asarray(d, dtype=float)
        if self.degree == 0:
            return np.zeros(d.shape) if d.shape else 0.0
        k = np.arange(1, self.a.size)
        w = TWO_PI * k
        ca, sa = np.cos(w * x0), np.sin(w * x0)
        bang = np.multiply.outer(w, np.atleast_1d(d))
        sb = np.sin(bang)
        vb = np.sin(0.5 * bang)
        vb = 2.0 * vb * vb  # 1 - cos B, stable
        dcos = -ca[:, None] * vb - sa[:, None] * sb
        dsin = -sa[:, None] * vb + ca[:, None] * sb
        out = self.a[1:] @ dcos + self.b[1:] @ dsin
        return out if d.shape else float(out[0])

    # -- algebra ------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, float)):
            a = self.a.copy()
            a.setflags(write=True)
            a[0] += other
            return PeriodicFunction(a, self.b)
        n = max(self.a.size, other.a.size)
        a = np.zeros(n)
        b = np.zeros(n)
        a[: self.a.size] += self.a
        b[: self.b.size] += self.b
        a[: other.a.size] += other.a
        b[: other.b.size] += other.b
        return PeriodicFunction(a, b)

    __radd__ = __add__

    def __mul__(self, s):
        return PeriodicFunction(self.a * s, self.b * s)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def shift(self, c):
        """Exact coefficients of x -> f(x - c)."""
        k = np.arange(self.a.size)
        ck, sk = np.cos(TWO_PI * k * c), np.sin(TWO_PI * k * c)
        return PeriodicFunction(self.a * ck - self.b * sk, self.a * sk + self.b * ck)

    # -- bounds and extrema -------------------------------------------

    def coeff_l1(self, deriv=0):
        """sum_k (2 pi k)^deriv (|a_k| + |b_k|): sup bound on the deriv-th derivative."""
        k = np.arange(self.a.size)
        w = (TWO_PI * k) ** deriv
        return float(np.sum(w * (np.abs(self.a) + np.abs(self.b))))

    def extrema(self, grid=4096, tol=1e-10, flat_tol=1e-12):
        """Certified global extrema.

        Dense scan on ``grid`` points followed by Newton polishing on f'.
        Returns ``(fmin, fmax, argmins, argmaxes, flat_intervals)`` where
        ``flat_intervals`` lists [x_lo, x_hi] runs with |f'| < ``flat_tol``
        on consecutive grid points (degenerate critical sets).

        Raises
        ------
        ConstantFunctionError
            If the series is constant (every point is critical).
        """
        if self.degree == 0:
            raise ConstantFunctionError("constant profile: every point is critical")
        x = np.arange(grid) / grid
        fx = self(x)
        dfx = self(x, deriv=1)

        def polish(x0):
            # Newton on f' with bisection-free safeguards; f'' from the series.
            xc = x0
            for _ in range(60):
                d1 = self(xc, deriv=1)
                d2 = self(xc, deriv=2)
                if d2 == 0.0:
                    break
                step = d1 / d2
                if abs(step) > 1.0 / grid:
                    step = np.sign(step) / grid
                xc -= step
                if abs(step) < 1e-16:
                    break
            return xc % 1.0

        def collect(idx_best, fbest, sign):
            # gather all grid points within tol of the best value, polish, dedup
            cand = x[np.abs(fx - fbest) < max(tol, 1e-8)]
            pts = sorted({round(polish(c), 12) % 1.0 for c in cand})
            vals = np.array([self(p) for p in pts])
            best = sign * np.max(sign * vals)
            keep = [p for p, v in zip(pts, vals) if abs(v - best) <= tol]
            # dedup points closer than grid spacing
            out = []
            for p in keep:
                if not out or min(abs(p - q) % 1.0 for q in out) > 0.5 / grid:
                    out.append(p)
            return best, out

        fmin, argmins = collect(np.argmin(fx), fx.min(), -1.0)
        fmax, argmaxes = collect(np.argmax(fx), fx.max(), +1.0)

        flat = np.abs(dfx) < flat_tol
        intervals = []
        if flat.any() and not flat.all():
            # runs of consecutive flat grid points, circularly
            idx = np.flatnonzero(flat)
            breaks = np.flatnonzero(np.diff(idx) > 1)
            runs = np.split(idx, breaks + 1)
            if len(runs) > 1 and idx[0] == 0 and idx[-1] == grid - 1:
                runs[0] = np.concatenate([runs[-1], runs[0]])
                runs = runs[:-1]
            for r in runs:
                if r.size >= 2:
                    intervals.append((x[r[0] % grid], x[r[-1] % grid]))
        return fmin, fmax, argmins, argmaxes, intervals

    def min_value(self):
        """Global minimum (convenience wrapper; constants allowed)."""
        if self.degree == 0:
            return self.mean
        return self.extrema()[0]

    def max_value(self):
        if self.degree == 0:
            return self.mean
        return self.extrema()[1]

    def __repr__(self):
        return f"PeriodicFunction(degree={self.degree}, mean={self.mean:.6g})"


class BivariateFunction:
    """Doubly periodic trig polynomial on the unit torus.

    U(x1,x2) = sum_{j,k} cc[j,k] cos cos + cs[j,k] cos sin + sc[j,k] sin cos
    + ss[j,k] sin sin, with angles 2 pi j x1 and 2 pi k x2.  All four arrays
    share the shape (J+1, K+1); sin rows/columns of index 0 are forced to 0.
    """

    __slots__ = ("cc", "cs", "sc", "ss")

    def __init__(self, cc=None, cs=None, sc=None, ss=None):
        arrs = [cc, cs, sc, ss]
        shapes = [np.asarray(a).shape for a in arrs if a is not None]
        j = max([s[0] for s in shapes], default=1)
        k = max([s[1] for s in shapes], default=1)
        out = []
        for arr in arrs:
            m = np.zeros((j, k))
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                m[: arr.shape[0], : arr.shape[1]] = arr
            out.append(m)
        out[1][:, 0] = 0.0  # cs needs k >= 1
        out[2][0, :] = 0.0  # sc needs j >= 1
        out[3][0, :] = 0.0
        out[3][:, 0] = 0.0
        for m in out:
            m.setflags(write=False)
        self.cc, self.cs, self.sc, self.ss = out

    @classmethod
    def zero(cls):
        return cls(np.zeros((1, 1)))

    @classmethod
    def from_separable_sum(cls, u1: PeriodicFunction, u2: PeriodicFunction):
        """u1(x1) + u2(x2) as a bivariate series."""
        j, k = u1.a.size, u2.a.size
        n = max(j, k)
        cc = np.zeros((n, n))
        cs = np.zeros((n, n))
        sc = np.zeros((n, n))
        cc[:j, 0] += u1.a
        sc[:j, 0] += u1.b
        cc[0, :k] += u2.a
        cs[0, :k] += u2.b
        return cls(cc, cs, sc)

    @property
    def degrees(self):
        return self.cc.shape[0] - 1, self.cc.shape[1] - 1

    @property
    def mean(self):
        return float(self.cc[0, 0])

    def is_zero(self):
        return all(np.all(m == 0) for m in (self.cc, self.cs, self.sc, self.ss))

    def _basis(self, x1, x2, d1=0, d2=0):
        j = np.arange(self.cc.shape[0])
        k = np.arange(self.cc.shape[1])
        a1 = TWO_PI * np.multiply.outer(j, np.asarray(x1, dtype=float))
        a2 = TWO_PI * np.multiply.outer(k, np.asarray(x2, dtype=float))
        w1 = (TWO_PI * j) ** d1
        w2 = (TWO_PI * k) ** d2

        def trig(ang, r, base):
            # r-th derivative of cos (base=0) or sin (base=1)
            r = (r + (0 if base == 0 else 3)) % 4  # sin = cos shifted by -pi/2
            if r == 0:
                return np.cos(ang)
            if r == 1:
                return -np.sin(ang)
            if r == 2:
                return -np.cos(ang)
            return np.sin(ang)

        c1 = w1[:, None] * trig(a1, d1, 0)
        s1 = w1[:, None] * trig(a1, d1, 1)
        c2 = w2[:, None] * trig(a2, d2, 0)
        s2 = w2[:, None] * trig(a2, d2, 1)
        return c1, s1, c2, s2

    def __call__(self, x1, x2, d1=0, d2=0):
        """Evaluate mixed partial d1 (in x1) and d2 (in x2), vectorized.

        ``x1`` and ``x2`` must have matching shapes; point pairs are evaluated
        elementwise (not on a product grid).
        """
        x1a = np.asarray(x1, dtype=float)
        scalar = x1a.ndim == 0
        c1, s1, c2, s2 = self._basis(np.atleast_1d(x1), np.atleast_1d(x2), d1, d2)
        val = (
            np.einsum("jk,jn,kn->n", self.cc, c1, c2)
            + np.einsum("jk,jn,kn->n", self.cs, c1, s2)
            + np.einsum("jk,jn,kn->n", self.sc, s1, c2)
            + np.einsum("jk,jn,kn->n", self.ss, s1, s2)
        )
        return float(val[0]) if scalar else val.reshape(np.shape(x1))

    def on_product_grid(self, x1, x2, d1=0, d2=0):
        """Evaluate on the product grid x1 (outer) by x2 (inner), shape (len(x1), len(x2)).

        Cost is O(len(x1) len(x2) (J + K)), not O(.. * J * K): the separable
        basis is contracted one factor at a time.
        """
        c1, s1, c2, s2 = self._basis(np.atleast_1d(x1), np.atleast_1d(x2), d1, d2)
        return (
            c1.T @ (self.cc @ c2)
            + c1.T @ (self.cs @ s2)
            + s1.T @ (self.sc @ c2)
            + s1.T @ (self.ss @ s2)
        )

    def transpose(self):
        """Coefficients of (x1, x2) -> U(x2, x1)."""
        return BivariateFunction(self.cc.T, self.sc.T, self.cs.T, self.ss.T)

    def coeff_l1(self, d1=0, d2=0):
        """sup bound on the (d1,d2) mixed partial from coefficient magnitudes."""
        j = (TWO_PI * np.arange(self.cc.shape[0])) ** d1
        k = (TWO_PI * np.arange(self.cc.shape[1])) ** d2
        w = np.multiply.outer(j, k)
        return float(sum(np.sum(w * np.abs(m)) for m in (self.cc, self.cs, self.sc, self.ss)))

    def __mul__(self, s):
        return BivariateFunction(self.cc * s, self.cs * s, self.sc * s, self.ss * s)

    __rmul__ = __mul__

    def __repr__(self):
        return f"BivariateFunction(degrees={self.degrees}, mean={self.mean:.6g})"
