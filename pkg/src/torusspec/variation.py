"""Energy-functional calculus on closed-up paths and the rigidity pipeline.

Paths from a to a + (m,n) in the universal cover are stored as uniform
samples on t in [0,1].  Subtracting the linear winding a + t*(m,n) leaves a
1-periodic remainder, so path velocities come from the FFT derivative of
that remainder; constructors that know the true velocity (the geodesic
continuation, straight lines) attach exact samples instead.  Endpoint-pinned
variation fields are differentiated in the sine basis sin(k pi t), which is
exact for the band-limited fields the tests and the pipeline produce, and
which handles the half-integer frequencies (sin(pi t) and friends) that the
periodic FFT cannot represent.

All integrals over t use the periodic trapezoid rule (the plain mean over
the uniform grid).  For the closed-up integrands the workbench produces --
geodesic loops, periodic variations, continuation response fields -- this is
spectrally exact; first and second variations additionally match finite
differences of the discrete energy for arbitrary fields, because the
analytic formulas are the exact chain rule of the discrete functional.

The rigidity test runs the deformation pipeline over a sweep of base points
on a rational torus: (1) the first variation of the class length, which must
vanish pointwise for an isospectral deformation; (2) continuation of the
closed geodesic in epsilon and the constancy of E_eps(gamma_eps); (3) the
second-order term d2E(gamma1, gamma1); (4) a weighted least-squares fit of
U = c * rho against the conformal rescaling direction, whose residual
certifies (or refutes) proportionality along the leaf.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .dynamics import (
    DEFAULT_DT,
    GeodesicState,
    find_rational_torus,
    flow,
    loop_function,
    torus_state,
    RationalTorus,
)
from .errors import NoConvergenceError, ValidationError
from .fourier import BivariateFunction
from .metrics import ConformalMetric, LiouvilleMetric

PATH_SAMPLES = 512
# below DRIFT_REL_TOL * L the pipeline treats the class length as preserved;
# the analytic statement assumes exact preservation, so this is the one
# unavoidable numerical knob of the rigidity test
DRIFT_REL_TOL = 1e-8
PROPORTIONALITY_TOL = 1e-6
RICHARDSON_H = 1e-3

RIGID = "RIGID"
LENGTH_DRIFT = "LENGTH_DRIFT"
NOT_PROPORTIONAL = "NOT_PROPORTIONAL"


# -- spectral helpers --------------------------------------------------------


def _fft_derivative(values):
    """d/dt of 1-periodic samples (rows at t = i/n); Nyquist mode dropped."""
    n = values.shape[0]
    freqs = np.fft.fftfreq(n, d=1.0 / n)
    mult = 2.0j * np.pi * freqs
    if n % 2 == 0:
        mult[n // 2] = 0.0
    return np.fft.ifft(mult[:, None] * np.fft.fft(values, axis=0), axis=0).real


def _fft_resample(values, n2):
    """Trigonometric interpolation of periodic samples onto an n2-grid."""
    n = values.shape[0]
    spec = np.fft.rfft(values, axis=0)
    return np.fft.irfft(spec, n=n2, axis=0) * (n2 / n)


def _sine_derivative(values):
    """d/dt of samples of sum_k c_k sin(k pi t) given at t = i/n, i < n."""
    n = values.shape[0]
    # interior DST-I inverts the sine sums; values[0] = 0 is enforced upstream
    c = scipy.fft.dst(values[1:], type=1, axis=0) / n
    b = np.pi * np.arange(1, n)[:, None] * c
    pad = np.zeros((n + 1, values.shape[1]))
    pad[1:n] = b
    return scipy.fft.dct(pad, type=1, axis=0)[:n] / 2.0


# -- domain types ------------------------------------------------------------


@dataclass(frozen=True)
class ParamPath:
    """Closed-up path from points[0] to points[0] + cls on the universal cover.

    points holds samples at t = i/n for i = 0..n-1; gamma(1) is pinned to
    points[0] + cls by the winding representation, never stored.  When
    velocities is None the velocity is the spectral derivative of the
    winding-reduced remainder, valid for smoothly closed paths.
    """

    points: np.ndarray
    cls: tuple
    velocities: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 16:
            raise ValidationError("a path needs at least 16 samples of shape (n, 2)")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "cls", (int(self.cls[0]), int(self.cls[1])))
        if self.velocities is not None:
            v = np.asarray(self.velocities, dtype=float)
            if v.shape != pts.shape:
                raise ValidationError("velocity samples must match the point samples")
            object.__setattr__(self, "velocities", v)

    @classmethod
    def straight(cls, a, klass, n=PATH_SAMPLES):
        a = np.asarray(a, dtype=float)
        t = np.arange(n)[:, None] / n
        return cls(a + t * np.asarray(klass, dtype=float), klass)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def a(self):
        return self.points[0]

    @property
    def times(self):
        return np.arange(self.n) / self.n

    def velocity(self):
        if self.velocities is not None:
            return self.velocities
        w = np.asarray(self.cls, dtype=float)
        p = self.points - self.a - self.times[:, None] * w
        return w + _fft_derivative(p)

    def displaced(self, delta: "VariationField", h):
        """The path gamma + h * delta with the exactly displaced velocity."""
        return ParamPath(
            self.points + h * delta.values,
            self.cls,
            self.velocity() + h * delta.derivative(),
        )

    def resampled(self, factor=2):
        """Trigonometric resampling; the built-in discretization check."""
        n2 = int(self.n * factor)
        w = np.asarray(self.cls, dtype=float)
        t = self.times[:, None]
        p2 = _fft_resample(self.points - self.a - t * w, n2)
        t2 = (np.arange(n2) / n2)[:, None]
        v2 = None
        if self.velocities is not None:
            v2 = w + _fft_resample(self.velocities - w, n2)
        return ParamPath(self.a + t2 * w + p2, self.cls, v2)


@dataclass(frozen=True)
class VariationField:
    """Vector field along a path with delta(0) = delta(1) = 0.

    Pinning at t=0 is checked exactly on the stored samples; pinning at t=1
    is built into the sine representation.  Constructors that know the true
    derivative (the continuation response, analytic test fields) attach it;
    otherwise the sine-basis spectral derivative is used.
    """

    values: np.ndarray
    derivs: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 16:
            raise ValidationError("a variation needs at least 16 samples of shape (n, 2)")
        if v[0, 0] != 0.0 or v[0, 1] != 0.0:
            raise ValidationError("variation fields must vanish exactly at the endpoints")
        object.__setattr__(self, "values", v)
        if self.derivs is not None:
            d = np.asarray(self.derivs, dtype=float)
            if d.shape != v.shape:
                raise ValidationError("derivative samples must match the value samples")
            object.__setattr__(self, "derivs", d)

    def derivative(self):
        return self.derivs if self.derivs is not None else _sine_derivative(self.values)


# -- the energy functional and its variations --------------------------------


def _rho_data(metric, path, order):
    x1, x2 = path.points[:, 0], path.points[:, 1]
    out = [metric.density(x1, x2)]
    if order >= 1:
        out.append(metric.density_grad(x1, x2))
    if order >= 2:
        out.append(metric.density_hess(x1, x2))
    return out


def energy(metric, path: ParamPath):
    """E(gamma) = int_0^1 rho(gamma) |gamma'|^2 dt; equals L^2 on constant-speed geodesics."""
    v = path.velocity()
    (rho,) = _rho_data(metric, path, 0)
    return float(np.mean(rho * (v[:, 0] ** 2 + v[:, 1] ** 2)))


def first_variation_energy(metric, path: ParamPath, delta: VariationField):
    """dE(delta) = int (grad rho . delta) |gamma'|^2 + 2 rho gamma' . delta' dt."""
    v = path.velocity()
    d, dd = delta.values, delta.derivative()
    rho, (g1, g2) = _rho_data(metric, path, 1)
    speed2 = v[:, 0] ** 2 + v[:, 1] ** 2
    lin = (g1 * d[:, 0] + g2 * d[:, 1]) * speed2
    kin = 2.0 * rho * (v[:, 0] * dd[:, 0] + v[:, 1] * dd[:, 1])
    return float(np.mean(lin + kin))


def second_variation_energy(metric, path: ParamPath, d1: VariationField, d2: VariationField):
    """Bilinear Hessian of E at the path; symmetric in (d1, d2) by the formula."""
    v = path.velocity()
    a, da = d1.values, d1.derivative()
    b, db = d2.values, d2.derivative()
    rho, (g1, g2), (h11, h12, h22) = _rho_data(metric, path, 2)
    speed2 = v[:, 0] ** 2 + v[:, 1] ** 2
    quad = (
        h11 * a[:, 0] * b[:, 0]
        + h12 * (a[:, 0] * b[:, 1] + a[:, 1] * b[:, 0])
        + h22 * a[:, 1] * b[:, 1]
    ) * speed2
    cross = 2.0 * (g1 * a[:, 0] + g2 * a[:, 1]) * (v[:, 0] * db[:, 0] + v[:, 1] * db[:, 1])
    cross += 2.0 * (g1 * b[:, 0] + g2 * b[:, 1]) * (v[:, 0] * da[:, 0] + v[:, 1] * da[:, 1])
    kin = 2.0 * rho * (da[:, 0] * db[:, 0] + da[:, 1] * db[:, 1])
    return float(np.mean(quad + cross + kin))


# -- first variation of the class length -------------------------------------


def _uniform_flow(metric, state, T, n, dt):
    """Flow for time T sampled at exactly uniform times i*T/n, i = 0..n."""
    steps_per = max(1, int(np.ceil(T / (n * dt))))
    return flow(metric, state, T, dt=T / (n * steps_per), n_samples=n + 1)


def _leaf_integral(metric, torus, x, U, n, dt):
    """(1/2) int U/rho ds over the unit-speed torus leaf through x."""
    fp = _uniform_flow(metric, torus_state(metric, torus, x), torus.length, n, dt)
    pts = fp.samples[:-1, 1:3]
    rho = metric.density(pts[:, 0], pts[:, 1])
    u = U(pts[:, 0], pts[:, 1])
    return torus.length * float(np.mean(u / (2.0 * rho)))


@dataclass(frozen=True)
class LengthVariation:
    """d(class length)/d(eps) of eps*U as a function of the leaf base point."""

    cls: tuple
    torus: RationalTorus
    base_points: np.ndarray
    values: np.ndarray
    average: float
    _metric: LiouvilleMetric = field(repr=False)
    _U: BivariateFunction = field(repr=False)

    def __call__(self, x):
        return _leaf_integral(
            self._metric, self.torus, np.asarray(x, dtype=float), self._U, 2048, DEFAULT_DT
        )


def first_variation_length(metric, cls, U, n_base=16, dt=DEFAULT_DT):
    """First-order response of the (m,n) torus length to the deformation U.

    Sweeps n_base leaves through a uniform transversal (x1 = 0 for winding
    classes with m != 0, x2 = 0 otherwise) and evaluates the half-weighted
    line integral (1/2) int U/sqrt(rho) |gamma'| dt on each; the torus
    average is the uniform mean over the sweep.
    """
    if not isinstance(metric, LiouvilleMetric):
        raise ValidationError("the length variation is defined against a Liouville base")
    torus = find_rational_torus(metric, cls)
    c = np.arange(n_base) / n_base
    if cls[0] != 0:
        base = np.column_stack([np.zeros(n_base), c])
    else:
        base = np.column_stack([c, np.zeros(n_base)])
    values = np.array([_leaf_integral(metric, torus, x, U, 2048, dt) for x in base])
    return LengthVariation(
        cls=(int(cls[0]), int(cls[1])),
        torus=torus,
        base_points=base,
        values=values,
        average=float(values.mean()),
        _metric=metric,
        _U=U,
    )


# -- continuation of closed geodesics in epsilon ------------------------------


def _closed_geodesic(metric, cls, a, n, dt):
    """Constant-speed ParamPath of the closed-up geodesic through a.

    Shoots to residual 1e-12 (well inside the 1e-9 contract): the epsilon
    expansion divides energies of neighbouring family members by eps^3, so
    the stopping wobble of the flight time must sit far below the remainder.
    """
    T0, _ = loop_function(metric, cls, a, dt, tol=1e-12)
    steps_per = max(1, int(np.ceil(T0 / (n * dt))))
    # re-shoot at the sampling step so the recorded endpoint is the Newton one
    T, d0 = loop_function(metric, cls, a, T0 / (n * steps_per), tol=1e-12)
    rho0 = float(metric.density(a[0], a[1]))
    state = GeodesicState(
        float(a[0] % 1.0),
        float(a[1] % 1.0),
        float(np.sqrt(rho0) * d0[0]),
        float(np.sqrt(rho0) * d0[1]),
        int(np.floor(a[0])),
        int(np.floor(a[1])),
    )
    fp = flow(metric, state, T, dt=T / (n * steps_per), n_samples=n + 1)
    target = np.asarray(a, dtype=float) + np.asarray(cls, dtype=float)
    res = float(np.max(np.abs(fp.samples[-1, 1:3] - target)))
    if res > 1e-9:
        raise NoConvergenceError(
            f"closed-up endpoint residual {res:.3e} exceeds 1e-9 for class {cls}"
        )
    pts = fp.samples[:-1, 1:3]
    rho = metric.density(pts[:, 0], pts[:, 1])
    # gamma(t) = x(tT) in flow time, so dgamma/dt = T xi / rho
    vel = T * fp.samples[:-1, 3:5] / rho[:, None]
    return ParamPath(pts, cls, vel), T


def geodesic_continuation(base, U, cls, a, eps, b=None, n=PATH_SAMPLES, dt=DEFAULT_DT):
    """Constant-speed closed-up geodesics of rho + eps*U for each eps.

    Endpoints a and b = a + (m,n) stay fixed along the family; passing b is
    optional and only cross-checked.  Endpoint residuals are held below
    1e-9 by the Newton shooting.
    """
    a = np.asarray(a, dtype=float)
    if b is not None:
        bb = np.asarray(b, dtype=float)
        if np.max(np.abs(bb - a - np.asarray(cls, dtype=float))) > 1e-12:
            raise ValidationError("b must equal a + (m,n) for a closed-up path")
    out = []
    for e in np.atleast_1d(np.asarray(eps, dtype=float)):
        metric = base if e == 0.0 else ConformalMetric(base, U, float(e))
        out.append(_closed_geodesic(metric, cls, a, n, dt)[0])
    return out


def _richardson_field(g0, gh, gh2, h):
    vals = (4.0 * gh2.points - gh.points - 3.0 * g0.points) / h
    vals[0] = 0.0  # endpoints shared exactly by the whole family
    ders = (4.0 * gh2.velocity() - gh.velocity() - 3.0 * g0.velocity()) / h
    return VariationField(vals, ders)


def first_order_response(base, U, cls, a, h=RICHARDSON_H, n=PATH_SAMPLES, dt=DEFAULT_DT):
    """gamma0 and gamma1 = d(gamma_eps)/d(eps) by Richardson over {h, h/2}.

    Velocities of the response field come from the same extrapolation of the
    exact path velocities, keeping the field spectrally consistent.
    """
    g0, gh, gh2 = geodesic_continuation(base, U, cls, a, [0.0, h, h / 2.0], n=n, dt=dt)
    return g0, _richardson_field(g0, gh, gh2, h)


# -- the rigidity pipeline ----------------------------------------------------


@dataclass(frozen=True)
class RigidityReport:
    """Per-base-point record of the deformation pipeline on one torus.

    Arrays are aligned with base_points; stages after a length-drift failure
    are not run and hold NaN.  verdict is RIGID only when the length drift
    vanishes below DRIFT_REL_TOL * L and both the proportionality residual
    and the fitted c stay below PROPORTIONALITY_TOL.
    """

    cls: tuple
    torus: RationalTorus
    base_points: np.ndarray
    length_drift: np.ndarray
    energy_drift: np.ndarray
    second_order: np.ndarray
    c_fit: np.ndarray
    proportionality_residual: np.ndarray
    c: float
    residual: float
    verdict: str


def rigidity_test(base, U, cls, n_base=16, h=RICHARDSON_H, dt=DEFAULT_DT):
    """Numerical torus-rigidity pipeline for the deformation rho + eps*U.

    Stage 1 sweeps the first length variation over base points; any pointwise
    drift above DRIFT_REL_TOL * L reports LENGTH_DRIFT (the deformation moves
    the marked length, so no isospectral conclusion is available).  Otherwise
    each base point runs the continuation: energy constancy along eps in
    {h, h/2}, the second-order term d2E(gamma1, gamma1), and the weighted
    least-squares fit of U = c * rho with weight |gamma'|^2 / rho, for which
    E^(1)(gamma0) = c L^2 holds identically.  The fit residual is the
    certificate; a deformation is accepted as RIGID only when it and |c|
    vanish within PROPORTIONALITY_TOL.  Base points are independent, so the
    sweep parallelizes trivially; rows are emitted in base-point order.
    """
    if not isinstance(base, LiouvilleMetric):
        raise ValidationError("the rigidity test is defined against a Liouville base")
    lv = first_variation_length(base, cls, U, n_base=n_base, dt=dt)
    K = len(lv.base_points)
    L = lv.torus.length
    nan = np.full(K, np.nan)
    report = dict(
        cls=lv.cls,
        torus=lv.torus,
        base_points=lv.base_points,
        length_drift=lv.values,
        energy_drift=nan.copy(),
        second_order=nan.copy(),
        c_fit=nan.copy(),
        proportionality_residual=nan.copy(),
    )
    if float(np.max(np.abs(lv.values))) > DRIFT_REL_TOL * L:
        return RigidityReport(
            **report, c=float("nan"), residual=float("nan"), verdict=LENGTH_DRIFT
        )

    for k, x in enumerate(lv.base_points):
        g0, gh, gh2 = geodesic_continuation(base, U, cls, x, [0.0, h, h / 2.0], dt=dt)
        g1 = _richardson_field(g0, gh, gh2, h)
        e0 = energy(base, g0)
        drift = 0.0
        for e, ge in ((h, gh), (h / 2.0, gh2)):
            ee = energy(ConformalMetric(base, U, e), ge)
            drift = max(drift, abs(ee - e0) / e)
        report["energy_drift"][k] = drift
        report["second_order"][k] = second_variation_energy(base, g0, g1, g1)
        pts = g0.points
        v = g0.velocity()
        rho = base.density(pts[:, 0], pts[:, 1])
        w = (v[:, 0] ** 2 + v[:, 1] ** 2) / rho
        uvals = U(pts[:, 0], pts[:, 1])
        c_k = float(np.sum(w * uvals * rho) / np.sum(w * rho * rho))
        r_k = float(np.sqrt(np.sum(w * (uvals - c_k * rho) ** 2) / np.sum(w)))
        report["c_fit"][k] = c_k
        report["proportionality_residual"][k] = r_k

    c = float(np.mean(report["c_fit"]))
    residual = float(np.max(report["proportionality_residual"]))
    ok = residual < PROPORTIONALITY_TOL and abs(c) < PROPORTIONALITY_TOL
    return RigidityReport(
        **report, c=c, residual=residual, verdict=RIGID if ok else NOT_PROPORTIONAL
    )
