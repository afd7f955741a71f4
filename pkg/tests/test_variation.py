"""Energy calculus, geodesic continuation, and the rigidity pipeline."""

import numpy as np
import pytest
from scipy.integrate import quad

from oracles import jacobi_response
from torusspec import dynamics as dyn
from torusspec import lengths
from torusspec import variation as var
from torusspec.errors import NoTorusError, ValidationError
from torusspec.fourier import BivariateFunction, PeriodicFunction
from torusspec.metrics import ConformalMetric, LiouvilleMetric

FLAT = LiouvilleMetric.flat()
GENERIC = LiouvilleMetric(
    PeriodicFunction([0.0, 0.12, 0.0], [0.0, 0.0, 0.04]),
    PeriodicFunction([0.0, -0.08, 0.03], []),
)


def periodic_field(rng, n, kmax=6):
    """Random smooth variation built from integer frequencies (exactly pinned)."""
    t = np.arange(n) / n
    vals = np.zeros((n, 2))
    ders = np.zeros((n, 2))
    for k in range(1, kmax + 1):
        cs, cc = rng.normal(size=2) / k, rng.normal(size=2) / k
        w = 2.0 * np.pi * k
        vals += np.sin(w * t)[:, None] * cs + (np.cos(w * t) - 1.0)[:, None] * cc
        ders += w * np.cos(w * t)[:, None] * cs - w * np.sin(w * t)[:, None] * cc
    vals[0] = 0.0
    return var.VariationField(vals, ders)


# -- the energy functional ----------------------------------------------------


def test_energy_flat_anchors():
    assert var.energy(FLAT, var.ParamPath.straight((0.0, 0.0), (1, 0))) == 1.0
    assert var.energy(FLAT, var.ParamPath.straight((0.0, 0.0), (3, 4))) == 25.0


def test_energy_reparametrized_segment():
    # s(t) = t + 0.1 sin(2 pi t) keeps the endpoints and the trace, raises E
    n = 512
    t = np.arange(n) / n
    s = t + 0.1 * np.sin(2.0 * np.pi * t)
    path = var.ParamPath(np.column_stack([3.0 * s, 4.0 * s]), (3, 4))
    e = var.energy(FLAT, path)
    oracle = quad(lambda u: 25.0 * (1.0 + 0.2 * np.pi * np.cos(2.0 * np.pi * u)) ** 2, 0.0, 1.0)[0]
    assert e > 25.0
    assert abs(e - oracle) < 1e-10


def test_path_and_field_validation():
    with pytest.raises(ValidationError):
        var.ParamPath(np.zeros((8, 2)), (1, 0))
    with pytest.raises(ValidationError):
        var.ParamPath(np.zeros((32, 3)), (1, 0))
    with pytest.raises(ValidationError):
        var.ParamPath(np.zeros((32, 2)), (1, 0), velocities=np.zeros((16, 2)))
    bad = np.ones((32, 2))
    with pytest.raises(ValidationError):
        var.VariationField(bad)  # does not vanish at t = 0
    with pytest.raises(ValidationError):
        var.geodesic_continuation(FLAT, BivariateFunction.zero(), (1, 1), (0.0, 0.0), [0.0], b=(1.0, 1.5))


def test_resampling_energy_invariant():
    g0 = var.geodesic_continuation(GENERIC, BivariateFunction.zero(), (1, 1), (0.15, 0.4), [0.0])[0]
    assert abs(var.energy(GENERIC, g0.resampled(2)) - var.energy(GENERIC, g0)) < 1e-8


def test_energy_length_identity():
    for metric, cls in ((FLAT, (1, 1)), (GENERIC, (1, 1)), (GENERIC, (2, 1))):
        g0 = var.geodesic_continuation(metric, BivariateFunction.zero(), cls, (0.15, 0.4), [0.0])[0]
        L = dyn.find_rational_torus(metric, cls).length
        assert abs(var.energy(metric, g0) - L * L) < 1e-9


# -- first and second variations ----------------------------------------------


def test_first_variation_flat_geodesic_vanishes():
    path = var.ParamPath.straight((0.2, 0.7), (2, 1))
    rng = np.random.default_rng(5)
    for _ in range(5):
        assert abs(var.first_variation_energy(FLAT, path, periodic_field(rng, path.n))) < 1e-12


def test_first_variation_matches_finite_differences():
    # an arched non-geodesic: gamma = line + (1 - cos(2 pi t))/2 * w
    n = 512
    t = np.arange(n) / n
    w = np.array([0.0, 0.3])
    arch = (1.0 - np.cos(2.0 * np.pi * t)) / 2.0
    darch = np.pi * np.sin(2.0 * np.pi * t)
    base = var.ParamPath.straight((0.0, 0.0), (1, 0))
    path = var.ParamPath(base.points + arch[:, None] * w, (1, 0), base.velocity() + darch[:, None] * w)
    delta = var.VariationField(arch[:, None] * w, darch[:, None] * w)
    h = 1e-5
    fd = (var.energy(FLAT, path.displaced(delta, h)) - var.energy(FLAT, path.displaced(delta, -h))) / (2.0 * h)
    an = var.first_variation_energy(FLAT, path, delta)
    assert an != 0.0 and np.sign(an) == np.sign(fd)
    assert abs(an - fd) < 1e-7

    # and on a curved metric with a generic field
    g0 = var.geodesic_continuation(GENERIC, BivariateFunction.zero(), (1, 1), (0.3, 0.1), [0.0])[0]
    delta = periodic_field(np.random.default_rng(7), g0.n)
    fd = (var.energy(GENERIC, g0.displaced(delta, h)) - var.energy(GENERIC, g0.displaced(delta, -h))) / (2.0 * h)
    assert abs(var.first_variation_energy(GENERIC, g0, delta) - fd) < 1e-7


def test_first_variation_vanishes_on_liouville_geodesic():
    g0 = var.geodesic_continuation(GENERIC, BivariateFunction.zero(), (1, 1), (0.15, 0.4), [0.0])[0]
    rng = np.random.default_rng(11)
    worst = max(
        abs(var.first_variation_energy(GENERIC, g0, periodic_field(rng, g0.n))) for _ in range(20)
    )
    assert worst < 1e-7


def test_second_variation_flat_anchor():
    # delta = sin(pi t) e2 on a horizontal segment: d2E = 2 int pi^2 cos^2 = pi^2
    path = var.ParamPath.straight((0.0, 0.25), (1, 0))
    t = path.times
    delta = var.VariationField(np.column_stack([np.zeros(path.n), np.sin(np.pi * t)]))
    assert abs(var.second_variation_energy(FLAT, path, delta, delta) - np.pi**2) < 1e-12


def test_second_variation_symmetry_and_finite_differences():
    g0 = var.geodesic_continuation(GENERIC, BivariateFunction.zero(), (1, 1), (0.15, 0.4), [0.0])[0]
    rng = np.random.default_rng(13)
    d1, d2 = periodic_field(rng, g0.n), periodic_field(rng, g0.n)
    v12 = var.second_variation_energy(GENERIC, g0, d1, d2)
    v21 = var.second_variation_energy(GENERIC, g0, d2, d1)
    assert v12 == v21
    # small field keeps the quartic truncation term of the central difference
    # far below the tolerance
    ds = var.VariationField(0.05 * d1.values, 0.05 * d1.derivative())
    h = 1e-4
    fd = (
        var.energy(GENERIC, g0.displaced(ds, h))
        - 2.0 * var.energy(GENERIC, g0)
        + var.energy(GENERIC, g0.displaced(ds, -h))
    ) / h**2
    assert abs(var.second_variation_energy(GENERIC, g0, ds, ds) - fd) < 1e-5


def test_second_variation_semidefinite_on_minimizer():
    g0 = var.geodesic_continuation(GENERIC, BivariateFunction.zero(), (1, 1), (0.15, 0.4), [0.0])[0]
    rng = np.random.default_rng(17)
    low = min(
        var.second_variation_energy(GENERIC, g0, d, d)
        for d in (periodic_field(rng, g0.n) for _ in range(100))
    )
    assert low > -1e-8


# -- first variation of the class length --------------------------------------


def test_length_variation_zero_and_flat_anchor():
    lv = var.first_variation_length(GENERIC, (1, 1), BivariateFunction.zero(), n_base=4)
    assert np.all(lv.values == 0.0) and lv.average == 0.0

    # flat, class (1,0), U = cos(2 pi x2): the leaf at height c gives cos(2 pi c)/2
    U = BivariateFunction(cc=np.array([[0.0, 1.0]]))
    lv = var.first_variation_length(FLAT, (1, 0), U, n_base=8)
    c = lv.base_points[:, 1]
    assert np.max(np.abs(lv.values - 0.5 * np.cos(2.0 * np.pi * c))) < 1e-12
    assert abs(lv((0.0, 0.25))) < 1e-12


def _perturbed(f, g, s):
    k = max(f.a.size, g.a.size)
    a = np.pad(f.a, (0, k - f.a.size)) + s * np.pad(g.a, (0, k - g.a.size))
    b = np.pad(f.b, (0, k - f.b.size)) + s * np.pad(g.b, (0, k - g.b.size))
    return PeriodicFunction(a, b)


def test_length_variation_matches_length_finite_differences():
    # separable U keeps the family Liouville, so the independent route is the
    # rotational length of the perturbed metric; this is the X-ray pairing check
    u1 = PeriodicFunction([0.0, 0.05, -0.02], [0.0, 0.03])
    u2 = PeriodicFunction([0.0, -0.04], [0.0, 0.02, 0.01])
    U = BivariateFunction.from_separable_sum(u1, u2)
    eps = 1e-5
    for cls in ((1, 1), (2, 1)):
        lv = var.first_variation_length(GENERIC, cls, U, n_base=8)
        # the leaf integrals agree across the torus for a separable deformation
        assert lv.values.max() - lv.values.min() < 1e-10
        lp = lengths.rotational_length(
            LiouvilleMetric(_perturbed(GENERIC.f1, u1, eps), _perturbed(GENERIC.f2, u2, eps)), cls
        ).length
        lm = lengths.rotational_length(
            LiouvilleMetric(_perturbed(GENERIC.f1, u1, -eps), _perturbed(GENERIC.f2, u2, -eps)), cls
        ).length
        assert abs(lv.average - (lp - lm) / (2.0 * eps)) < 1e-6


# -- continuation in epsilon ---------------------------------------------------


def test_continuation_zero_deformation():
    U0 = BivariateFunction.zero()
    g0, ge, gback = var.geodesic_continuation(FLAT, U0, (1, 1), (0.2, 0.7), [0.0, 1e-2, 0.0])
    assert np.max(np.abs(ge.points - g0.points)) < 1e-12
    assert np.array_equal(gback.points, g0.points)


def test_continuation_constant_speed_and_endpoints():
    U = BivariateFunction(cc=np.array([[0.0, 0.0], [0.0, 0.3]]))
    for e in (1e-3, 1e-2):
        ge = var.geodesic_continuation(GENERIC, U, (1, 1), (0.15, 0.4), [e])[0]
        m = ConformalMetric(GENERIC, U, e)
        rho = m.density(ge.points[:, 0], ge.points[:, 1])
        speed2 = rho * (ge.velocity() ** 2).sum(axis=1)
        assert speed2.max() - speed2.min() < 1e-9 * speed2[0]
        assert np.array_equal(ge.points[0], np.array([0.15, 0.4]))


def test_continuation_matches_jacobi_oracle():
    amp = 0.3
    U = BivariateFunction(cc=np.array([[0.0, 0.0], [0.0, amp]]))
    a = (0.15, 0.4)

    def grad_u(x1, x2):
        w = 2.0 * np.pi
        return (
            -amp * w * np.sin(w * x1) * np.cos(w * x2),
            -amp * w * np.cos(w * x1) * np.sin(w * x2),
        )

    g0, g1 = var.first_order_response(FLAT, U, (1, 1), a)
    oracle = jacobi_response(grad_u, (1, 1), a, g0.times)
    assert np.max(np.abs(g1.values - oracle)) < 1e-5


def test_continuation_reversal():
    U = BivariateFunction(cc=np.array([[0.0, 0.0], [0.0, 0.3]]))
    _, g1p = var.first_order_response(GENERIC, U, (1, 1), (0.15, 0.4), h=1e-3)
    _, g1m = var.first_order_response(GENERIC, U, (1, 1), (0.15, 0.4), h=-1e-3)
    assert np.max(np.abs(g1p.values - g1m.values)) < 1e-8


def test_expansion_is_third_order():
    # class-resonant deformation so the cubic term dominates the remainder
    amp = 0.5
    U = BivariateFunction(
        cc=np.array([[0.0, 0.0], [0.0, amp]]),
        ss=np.array([[0.0, 0.0], [0.0, amp]]),
        sc=np.array([[0.0, 0.0], [0.3 * amp, 0.0]]),
    )
    a = (0.4, 0.0)
    g0, g1 = var.first_order_response(FLAT, U, (1, 1), a)
    e0 = var.energy(FLAT, g0)
    e1 = float(np.mean(U(g0.points[:, 0], g0.points[:, 1]) * (g0.velocity() ** 2).sum(axis=1)))
    d2 = var.second_variation_energy(FLAT, g0, g1, g1)
    eps = np.array([1e-2, 5e-3, 2.5e-3])
    rem = []
    for e in eps:
        ge = var.geodesic_continuation(FLAT, U, (1, 1), a, [e])[0]
        rem.append(abs(var.energy(ConformalMetric(FLAT, U, e), ge) - (e0 + e * e1 - 0.5 * e * e * d2)))
    slope = np.polyfit(np.log(eps), np.log(rem), 1)[0]
    assert 2.8 < slope < 3.2


# -- the rigidity pipeline ------------------------------------------------------


def test_rigidity_zero_deformation():
    rep = var.rigidity_test(GENERIC, BivariateFunction.zero(), (1, 1), n_base=8)
    assert rep.verdict == var.RIGID
    assert abs(rep.c) < 1e-10
    assert np.max(np.abs(rep.length_drift)) < 1e-12
    assert np.nanmax(rep.energy_drift) < 1e-9
    assert rep.residual < 1e-12


def test_rigidity_rejects_scaling_direction():
    # U = rho is the conformal rescaling direction; lengths drift at rate L/2
    V = BivariateFunction.from_separable_sum(
        PeriodicFunction(np.concatenate([[0.5], GENERIC.f1.a[1:]]), GENERIC.f1.b),
        PeriodicFunction(np.concatenate([[0.5], GENERIC.f2.a[1:]]), GENERIC.f2.b),
    )
    rep = var.rigidity_test(GENERIC, V, (1, 1), n_base=8)
    assert rep.verdict == var.LENGTH_DRIFT
    L = rep.torus.length
    assert np.max(np.abs(rep.length_drift - L / 2.0)) < 1e-6
    assert np.all(np.isnan(rep.c_fit))


def test_rigidity_localizes_pointwise_drift():
    # stage 1 localization: drift cos(2 pi c)/2 vanishes on average, not pointwise
    U = BivariateFunction(cc=np.array([[0.0, 1.0]]))
    rep = var.rigidity_test(FLAT, U, (1, 0), n_base=8)
    assert rep.verdict == var.LENGTH_DRIFT
    c = rep.base_points[:, 1]
    assert np.max(np.abs(rep.length_drift - 0.5 * np.cos(2.0 * np.pi * c))) < 1e-12
    assert abs(np.mean(rep.length_drift)) < 1e-12
    # independent route: finite differences of the perturbed loop lengths
    eps = 1e-5
    for height in (0.1, 0.33):
        tp, _ = dyn.loop_function(ConformalMetric(FLAT, U, eps), (1, 0), (0.0, height))
        tm, _ = dyn.loop_function(ConformalMetric(FLAT, U, -eps), (1, 0), (0.0, height))
        assert abs((tp - tm) / (2.0 * eps) - 0.5 * np.cos(2.0 * np.pi * height)) < 1e-6

    # a deformation with zero leaf averages passes stage 1 and is caught by the fit
    U2 = BivariateFunction(cc=np.array([[0.0, 0.0], [0.0, 1.0]]))
    rep2 = var.rigidity_test(FLAT, U2, (1, 0), n_base=8)
    assert rep2.verdict == var.NOT_PROPORTIONAL
    assert np.max(np.abs(rep2.length_drift)) < 1e-10
    c = rep2.base_points[:, 1]
    expected = np.abs(np.cos(2.0 * np.pi * c)) / np.sqrt(2.0)
    assert np.max(np.abs(rep2.proportionality_residual - expected)) < 1e-10


def test_rigidity_no_false_positives():
    rng = np.random.default_rng(23)
    for _ in range(20):
        U = BivariateFunction(
            cc=0.2 * rng.normal(size=(3, 3)),
            cs=0.2 * rng.normal(size=(3, 3)),
            sc=0.2 * rng.normal(size=(3, 3)),
            ss=0.2 * rng.normal(size=(3, 3)),
        )
        rep = var.rigidity_test(GENERIC, U, (1, 1), n_base=8)
        assert rep.verdict != var.RIGID


def test_rigidity_requires_torus():
    with pytest.raises(NoTorusError):
        var.rigidity_test(GENERIC, BivariateFunction.zero(), (1, 0))
    with pytest.raises(ValidationError):
        var.rigidity_test(ConformalMetric(GENERIC, BivariateFunction.zero(), 0.0), BivariateFunction.zero(), (1, 1))


def test_axis_class_tori():
    # flat (1,0) torus: unit length horizontal lines at every height
    torus = dyn.find_rational_torus(FLAT, (1, 0))
    assert torus.length == 1.0
    T, d = dyn.loop_function(FLAT, (1, 0), (0.3, 0.7))
    assert abs(T - 1.0) < 1e-12 and np.allclose(d, [1.0, 0.0], atol=1e-12)
    # constant transverse profile: leaves close with the predicted length
    m = LiouvilleMetric(PeriodicFunction([0.0, 0.1, 0.02]), PeriodicFunction.constant(0.05))
    torus = dyn.find_rational_torus(m, (2, 0))
    T, _ = dyn.loop_function(m, (2, 0), (0.1, 0.4))
    assert abs(T - torus.length) < 1e-10
