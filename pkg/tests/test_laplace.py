"""Laplace spectra against the flat lattice, rescalings, and the separation oracle."""

import numpy as np
import pytest

from oracles import separation_eigenvalues, theta_heat_sum
from torusspec import laplace as lap
from torusspec.errors import (
    ResolutionTooLowError,
    TailTooLargeError,
    ValidationError,
)
from torusspec.fourier import PeriodicFunction
from torusspec.metrics import LiouvilleMetric

FLAT = LiouvilleMetric.flat()
GENERIC = LiouvilleMetric(
    PeriodicFunction([0.0, 0.12, 0.0], [0.0, 0.0, 0.04]),
    PeriodicFunction([0.0, -0.08, 0.03], []),
)
FOUR_PI_SQ = 4.0 * np.pi**2


def test_assemble_validation():
    with pytest.raises(ValidationError):
        lap.assemble(FLAT, 33)
    with pytest.raises(ValidationError):
        lap.assemble(FLAT, 16)
    wide = LiouvilleMetric(PeriodicFunction([0.0] * 20 + [0.01], []), PeriodicFunction([0.0], []))
    with pytest.raises(ResolutionTooLowError):
        lap.assemble(wide, 64)
    lap.assemble(wide, 128)


def test_flat_operator_is_the_laplacian():
    op = lap.assemble(FLAT, 32)
    x = np.arange(32) / 32
    w = np.cos(2 * np.pi * (3 * x[:, None] + 2 * x[None, :]))
    out = op.matvec(w.ravel())
    assert np.max(np.abs(out - FOUR_PI_SQ * 13 * w.ravel())) < 1e-9
    vals = np.linalg.eigvalsh(op.dense())
    ref = lap.lattice_eigenvalues(count=30).eigenvalues
    assert np.max(np.abs(vals[:30] - ref)) < 1e-8 * (1 + ref[-1])


def test_flat_dense_matches_lattice():
    s = lap.eigenvalues(FLAT, 20, 32)
    ref = lap.lattice_eigenvalues(count=20).eigenvalues
    assert s.eigenvalues[0] == 0.0
    assert np.max(np.abs(s.eigenvalues[1:] - ref[1:]) / ref[1:]) < 1e-10
    assert np.all(s.residuals < 1e-8)


def test_constant_density_rescaling():
    rho2 = LiouvilleMetric(PeriodicFunction([0.6], []), PeriodicFunction([0.4], []))
    s = lap.eigenvalues(rho2, 20, 32)
    ref = lap.lattice_eigenvalues(count=20).eigenvalues
    assert np.max(np.abs(2.0 * s.eigenvalues[1:] - ref[1:]) / ref[1:]) < 1e-12


def test_flat_disc_is_exact():
    s = lap.eigenvalues(FLAT, 50, 64)
    ref = lap.lattice_eigenvalues(count=50).eigenvalues
    assert np.max(np.abs(s.eigenvalues - ref)) < 1e-12
    # shell multiplicities 1, 4, 4, 4, 8 for 0, 1, 2, 4, 5
    sizes = np.bincount(s.clusters[:21])
    assert list(sizes) == [1, 4, 4, 4, 8]


def test_dense_and_disc_agree_on_generic():
    sd = lap.eigenvalues(GENERIC, 100, 32)
    sg = lap.eigenvalues(GENERIC, 100, 64)
    assert sd.method.startswith("dense")
    assert sg.method.startswith("galerkin")
    rel = np.abs(sd.eigenvalues[1:] - sg.eigenvalues[1:]) / sg.eigenvalues[1:]
    assert np.max(rel) < 1e-8


def test_disc_truncation_insensitive():
    a = lap._disc_path(GENERIC, 40, 64)
    b = lap._disc_path(GENERIC, 40, 64, r_bump=6)
    rel = np.abs(a.eigenvalues[1:] - b.eigenvalues[1:]) / b.eigenvalues[1:]
    assert np.max(rel) < 1e-10


def test_hill_path_matches_disc():
    cp = LiouvilleMetric(PeriodicFunction([0.0], []), PeriodicFunction([0.0, 0.1], []))
    sh = lap.eigenvalues(cp, 30, 64, method="hill")
    sd = lap.eigenvalues(cp, 30, 64)
    rel = np.abs(sh.eigenvalues[1:] - sd.eigenvalues[1:]) / sd.eigenvalues[1:]
    assert np.max(rel) < 1e-10
    assert np.all(sh.residuals < 1e-8)


def test_high_bandwidth_dispatch():
    # degree-40 profile on one axis: too wide for the disc, separable
    coeffs = np.zeros(41)
    coeffs[40] = 0.01
    tall = LiouvilleMetric(PeriodicFunction([0.0], []), PeriodicFunction(coeffs, []))
    s = lap.eigenvalues(tall, 12, 256)
    assert s.method.startswith("separated-hill")
    assert np.all(s.residuals < 1e-8)
    # same density but varying in both coordinates: no certified path
    both = LiouvilleMetric(PeriodicFunction(coeffs, []), PeriodicFunction(coeffs, []))
    with pytest.raises(ResolutionTooLowError):
        lap.eigenvalues(both, 12, 256)


def test_conformal_scaling_invariance():
    s2 = 1.3
    scaled = LiouvilleMetric(
        PeriodicFunction([0.5 * s2 - 0.5, s2 * 0.12, 0.0], [0.0, 0.0, s2 * 0.04]),
        PeriodicFunction([0.5 * s2 - 0.5, -s2 * 0.08, s2 * 0.03], []),
    )
    a = lap.eigenvalues(GENERIC, 40, 64)
    b = lap.eigenvalues(scaled, 40, 64)
    rel = np.abs(b.eigenvalues[1:] * s2 - a.eigenvalues[1:]) / a.eigenvalues[1:]
    assert np.max(rel) < 1e-10


def test_swap_symmetry():
    a = lap.eigenvalues(GENERIC, 40, 64)
    b = lap.eigenvalues(GENERIC.swap(), 40, 64)
    rel = np.abs(a.eigenvalues[1:] - b.eigenvalues[1:]) / a.eigenvalues[1:]
    assert np.max(rel) < 1e-11


def test_separation_oracle_agreement():
    metric = LiouvilleMetric(PeriodicFunction([0.0, 0.1], []), PeriodicFunction([0.0], []))
    s = lap.eigenvalues(metric, 20, 32)
    ref = separation_eigenvalues(metric.f1, metric.f2, 20)
    assert s.eigenvalues[0] == 0.0 and ref[0] == 0.0
    rel = np.abs(s.eigenvalues[1:] - ref[1:]) / ref[1:]
    assert np.max(rel) < 1e-6


def test_count_validation():
    with pytest.raises(ValidationError):
        lap.eigenvalues(FLAT, 0, 32)
    with pytest.raises(ValidationError):
        lap.eigenvalues(FLAT, 300, 32)


def test_weyl_slope_flat():
    s = lap.lattice_eigenvalues(count=2000)
    # cut strictly above the top eigenvalue so its whole shell is counted
    n, slope = lap.weyl_count(s, np.sqrt(s.eigenvalues[-1]) * (1.0 + 1e-12))
    assert n == 2000
    target = 1.0 / (4.0 * np.pi)
    assert abs(slope - target) / target < 0.03


def test_weyl_slope_area_two():
    rho2 = LiouvilleMetric(PeriodicFunction([0.6], []), PeriodicFunction([0.4], []))
    s = lap.eigenvalues(rho2, 300, 64)
    _, slope = lap.weyl_count(s, np.sqrt(s.eigenvalues[-1]))
    target = 2.0 / (4.0 * np.pi)
    assert abs(slope - target) / target < 0.03


def test_heat_trace_theta_oracle():
    s = lap.lattice_eigenvalues(count=400)
    for t in (0.05, 0.1):
        assert abs(lap.heat_trace(s, t) - theta_heat_sum(t)) < 1e-8
    val = 0.01 * lap.heat_trace(s, 0.01)
    assert abs(val - 1.0 / (4.0 * np.pi)) / (1.0 / (4.0 * np.pi)) < 0.01


def test_heat_trace_tail_guard():
    s = lap.lattice_eigenvalues(count=50)
    with pytest.raises(TailTooLargeError):
        lap.heat_trace(s, 1e-4)
    with pytest.raises(ValidationError):
        lap.heat_trace(s, 0.0)
