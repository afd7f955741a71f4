"""Wave-trace synthesis, peak detection, Poisson matching, resolvent probe."""

import numpy as np
import pytest

from torusspec import laplace as lap
from torusspec import lengths as lg
from torusspec import trace as tr
from torusspec.errors import (
    BandTooShortError,
    MissingLengthError,
    ResolutionDishonestError,
    UnmatchedPeakError,
    ValidationError,
)
from torusspec.fourier import PeriodicFunction
from torusspec.laplace import LaplaceSpectrum
from torusspec.lengths import LengthEntry, NccReport
from torusspec.metrics import LiouvilleMetric

FLAT = LiouvilleMetric(PeriodicFunction([0.0], []), PeriodicFunction([0.0], []))
GENERIC = LiouvilleMetric(
    PeriodicFunction([0.0, 0.12, 0.0], [0.0, 0.0, 0.04]),
    PeriodicFunction([0.0, -0.08, 0.03], []),
)


@pytest.fixture(scope="module")
def flat10k():
    return lap.lattice_eigenvalues(count=10000)


@pytest.fixture(scope="module")
def generic_spec():
    return lap.eigenvalues(GENERIC, 2000, 128)


def _manual_spectrum(eigenvalues, area=1.0):
    ev = np.asarray(eigenvalues, dtype=float)
    return LaplaceSpectrum(
        eigenvalues=ev,
        residuals=np.zeros_like(ev),
        clusters=np.zeros(ev.size, dtype=int),
        grid=0,
        area=area,
        fingerprint="manual",
        method="manual",
    )


def test_wave_trace_validation():
    s = lap.lattice_eigenvalues(count=50)
    lam_max = s.lambdas[-1]
    with pytest.raises(ResolutionDishonestError):
        tr.wave_trace(s, 2.0, 0.01, 2.0 / lam_max)
    with pytest.raises(ValidationError):
        tr.wave_trace(s, -1.0, 0.01, 0.5)
    with pytest.raises(ValidationError):
        tr.wave_trace(s, 1.0, 0.0, 0.5)
    tr.wave_trace(s, 2.0, 0.01, 3.0 / lam_max)  # boundary is honest


def test_single_eigenvalue_closed_form():
    spec = _manual_spectrum([4.0 * np.pi**2])
    sigma = 0.5
    w = tr.wave_trace(spec, 1.0, 0.01, sigma)
    exact = np.cos(2.0 * np.pi * w.times) * np.exp(-0.5 * sigma**2 * 4.0 * np.pi**2)
    assert np.abs(w.values - exact).max() < 1e-15


def test_zero_time_value_and_evenness(flat10k):
    w = tr.wave_trace(flat10k, 1.0, 0.01, 0.03)
    assert w.values[0] == w.weights.sum()
    t = np.array([0.37, 0.8123, 1.0, 2.4])
    assert np.array_equal(w.evaluate(t), w.evaluate(-t))


def test_flat_peaks_and_poisson(flat10k):
    w = tr.wave_trace(flat10k, 2.3, 0.002, 0.03)
    peaks = tr.detect_peaks(w)
    assert peaks, "flat trace must show singularities"
    times = np.array([t for t, _ in peaks])
    assert np.all(times > 3 * w.sigma)
    for ell in (1.0, np.sqrt(2.0), 2.0):
        assert np.min(np.abs(times - ell)) <= 2 * w.sigma
    report = tr.poisson_check(w, lg.length_spectrum(FLAT, 2.4))
    assert report.ok
    assert not report.unmatched_peaks
    assert not report.missing_minimal


def test_null_control(flat10k):
    # phase-shuffled spectra: a pure-noise trace must not clear the
    # peak threshold in >= 90% of draws
    w = tr.wave_trace(flat10k, 2.3, 0.002, 0.03)
    rng = np.random.default_rng(7)
    clean = 0
    for _ in range(100):
        phases = rng.uniform(0.0, 2.0 * np.pi, w.lambdas.size)
        vals = np.empty(w.times.size)
        for i in range(0, w.times.size, 512):
            tt = w.times[i : i + 512, None]
            vals[i : i + 512] = (
                np.cos(tt * w.lambdas[None, :] + phases) * w.weights
            ).sum(axis=1)
        fake = tr.WaveTrace(
            times=w.times,
            values=vals,
            sigma=w.sigma,
            count=w.count,
            peak_times=(),
            lambdas=w.lambdas,
            weights=w.weights,
        )
        if not tr.detect_peaks(fake):
            clean += 1
    assert clean >= 90


def test_window_consistency(flat10k):
    # halving the window moves the dominant peaks by less than sigma
    sigma = 0.03
    w1 = tr.wave_trace(flat10k, 2.3, 0.002, sigma)
    w2 = tr.wave_trace(flat10k, 2.3, 0.002, sigma / 2)
    strongest = sorted(tr.detect_peaks(w1), key=lambda p: -p[1])[:3]
    t2 = np.array([t for t, _ in tr.detect_peaks(w2)])
    for t, _ in strongest:
        assert np.min(np.abs(t2 - t)) < sigma


def test_poisson_truncated_lengths_raises(flat10k):
    w = tr.wave_trace(flat10k, 2.3, 0.002, 0.03)
    with pytest.raises(UnmatchedPeakError) as exc:
        tr.poisson_check(w, lg.length_spectrum(FLAT, 1.8))
    assert exc.value.report.unmatched_peaks


def test_poisson_missing_minimal(flat10k):
    w = tr.wave_trace(flat10k, 2.3, 0.002, 0.03)
    full = lg.length_spectrum(FLAT, 2.4)
    fake = LengthEntry(length=1.75, cls=(5, 9), kind=lg.ROTATIONAL)
    spiked = lg.LengthSpectrum(
        entries=full.entries + (fake,), cutoff=2.4, fingerprint="spiked"
    )
    # informational without an NCC certificate
    report = tr.poisson_check(w, spiked)
    assert [en.length for en in report.missing_minimal] == [1.75]
    assert report.ok
    with pytest.raises(MissingLengthError):
        tr.poisson_check(w, spiked, ncc=NccReport(holds=True, witnesses=(), warnings=()))


def test_probe_validation(flat10k):
    with pytest.raises(BandTooShortError):
        tr.resolvent_probe(flat10k, 1.0, 0.05, (50.0, 80.0))
    with pytest.raises(ValidationError):
        tr.resolvent_probe(flat10k, 1.0, 0.05, (1.0, 1e6))
    # a length just outside the window support but inside the clearance zone
    spec = lap.lattice_eigenvalues(lambda_max=(60.0 + 33.0 / 0.13 + 2.0) ** 2)
    with pytest.raises(ValidationError, match="skirt"):
        tr.resolvent_probe(
            spec, 1.55, 0.13, (10.0, 60.0), lengths=lg.length_spectrum(FLAT, 2.4)
        )


def test_flat_probe_exponents():
    # growth lam^{1/2} on a window holding the length-1 geodesics; decay
    # on a window disjoint from the length spectrum
    width = 0.05
    spec = lap.lattice_eigenvalues(
        lambda_max=(600.0 + (tr.KAISER_BETA + 8.0) / width + 2.0) ** 2
    )
    on = tr.resolvent_probe(spec, 1.0, width, (50.0, 600.0))
    assert abs(on.exponent - 0.5) < 0.15
    off = tr.resolvent_probe(spec, 1.2, width, (50.0, 600.0))
    assert off.exponent < 0.0
    assert np.all(np.diff(off.shell_maxima) < 0.0)


def test_liouville_probe(generic_spec):
    ls = lg.length_spectrum(GENERIC, 4.4)
    rot = [en.length for en in ls.entries if en.kind == lg.ROTATIONAL]
    beta, width = 8.0, 0.13
    hi = generic_spec.lambdas[-1] - (beta + 8.0) / width - 0.5
    on = tr.resolvent_probe(
        generic_spec, rot[0], width, (6.0, hi), beta=beta, lengths=ls
    )
    assert on.exponent > 0.2
    gap = 0.5 * (1.4101 + 1.8543)  # midpoint of the longest length gap
    off = tr.resolvent_probe(generic_spec, gap, width, (6.0, hi), beta=beta, lengths=ls)
    assert off.exponent < -0.1


def test_liouville_minimal_lengths_detected(generic_spec):
    # every minimal rotational length <= 4 must leave a peak (NCC holds,
    # so those singularities cannot cancel)
    ncc = lg.check_ncc(GENERIC, 6.0)
    assert ncc.holds
    w = tr.wave_trace(generic_spec, 4.4, 0.002, 0.03)
    ls = lg.length_spectrum(GENERIC, 4.4)
    report = tr.poisson_check(w, ls, ncc=ncc)
    assert report.ok
    assert not report.missing_minimal
    peaks = np.array([t for t, _ in tr.detect_peaks(w)])
    for en in ls.entries:
        if en.kind == lg.ROTATIONAL and en.length <= 4.0:
            assert np.min(np.abs(peaks - en.length)) <= 2 * w.sigma
