"""Wave-trace synthesis, singularity detection, and the resolvent probe.

With finitely many eigenvalues the distributional trace of the wave group
is replaced by its Gaussian smoothing

    w_sigma(t) = sum_j cos(t lambda_j) exp(-sigma^2 Lambda_j / 2),

which is the exact trace convolved with a Gaussian window of width sigma
in time.  Peaks of |w_sigma| locate the singular support up to the window
resolution, and the Poisson relation confines them to the +- length
spectrum; `poisson_check` enforces that containment and, on metrics where
the noncoincidence condition holds, the converse at the minimal rotational
lengths (those singularities cannot cancel).

The resolvent probe evaluates

    I(lam) = sum_j [ ghat(lam - lambda_j) e^{iL(lam - lambda_j)}
                   + ghat(lam + lambda_j) e^{iL(lam + lambda_j)} ]

where ghat is the transform of a time window supported on [-s, s] and
centred (by the phase factor) at the probed length L.  On a surface a
window containing a closed-geodesic length makes |I| grow like lam^{1/2};
a window disjoint from the length spectrum pairs e^{i lam t} with a
smooth compactly supported function, so |I| decays.  The window must be
compactly supported for that dichotomy to survive in floating point: a
Gaussian window of width s = 0.05 probed at L = 1.2 on the flat torus
leaks the lengths 1 and sqrt(2) (4 s away) at the e^{-8} level, and the
leaked lam^{1/2} growth swamps the decaying part everywhere past the
first shell.  We therefore use the Kaiser window
I_0(beta sqrt(1 - (t/s)^2)) / I_0(beta), whose transform is closed-form
(sinh branch inside su < beta, sinc branch outside) and whose skirt level
beta/sinh(beta) is ~2e-10 at the default beta = 25.  The price is a wide
main lobe, beta/s in frequency, so the eigenvalue list must extend
(beta + 8)/s past the band top.  Known lengths must stay inside the
window support [L - s, L + s] or clear of it by 20% of the width (pass
`lengths=` to enforce).  The growth exponent is fit on quarter-octave
shell maxima of |I|, suppressing the arithmetic oscillation of
lattice-point counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .errors import (
    BandTooShortError,
    MissingLengthError,
    ResolutionDishonestError,
    UnmatchedPeakError,
    ValidationError,
)
from .lengths import ROTATIONAL, LengthSpectrum, NccReport
from .laplace import LaplaceSpectrum

PEAK_ETA = 5.0  # prominence knob: zero false peaks on the 10k flat run
WEYL_EXCLUSION = 3.0  # the [0, 3 sigma] region belongs to the Weyl peak
MATCH_TOL_SIGMAS = 2.0
SHELL_RATIO = 2.0 ** 0.25
MIN_SHELLS = 10
GAP_WIDTHS = 1.2  # length clearance around a probe window, in window widths
KAISER_BETA = 25.0  # probe window steepness; skirt level beta/sinh(beta)


def _cosine_sum(times, lambdas, weights, chunk=512):
    # elementwise product + pairwise row sum (not a BLAS dot) so that the
    # t = 0 row reproduces weights.sum() bit for bit
    out = np.empty(times.size)
    for i in range(0, times.size, chunk):
        tt = times[i : i + chunk, None]
        out[i : i + chunk] = (np.cos(tt * lambdas[None, :]) * weights).sum(axis=1)
    return out


@dataclass(frozen=True)
class WaveTrace:
    """Gaussian-smoothed wave trace on a uniform time grid."""

    times: np.ndarray
    values: np.ndarray
    sigma: float
    count: int
    peak_times: tuple
    lambdas: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def evaluate(self, t):
        """w_sigma at arbitrary times (even in t by construction)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return _cosine_sum(t, self.lambdas, self.weights)


def wave_trace(spec: LaplaceSpectrum, t_max, dt, sigma) -> WaveTrace:
    """Evaluate w_sigma on the grid 0, dt, ..., t_max.

    Resolution honesty: sigma >= 3 / lambda_max, else the window claims
    features finer than the eigenvalue band supports.  Cost is linear in
    grid points x eigenvalues.  w_sigma(0) = sum_j exp(-sigma^2 Lambda_j/2)
    exactly.
    """
    if t_max <= 0.0 or dt <= 0.0 or dt > t_max:
        raise ValidationError("need 0 < dt <= t_max")
    if sigma <= 0.0:
        raise ValidationError("window sigma must be positive")
    lambdas = spec.lambdas
    lam_max = float(lambdas[-1])
    if lam_max <= 0.0 or sigma * lam_max < WEYL_EXCLUSION:
        raise ResolutionDishonestError(
            f"sigma {sigma:g} below 3/lambda_max = {3.0 / lam_max if lam_max else np.inf:g}; "
            "supply more eigenvalues or widen the window"
        )
    weights = np.exp(-0.5 * sigma * sigma * spec.eigenvalues)
    n = int(round(t_max / dt))
    times = np.arange(n + 1) * dt
    values = _cosine_sum(times, lambdas, weights)
    peaks = _find_peaks(times, values, sigma, PEAK_ETA)
    return WaveTrace(
        times=times,
        values=values,
        sigma=float(sigma),
        count=spec.count,
        peak_times=tuple(t for t, _ in peaks),
        lambdas=lambdas,
        weights=weights,
    )


def _find_peaks(times, values, sigma, eta):
    a = np.abs(values)
    live = times > WEYL_EXCLUSION * sigma
    if not np.any(live):
        return []
    med = float(np.median(a[live]))
    idx, props = signal.find_peaks(a, height=eta * med)
    return [
        (float(times[i]), float(h))
        for i, h in zip(idx, props["peak_heights"])
        if live[i]
    ]


def detect_peaks(trace: WaveTrace, eta=PEAK_ETA):
    """Local maxima of |w_sigma| above eta x median |w_sigma|.

    The median is taken outside [0, 3 sigma] so the Weyl peak does not
    inflate it; peaks inside that region are never reported.  Returns
    (time, height) pairs in time order.
    """
    return _find_peaks(trace.times, trace.values, trace.sigma, eta)


@dataclass(frozen=True)
class PoissonReport:
    matched: tuple  # (peak time, nearest LengthEntry) pairs
    unmatched_peaks: tuple  # peak times with no length within the tolerance
    informational: tuple  # undetected lengths (cancellation is possible)
    missing_minimal: tuple  # undetected minimal rotational lengths
    tol: float
    ok: bool


def poisson_check(
    trace: WaveTrace, lengths: LengthSpectrum, ncc: NccReport | None = None
) -> PoissonReport:
    """Match detected peaks against the length spectrum.

    Containment direction: every peak must sit within 2 sigma of a length,
    else UNMATCHED_PEAK is raised (a bug or a missing length class).
    Undetected lengths are reported as informational, since contributions
    can cancel -- except the minimal rotational lengths when `ncc` is
    supplied and holds: the noncoincidence condition forbids cancellation
    there, so their absence raises MISSING_MINIMAL_LENGTH.  Only lengths
    in (3 sigma, t_max - 2 sigma] are held to account; outside that range
    the grid cannot resolve a peak.
    """
    tol = MATCH_TOL_SIGMAS * trace.sigma
    peaks = detect_peaks(trace)
    ell = lengths.lengths()
    matched, unmatched = [], []
    hit = np.zeros(ell.size, dtype=bool)
    for t, _ in peaks:
        gaps = np.abs(ell - t)
        j = int(np.argmin(gaps)) if ell.size else 0
        if ell.size and gaps[j] <= tol:
            matched.append((t, lengths.entries[j]))
            hit[np.abs(ell - t) <= tol] = True
        else:
            unmatched.append(t)
    lo, hi = WEYL_EXCLUSION * trace.sigma, trace.times[-1] - tol
    info, missing_min = [], []
    for en, seen in zip(lengths.entries, hit):
        if seen or not (lo < en.length <= hi):
            continue
        info.append(en)
        if en.kind == ROTATIONAL:
            missing_min.append(en)
    ncc_holds = ncc is not None and ncc.holds
    report = PoissonReport(
        matched=tuple(matched),
        unmatched_peaks=tuple(unmatched),
        informational=tuple(info),
        missing_minimal=tuple(missing_min),
        tol=tol,
        ok=not unmatched and not (ncc_holds and missing_min),
    )
    if unmatched:
        raise UnmatchedPeakError(
            f"{len(unmatched)} peak(s) without a length partner within "
            f"{tol:g}, first at t = {unmatched[0]:.6f}",
            report=report,
        )
    if ncc_holds and missing_min:
        raise MissingLengthError(
            f"minimal rotational length {missing_min[0].length:.6f} "
            f"(class {missing_min[0].cls}) left no peak despite NCC",
            report=report,
        )
    return report


@dataclass(frozen=True)
class ResolventProbe:
    """Windowed resolvent trace I(lam) and its fitted growth exponent."""

    center: float
    width: float
    lam: np.ndarray
    values: np.ndarray
    shell_centers: np.ndarray
    shell_maxima: np.ndarray
    exponent: float
    halfwidth: float


def _window_hat(x, beta):
    """Normalized transform of the Kaiser window, as a function of s*u.

    sinh(g)/g with g = sqrt(beta^2 - x^2) inside the main lobe, analytic
    continuation sin(|g|)/|g| outside; the branches meet smoothly at
    x = +-beta and neither has a pole.
    """
    g2 = beta * beta - x * x
    g = np.sqrt(np.abs(g2))
    gc = np.minimum(g, beta)  # the sinh branch only applies for g <= beta
    grow = np.divide(np.sinh(gc), gc, out=np.ones_like(gc), where=gc > 0.0)
    return np.where(g2 >= 0.0, grow, np.sinc(g / np.pi)) * (beta / np.sinh(beta))


def resolvent_probe(
    spec: LaplaceSpectrum,
    center,
    width,
    band,
    beta=KAISER_BETA,
    lengths: LengthSpectrum | None = None,
) -> ResolventProbe:
    """Probe the regularized resolvent at time window center +- width.

    `band` = (lam_lo, lam_hi) is the frequency range scanned; it must stay
    (beta + 8)/width below the top certified eigenvalue so the window's
    frequency main lobe is populated.  When `lengths` is given, every
    known length must lie inside the window support or clear it by 20%
    of the width.  Fits log max|I| over quarter-octave shells against
    log lam; returns the slope and twice its standard error.
    """
    lo, hi = float(band[0]), float(band[1])
    if not (0.0 < lo < hi):
        raise ValidationError("band must satisfy 0 < lam_lo < lam_hi")
    if center <= 0.0 or width <= 0.0:
        raise ValidationError("window center and width must be positive")
    if beta < 5.0:
        raise ValidationError("window steepness beta below 5 leaks the skirt")
    n_shells = int(np.floor(np.log(hi / lo) / np.log(SHELL_RATIO)))
    if n_shells < MIN_SHELLS:
        raise BandTooShortError(
            f"band [{lo:g}, {hi:g}] spans {n_shells} quarter-octave shells; "
            f"need {MIN_SHELLS}"
        )
    lam_max = float(spec.lambdas[-1])
    margin = (beta + 8.0) / width
    if hi + margin > lam_max:
        raise ValidationError(
            f"band top {hi:g} needs eigenvalues up to {hi + margin:g} "
            f"(main lobe margin), got {lam_max:g}"
        )
    if lengths is not None:
        off = np.abs(lengths.lengths() - center)
        bad = np.flatnonzero((off > width) & (off < GAP_WIDTHS * width))
        if bad.size:
            raise ValidationError(
                f"length {lengths.entries[int(bad[0])].length:.6f} sits in the "
                f"skirt of the window [{center - width:g}, "
                f"{center + width:g}]; need a gap >= {GAP_WIDTHS * width:g}"
            )

    step = min(1.0 / width, 2.0 * np.pi / center) / 16.0
    lam = np.linspace(lo, hi, int(np.ceil((hi - lo) / step)) + 1)
    lj = spec.lambdas
    lj = lj[lj <= hi + margin]  # the skirt beyond contributes ~2e-10
    plus_cut = (beta + 40.0) / width - lo  # lam + lam_j past the far skirt
    vals = np.zeros(lam.size, dtype=complex)
    for i in range(0, lj.size, 4096):
        block = lj[i : i + 4096]
        signs = (-1.0, 1.0) if block[0] <= plus_cut else (-1.0,)
        for sign in signs:
            u = lam[:, None] + sign * block[None, :]
            w = _window_hat(width * u, beta)
            vals += (w * np.exp(1j * center * u)).sum(axis=1)

    edges = lo * SHELL_RATIO ** np.arange(n_shells + 1)
    mags = np.abs(vals)
    centers = np.sqrt(edges[:-1] * edges[1:])
    maxima = np.empty(n_shells)
    for i in range(n_shells):
        sel = (lam >= edges[i]) & (lam < edges[i + 1])
        maxima[i] = mags[sel].max()
    x, y = np.log(centers), np.log(maxima)
    a = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    se = np.sqrt(
        (resid @ resid) / (n_shells - 2) / np.sum((x - x.mean()) ** 2)
    )
    return ResolventProbe(
        center=float(center),
        width=float(width),
        lam=lam,
        values=vals,
        shell_centers=centers,
        shell_maxima=maxima,
        exponent=float(coef[0]),
        halfwidth=float(2.0 * se),
    )
