"""Closed-geodesic length spectra of Liouville metrics.

The separable structure reduces every closed geodesic to one of three types:

* rotational, class (m,n) with m*n != 0: one invariant torus per class,
  energy split e solving a monotone matching condition;
* oscillatory-critical, class (0,m) or (m,0): the circle {x1*} x T at a
  critical point x1* of f1 (resp. f2);
* oscillatory-librating: the transverse coordinate oscillates n_osc times in
  a potential well of the profile while the other coordinate winds.

All lengths are reduced to 1-D integrals of (e + f)^(+-1/2) and computed by
tanh-sinh quadrature.  The matching roots are stationary points of the
length in e, so an e-tolerance of 1e-12 yields lengths accurate to O(1e-24)
and the flat-torus anchors come out exact to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import (
    NoConvergenceError,
    OverlappingRiversError,
    ValidationError,
)
from .fourier import PeriodicFunction
from .metrics import LiouvilleMetric
from .quadrature import singular_power_integral

E_TOL = 1e-12
DEDUP_TOL = 1e-9
NCC_TOL = 1e-8
NCC_WARN_TOL = 1e-6
MIN_COMPONENT = 1e-6  # librating wells narrower than this merge with the critical circle
SUPPORT_TOL = 1e-9  # river profiles count as zero below this

ROTATIONAL = "rotational"
CRITICAL = "oscillatory-critical"
LIBRATING = "oscillatory-librating"


@dataclass(frozen=True)
class LengthEntry:
    length: float
    cls: tuple
    kind: str
    e: Optional[float] = None
    n_osc: Optional[int] = None
    component: Optional[tuple] = None
    multiplicity: int = 1


@dataclass(frozen=True)
class LengthSpectrum:
    entries: tuple
    cutoff: float
    fingerprint: str

    def lengths(self):
        return np.array([en.length for en in self.entries])


@dataclass(frozen=True)
class NccReport:
    holds: bool
    witnesses: tuple  # (rotational entry, oscillatory entry) pairs within 1e-8
    warnings: tuple  # near-coincidences within 1e-6


# -- reduced integrals ---------------------------------------------------

_argmin_cache = {}


def _argmins(f):
    key = (f.a.tobytes(), f.b.tobytes())
    if key not in _argmin_cache:
        _argmin_cache[key] = tuple(f.extrema()[2])
    return _argmin_cache[key]


def _circle_integral(f, c, power):
    """Integral of (c + f(x))^power over one period, c + f > 0.

    Plain tanh-sinh first; when c + f nearly vanishes at isolated minima the
    unsplit integrand has complex poles too close to the contour, so we
    retry with the circle split at the minima (turning the near-zeros into
    segment endpoints, where the node clustering absorbs them).
    """
    if f.is_constant():
        v = c + f.mean
        if v <= 0.0:
            raise ValidationError(f"nonpositive constant integrand: {v:.3g}")
        return v**power
    try:
        return singular_power_integral(f, c, 0.0, 1.0, power, interior_guard=False)
    except NoConvergenceError:
        mins = _argmins(f)
        if not mins or len(mins) > 8:
            raise
        pts = list(mins) + [mins[0] + 1.0]
        return sum(
            singular_power_integral(f, c, a, b, power, interior_guard=False)
            for a, b in zip(pts[:-1], pts[1:])
        )


_crit_cache = {}


def _critical_points(f, grid=4096):
    """All zeros of f' on [0,1) for a nonconstant trig polynomial."""
    key = (f.a.tobytes(), f.b.tobytes())
    if key in _crit_cache:
        return _crit_cache[key]
    x = np.arange(grid + 1) / grid
    d = f(x, deriv=1)
    pts = []
    for i in range(grid):
        if d[i] == 0.0:
            pts.append(x[i])
        elif d[i] * d[i + 1] < 0.0:
            pts.append(brentq(lambda t: f(t, deriv=1), x[i], x[i + 1], xtol=1e-14))
    out = []
    for p in sorted(q % 1.0 for q in pts):
        if not out or p - out[-1] > 1e-9:
            out.append(p)
    if len(out) > 1 and out[0] + 1.0 - out[-1] <= 1e-9:
        out.pop()
    res = tuple(out)
    _crit_cache[key] = res
    return res


# -- rotational classes --------------------------------------------------


def solve_rotational(metric: LiouvilleMetric, m: int, n: int):
    """Energy split and length for the rational torus of class (m,n), m*n != 0.

    Solves |m| T1(e) = |n| T2(e) by bisection on the bracket
    (-min f1 + d, 1 + min f2 - d), d = 1e-12; the left side is strictly
    decreasing and the right strictly increasing, and both blow up at their
    respective bracket ends, so the root exists and is unique.

    Returns (e, length, T1, T2) with T_j the one-period crossing times in
    the Maupertuis parametrization x' = +-sqrt(2(e+f)) up to the common
    factor sqrt(2) (which cancels in the matching).
    """
    if m == 0 or n == 0:
        raise ValidationError("rotational classes need m*n != 0")
    f1, f2 = metric.f1, metric.f2
    am, an = abs(m), abs(n)
    lo = -f1.min_value() + 1e-12
    hi = 1.0 + f2.min_value() - 1e-12

    def G(e):
        return am * _circle_integral(f1, e, -0.5) - an * _circle_integral(f2, 1.0 - e, -0.5)

    # G -> +inf at lo and -inf at hi (the crossing time of the slow
    # coordinate diverges at its bracket end), so the sign pattern at the
    # ends is structural and is not probed: e + f there is only ~1e-12,
    # where the integrand is all roundoff.  Bisection probes stay near the
    # root after the first few steps, where e + f is well-scaled.
    e0, e1 = lo, hi
    while hi - lo > E_TOL:
        mid = 0.5 * (lo + hi)
        if G(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    e = 0.5 * (lo + hi)
    if e - e0 < 64.0 * E_TOL or e1 - e < 64.0 * E_TOL:
        raise ValidationError(
            f"matching root for class ({m},{n}) sits at the bracket end (e = {e:.6g}); "
            "the assumed sign pattern of the matching function failed"
        )
    length = am * _circle_integral(f1, e, 0.5) + an * _circle_integral(f2, 1.0 - e, 0.5)
    t1 = _circle_integral(f1, e, -0.5)
    t2 = _circle_integral(f2, 1.0 - e, -0.5)
    return e, length, t1, t2


def rotational_length(metric: LiouvilleMetric, cls) -> LengthEntry:
    """Length of the unique rotational geodesic family in class (m,n), m*n != 0."""
    m, n = cls
    e, length, _, _ = solve_rotational(metric, m, n)
    return LengthEntry(length=length, cls=(int(m), int(n)), kind=ROTATIONAL, e=e)


# -- oscillatory classes -------------------------------------------------


def _refine_turning(f, e, xneg, xpos):
    """Polish turning points of e + f, vectorized over bracket pairs.

    ``e + f(xneg) <= 0 < e + f(xpos)``; e may be a scalar or an array
    broadcasting against the brackets.  Safeguarded Newton: steps leaving
    the bracket fall back to bisection, so the final points sit within
    1e-15 of the roots and e + f there is below the structural-zero
    threshold of the quadrature.
    """
    e = np.asarray(e, dtype=float)
    xneg = np.atleast_1d(np.asarray(xneg, dtype=float)).copy()
    xpos = np.atleast_1d(np.asarray(xpos, dtype=float)).copy()
    x = 0.5 * (xneg + xpos)
    for _ in range(80):
        v = e + f(x)
        neg = v <= 0.0
        xneg = np.where(neg, x, xneg)
        xpos = np.where(neg, xpos, x)
        if np.all(np.abs(xpos - xneg) <= 1e-15):
            break
        d = f(x, deriv=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            nx = x - v / d
        lo = np.minimum(xneg, xpos)
        hi = np.maximum(xneg, xpos)
        good = np.isfinite(nx) & (nx > lo) & (nx < hi)
        x = np.where(good, nx, 0.5 * (xneg + xpos))
    return 0.5 * (xneg + xpos)


def _well_bounds(f, e, xhat):
    """Turning points of e + f around the well maximum xhat (lifted reals).

    The sign of e + f is read off at the critical points of f only, where it
    is bounded away from zero for any e strictly between two critical levels
    (the scan grid is inset from the levels by far more than roundoff).  A
    fixed-step outward walk would instead step over the forbidden slivers
    separating adjacent wells, which become arbitrarily narrow near the top
    of a subinterval, and fuse the wells.  Each turning point then sits on a
    monotone flank between consecutive critical points and is polished with
    safeguarded Newton.
    """
    if e + float(f(xhat)) <= 0.0:
        return None
    crit = _critical_points(f)
    k = len(crit)
    # unwrap the circle to [xhat, xhat + 1) so xhat comes first, then double
    # to cover walks in both directions
    c = xhat + (np.asarray(crit) - xhat) % 1.0
    c.sort()
    vals = e + f(c)
    cd = np.concatenate([c - 1.0, c])
    vd = np.concatenate([vals, vals])
    ir = k + 1
    while ir < 2 * k and vd[ir] > 0.0:
        ir += 1
    il = k - 1
    while il >= 0 and vd[il] > 0.0:
        il -= 1
    if ir == 2 * k or il < 0:
        return None  # e + f > 0 at every critical point: well fills the circle
    r = _refine_turning(
        f, e, np.array([cd[il], cd[ir]]), np.array([cd[il + 1], cd[ir - 1]])
    )
    return float(r[0]), float(r[1])


def _well_bounds_grid(f, e_grid, xhat):
    """Well bounds around xhat at every scan energy at once.

    Same sign-at-critical-points logic as _well_bounds, but the bracket
    selection and the Newton polish run over the whole e-grid in a handful
    of array passes.  Returns (lo, hi, ok); lo/hi are NaN where ok is False.
    """
    crit = _critical_points(f)
    k = len(crit)
    c = xhat + (np.asarray(crit) - xhat) % 1.0
    c.sort()
    fv = f(c)
    cd = np.concatenate([c - 1.0, c])
    E = np.asarray(e_grid, dtype=float)
    ng = E.size
    neg = (E[:, None] + np.concatenate([fv, fv])[None, :]) <= 0.0
    ok = ~neg[:, k]  # well exists: e + f(xhat) > 0
    negr = neg[:, k + 1 :]
    ok &= negr.any(axis=1)  # otherwise the well fills the circle
    ir = k + 1 + np.argmax(negr, axis=1)
    negl = neg[:, :k][:, ::-1]
    ok &= negl.any(axis=1)
    il = k - 1 - np.argmax(negl, axis=1)
    lo = np.full(ng, np.nan)
    hi = np.full(ng, np.nan)
    idx = np.flatnonzero(ok)
    if idx.size:
        xneg = np.concatenate([cd[il[idx]], cd[ir[idx]]])
        xpos = np.concatenate([cd[il[idx] + 1], cd[ir[idx] - 1]])
        r = _refine_turning(f, np.tile(E[idx], 2), xneg, xpos)
        lo[idx] = r[: idx.size]
        hi[idx] = r[idx.size :]
    return lo, hi, ok


def _well_integral(f, e, xminus, xplus, power, crit_pts):
    """Integral over one libration half-period (turning points at both ends).

    Relative target 1e-9: near the bottom of a well e + f is an
    all-cancellation difference of O(coeff)-sized terms, so its evaluations
    carry ~1e-17/|e + f| relative noise and demanding more would just fail
    to converge.  The matching roots found from these integrals enter the
    reported lengths only at second order (the length is stationary in e on
    the matching set), so 1e-9 here keeps lengths at the 1e-10 level.

    Unsplit first; shoulder wells with interior near-zero minima (merged
    sub-wells) get retried split at the interior critical points, which
    moves the near-singular spots to segment endpoints.
    """
    try:
        return singular_power_integral(
            f, e, xminus, xplus, power, rel_tol=1e-9, interior_guard=False
        )
    except NoConvergenceError:
        interior = sorted(
            p + s
            for p in crit_pts
            for s in (-1.0, 0.0, 1.0)
            if xminus + 1e-12 < p + s < xplus - 1e-12
        )
        if not interior:
            raise
        pts = [xminus] + interior + [xplus]
        return sum(
            singular_power_integral(f, e, a, b, power, rel_tol=1e-9, interior_guard=False)
            for a, b in zip(pts[:-1], pts[1:])
        )


class _AxisScan:
    """Shared librating-scan data for one axis (librating profile f_lib,
    winding profile f_wind); reused across winding numbers k."""

    def __init__(self, f_lib, f_wind, e_grid_size=2000):
        self.f_lib = f_lib
        self.f_wind = f_wind
        self.crit = _critical_points(f_lib)
        self.crit_vals = [f_lib(p) for p in self.crit]
        fmin, fmax = f_lib.min_value(), f_lib.max_value()
        # partition (-fmax, -fmin) at interior critical levels
        levels = sorted({round(-v, 12) for v in self.crit_vals})
        cuts = [lv for lv in levels if -fmax + 1e-12 < lv < -fmin - 1e-12]
        self.subintervals = []
        bounds = [-fmax] + cuts + [-fmin]
        for u, v in zip(bounds[:-1], bounds[1:]):
            if v - u > 1e-10:
                self.subintervals.append((u, v))
        self.e_grid_size = e_grid_size
        self._scans = None

    def _wind_time(self, e):
        return _circle_integral(self.f_wind, 1.0 - e, -0.5)

    def _wind_grid(self, e_grid):
        """T_wind on the whole grid.

        T_wind(e) is analytic on the subinterval (1 - e + f_wind stays
        positive by the density certificate), so a degree-32 Chebyshev
        interpolant normally reproduces it to roundoff; it is validated
        against direct quadrature at a few interior points and dropped for
        the direct path if the metric is too close to degenerate for it.
        """
        f = self.f_wind
        if f.is_constant():
            return 1.0 / np.sqrt(1.0 - e_grid + f.mean)
        lo, hi = float(e_grid[0]), float(e_grid[-1])
        if hi - lo < 1e-8:
            return np.array([self._wind_time(e) for e in e_grid])
        fit = np.polynomial.Chebyshev.interpolate(
            lambda ee: np.array([self._wind_time(t) for t in np.atleast_1d(ee)]),
            32,
            domain=[lo, hi],
        )
        probes = np.linspace(lo + 0.13 * (hi - lo), hi - 0.07 * (hi - lo), 5)
        ref = np.array([self._wind_time(t) for t in probes])
        if np.max(np.abs(fit(probes) - ref) / np.abs(ref)) > 1e-11:
            return np.array([self._wind_time(e) for e in e_grid])
        return fit(e_grid)

    def scans(self):
        """One record per (subinterval, well): e-grid plus I_lib and T_wind values."""
        if self._scans is not None:
            return self._scans
        out = []
        ng = self.e_grid_size
        for u, v in self.subintervals:
            inset = 1e-6 * (v - u)
            e_grid = np.linspace(u + inset, v - inset, ng)
            W = self._wind_grid(e_grid)
            emid = 0.5 * (u + v)
            # well representatives: critical points that are maxima above the level
            tops = [
                p
                for p, val in zip(self.crit, self.crit_vals)
                if emid + val > 0.0 and self.f_lib(p, deriv=2) < 0.0
            ]
            # keep one representative per connected component at emid
            wells = []
            seen = []
            for p in tops:
                wb = _well_bounds(self.f_lib, emid, p)
                if wb is None:
                    continue
                key = round(wb[0] % 1.0, 9)
                if key not in seen:
                    seen.append(key)
                    wells.append(p)
            for xhat in wells:
                lo, hi, ok = _well_bounds_grid(self.f_lib, e_grid, xhat)
                ok = ok & (np.nan_to_num(hi - lo) >= MIN_COMPONENT)
                I = np.full(ng, np.nan)
                for i in np.flatnonzero(ok):
                    I[i] = _well_integral(
                        self.f_lib, e_grid[i], lo[i], hi[i], -0.5, self.crit
                    )
                out.append({"e_grid": e_grid, "xhat": xhat, "I": I, "W": W, "ok": ok})
        self._scans = out
        return out

    def match(self, e, xhat, n_osc, k):
        wb = _well_bounds(self.f_lib, e, xhat)
        if wb is None:
            return np.nan
        half = _well_integral(self.f_lib, e, wb[0], wb[1], -0.5, self.crit)
        return 2.0 * n_osc * half - k * self._wind_time(e)

    def entry(self, e, xhat, n_osc, k, cls):
        wb = _well_bounds(self.f_lib, e, xhat)
        if wb is None or wb[1] - wb[0] < MIN_COMPONENT:
            return None
        action = _well_integral(self.f_lib, e, wb[0], wb[1], 0.5, self.crit)
        wind = _circle_integral(self.f_wind, 1.0 - e, 0.5)
        length = 2.0 * n_osc * action + k * wind
        return LengthEntry(
            length=length,
            cls=cls,
            kind=LIBRATING,
            e=e,
            n_osc=n_osc,
            component=(wb[0] % 1.0, wb[0] % 1.0 + (wb[1] - wb[0])),
        )


_axis_scan_cache = {}


def _axis_scan(metric, axis):
    """axis=1: librate in x1, wind in x2 (classes (0,k)); axis=2: the swap."""
    key = (metric.fingerprint(), axis)
    if key not in _axis_scan_cache:
        f_lib, f_wind = (
            (metric.f1, metric.f2) if axis == 1 else (metric.f2, metric.f1)
        )
        _axis_scan_cache[key] = _AxisScan(f_lib, f_wind)
    return _axis_scan_cache[key]


def oscillatory_lengths(metric: LiouvilleMetric, cls, cutoff) -> list:
    """All oscillatory lengths <= cutoff in an axis class (0,m) or (m,0).

    Critical-type entries come from the critical points of the librating
    profile; librating entries from the matching roots
    2 n_osc I_lib(e) = |m| T_wind(e), enumerated per potential well with a
    sign-change scan over e (grid size is a documented knob).
    """
    m1, m2 = cls
    if (m1 == 0) == (m2 == 0):
        raise ValidationError("oscillatory classes are (0,m) or (m,0) with m != 0")
    axis = 1 if m1 == 0 else 2
    k = abs(m2) if axis == 1 else abs(m1)
    f_lib, f_wind = (metric.f1, metric.f2) if axis == 1 else (metric.f2, metric.f1)
    cls = (int(m1), int(m2))

    if f_lib.is_constant():
        c = f_lib.mean
        length = k * _circle_integral(f_wind, 1.0 + c, 0.5)
        return [LengthEntry(length=length, cls=cls, kind=CRITICAL, e=-c)] if length <= cutoff else []

    entries = []
    scan = _axis_scan(metric, axis)
    for x1s in scan.crit:
        e_star = -f_lib(x1s)
        length = k * _circle_integral(f_wind, 1.0 - e_star, 0.5)
        if length <= cutoff:
            entries.append(
                LengthEntry(
                    length=length, cls=cls, kind=CRITICAL, e=e_star, component=(x1s, x1s)
                )
            )

    for rec in scan.scans():
        e_grid, xhat, I, W, ok = (
            rec["e_grid"],
            rec["xhat"],
            rec["I"],
            rec["W"],
            rec["ok"],
        )
        n_osc = 1
        while True:
            M = 2.0 * n_osc * I - k * W
            valid = ok & np.isfinite(M)
            if not valid.any() or np.nanmin(M[valid]) > 0.0:
                break  # M increases with n_osc pointwise: no further roots
            sign = np.sign(M)
            roots = []
            idx = np.flatnonzero(valid[:-1] & valid[1:] & (sign[:-1] * sign[1:] < 0))
            for i in idx:
                r = brentq(
                    lambda e: scan.match(e, xhat, n_osc, k),
                    e_grid[i],
                    e_grid[i + 1],
                    xtol=E_TOL,
                )
                roots.append(r)
            for e_root in roots:
                en = scan.entry(e_root, xhat, n_osc, k, cls)
                if en is not None and en.length <= cutoff:
                    entries.append(en)
            n_osc += 1
            if n_osc > 10000:
                raise NoConvergenceError("librating enumeration did not terminate")
    entries.sort(key=lambda en: (en.length, en.kind, en.e if en.e is not None else 0.0))
    return entries


# -- full spectrum, NCC --------------------------------------------------


def length_spectrum(metric: LiouvilleMetric, cutoff) -> LengthSpectrum:
    """All closed-geodesic lengths <= cutoff, deduplicated at 1e-9.

    Oriented homology classes are counted: a rotational class (m,n), m,n > 0
    stands for the four orientations (+-m, +-n) (multiplicity 4); each axis
    entry stands for its two orientations (multiplicity 2).  Entries within
    1e-9 merge, multiplicities add, and the representative prefers the
    rotational member.
    """
    if cutoff <= 0:
        raise ValidationError("cutoff must be positive")
    raw = []
    sr = np.sqrt(metric.rho_min)
    B = int(np.floor(cutoff / sr)) + 1
    for m in range(1, B + 1):
        for n in range(1, B + 1):
            if np.hypot(m, n) * sr > cutoff:
                continue
            en = rotational_length(metric, (m, n))
            if en.length <= cutoff:
                raw.append(
                    LengthEntry(
                        length=en.length,
                        cls=(m, n),
                        kind=ROTATIONAL,
                        e=en.e,
                        multiplicity=4,
                    )
                )
    for k in range(1, B + 1):
        if k * sr > cutoff:
            continue
        for cls in ((0, k), (k, 0)):
            for en in oscillatory_lengths(metric, cls, cutoff):
                raw.append(
                    LengthEntry(
                        length=en.length,
                        cls=en.cls,
                        kind=en.kind,
                        e=en.e,
                        n_osc=en.n_osc,
                        component=en.component,
                        multiplicity=2,
                    )
                )
    raw.sort(key=_entry_sort_key)
    merged = []
    for en in raw:
        if merged and en.length - merged[-1][0].length <= DEDUP_TOL:
            merged[-1].append(en)
        else:
            merged.append([en])
    entries = []
    for group in merged:
        rep = min(group, key=_entry_sort_key)
        entries.append(
            LengthEntry(
                length=rep.length,
                cls=rep.cls,
                kind=rep.kind,
                e=rep.e,
                n_osc=rep.n_osc,
                component=rep.component,
                multiplicity=sum(g.multiplicity for g in group),
            )
        )
    return LengthSpectrum(
        entries=tuple(entries), cutoff=float(cutoff), fingerprint=metric.fingerprint()
    )


def _entry_sort_key(en):
    kind_rank = {ROTATIONAL: 0, CRITICAL: 1, LIBRATING: 2}[en.kind]
    return (en.length, kind_rank, en.cls, en.n_osc or 0)


def check_ncc(metric: LiouvilleMetric, cutoff) -> NccReport:
    """Noncoincidence of minimal rotational and oscillatory lengths on [0, cutoff].

    Holds when no rotational length (one per class with m*n != 0) agrees
    with an oscillatory length within 1e-8; near-misses within 1e-6 are
    reported as warnings.
    """
    sr = np.sqrt(metric.rho_min)
    B = int(np.floor(cutoff / sr)) + 1
    rot = []
    for m in range(1, B + 1):
        for n in range(1, B + 1):
            if np.hypot(m, n) * sr > cutoff:
                continue
            en = rotational_length(metric, (m, n))
            if en.length <= cutoff:
                rot.append(en)
    osc = []
    for k in range(1, B + 1):
        if k * sr > cutoff:
            continue
        for cls in ((0, k), (k, 0)):
            osc.extend(oscillatory_lengths(metric, cls, cutoff))
    witnesses = []
    warnings = []
    for r in rot:
        for o in osc:
            gap = abs(r.length - o.length)
            if gap <= NCC_TOL:
                witnesses.append((r, o))
            elif gap < NCC_WARN_TOL:
                warnings.append((r, o))
    return NccReport(
        holds=not witnesses, witnesses=tuple(witnesses), warnings=tuple(warnings)
    )


# -- two rivers ----------------------------------------------------------


def bump_profile(center=0.05, height=0.05, width=0.008, degree=140):
    """Periodized Gaussian bump as a trig polynomial.

    The support at the 1e-9 tolerance has radius width*sqrt(2 ln(height/1e-9))
    (about 6 widths); the default parameters keep it inside (0, 0.1).  The
    spectral tail beyond the default degree is below 1e-13, so the truncation
    does not disturb the support bookkeeping.
    """
    n = max(512, 4 * degree)
    x = np.arange(n) / n
    # sum the three nearest periodic images; further ones are < 1e-300
    v = np.zeros(n)
    for s in (-1.0, 0.0, 1.0):
        v += np.exp(-((x - center + s) ** 2) / (2.0 * width**2))
    return PeriodicFunction.from_samples(height * v, degree=degree)


def two_rivers(profile: PeriodicFunction, offset) -> LiouvilleMetric:
    """Liouville metric with f1 = 0 and f2 = profile + shifted profile.

    The two copies must have disjoint supports mod 1 at the 1e-9 tolerance;
    lengths of closed geodesics then do not depend on the offset while the
    Laplace spectrum generally does.
    """
    n = 8192
    x = np.arange(n) / n
    v = profile(x)
    if v.min() < -SUPPORT_TOL:
        raise ValidationError(
            f"river profile must be nonnegative (min {v.min():.3g})"
        )
    shifted = profile.shift(offset)(x)
    overlap = (v > SUPPORT_TOL) & (shifted > SUPPORT_TOL)
    if overlap.any():
        xs = x[overlap]
        raise OverlappingRiversError(
            f"river supports intersect near x2 = {xs[0]:.4f} (offset {offset:g})"
        )
    return LiouvilleMetric(PeriodicFunction.zero(), profile + profile.shift(offset))
