"""Conformally flat metrics on the unit 2-torus.

Two families:

* ``LiouvilleMetric`` with density rho(x1,x2) = 1 + f1(x1) + f2(x2), the
  separable case whose geodesic flow is integrable, and
* ``ConformalMetric``, a Liouville base plus epsilon * U(x1,x2) with U an
  arbitrary trig polynomial, used for perturbative comparisons.

Positivity of the density is certified at construction time: a dense grid
scan combined with a coefficient-based bound on the gradient gives a lower
bound valid between grid points.  Everything downstream may divide by rho
or take its square root without further checks.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .errors import ValidationError
from .fourier import BivariateFunction, PeriodicFunction

_CERT_GRID = 4096


def _fmt(x):
    """17-significant-digit decimal form; round-trips float64 exactly."""
    return format(float(x), ".17g")


def _certify_separable(f1, f2):
    """Certified (min, max) of 1 + f1(x1) + f2(x2) over the torus."""
    x = np.arange(_CERT_GRID) / _CERT_GRID
    v1, v2 = f1(x), f2(x)
    margin = (f1.coeff_l1(1) + f2.coeff_l1(1)) * 0.5 / _CERT_GRID
    lo = 1.0 + v1.min() + v2.min() - margin
    hi = 1.0 + v1.max() + v2.max() + margin
    return lo, hi


class LiouvilleMetric:
    """ds^2 = (1 + f1(x1) + f2(x2)) (dx1^2 + dx2^2) on [0,1)^2.

    Raises ``ValidationError`` if the density cannot be certified positive.
    """

    def __init__(self, f1: PeriodicFunction, f2: PeriodicFunction):
        self.f1 = f1
        self.f2 = f2
        self.rho_min, self.rho_max = _certify_separable(f1, f2)
        if self.rho_min <= 0.0:
            raise ValidationError(
                f"density not certified positive: lower bound {self.rho_min:.6g}"
            )

    @classmethod
    def flat(cls):
        return cls(PeriodicFunction.zero(), PeriodicFunction.zero())

    # -- density and derivatives --------------------------------------

    def density(self, x1, x2):
        return 1.0 + self.f1(x1) + self.f2(x2)

    def density_grad(self, x1, x2):
        return self.f1(x1, deriv=1), self.f2(x2, deriv=1)

    def density_hess(self, x1, x2):
        """(d11, d12, d22) of rho; the mixed term vanishes for Liouville data."""
        zeros = np.zeros(np.broadcast(np.asarray(x1), np.asarray(x2)).shape)
        d12 = zeros if zeros.shape else 0.0
        return self.f1(x1, deriv=2), d12, self.f2(x2, deriv=2)

    def density_on_grid(self, n):
        """rho at the n-by-n product grid (j/n, k/n); row index is x1."""
        x = np.arange(n) / n
        return 1.0 + self.f1(x)[:, None] + self.f2(x)[None, :]

    # -- global quantities --------------------------------------------

    @property
    def area(self):
        """Riemannian area of the torus; exact from the constant modes."""
        return 1.0 + self.f1.mean + self.f2.mean

    @property
    def is_flat(self):
        return self.f1.is_constant() and self.f2.is_constant() and self.area == 1.0

    def swap(self):
        """The same metric with the two coordinates exchanged."""
        return LiouvilleMetric(self.f2, self.f1)

    def fingerprint(self):
        """Short stable hash of the defining data; keys caches and output dirs."""
        h = hashlib.sha256()
        h.update(b"liouville")
        for arr in (self.f1.a, self.f1.b, self.f2.a, self.f2.b):
            h.update(("|" + ",".join(_fmt(v) for v in arr)).encode())
        return h.hexdigest()[:12]

    def __repr__(self):
        return (
            f"LiouvilleMetric(deg f1={self.f1.degree}, deg f2={self.f2.degree}, "
            f"rho in [{self.rho_min:.4g}, {self.rho_max:.4g}])"
        )


class ConformalMetric:
    """rho = (1 + f1 + f2) + epsilon * U with U a bivariate trig polynomial."""

    def __init__(self, base: LiouvilleMetric, U: BivariateFunction, epsilon: float):
        self.base = base
        self.U = U
        self.epsilon = float(epsilon)
        lo, hi = _certify_separable(base.f1, base.f2)
        if not U.is_zero() and self.epsilon != 0.0:
            x = np.arange(_CERT_GRID) / _CERT_GRID
            g = self.epsilon * U.on_product_grid(x, x)
            pert_margin = abs(self.epsilon) * (U.coeff_l1(1, 0) + U.coeff_l1(0, 1))
            pert_margin *= 0.5 / _CERT_GRID
            # base and perturbation extrema need not align; combine the grid
            # minima of the full density with both margins instead
            rho = (
                1.0
                + base.f1(x)[:, None]
                + base.f2(x)[None, :]
                + g
            )
            margin = (
                base.f1.coeff_l1(1) + base.f2.coeff_l1(1)
            ) * 0.5 / _CERT_GRID + pert_margin
            lo = rho.min() - margin
            hi = rho.max() + margin
        self.rho_min, self.rho_max = lo, hi
        if self.rho_min <= 0.0:
            raise ValidationError(
                f"density not certified positive: lower bound {self.rho_min:.6g}"
            )

    @property
    def f1(self):
        return self.base.f1

    @property
    def f2(self):
        return self.base.f2

    def density(self, x1, x2):
        return self.base.density(x1, x2) + self.epsilon * self.U(x1, x2)

    def density_grad(self, x1, x2):
        g1, g2 = self.base.density_grad(x1, x2)
        return (
            g1 + self.epsilon * self.U(x1, x2, d1=1),
            g2 + self.epsilon * self.U(x1, x2, d2=1),
        )

    def density_hess(self, x1, x2):
        h11, h12, h22 = self.base.density_hess(x1, x2)
        e = self.epsilon
        return (
            h11 + e * self.U(x1, x2, d1=2),
            h12 + e * self.U(x1, x2, d1=1, d2=1),
            h22 + e * self.U(x1, x2, d2=2),
        )

    def density_on_grid(self, n):
        x = np.arange(n) / n
        rho = self.base.density_on_grid(n)
        if self.epsilon != 0.0 and not self.U.is_zero():
            rho = rho + self.epsilon * self.U.on_product_grid(x, x)
        return rho

    @property
    def area(self):
        return self.base.area + self.epsilon * self.U.mean

    @property
    def is_flat(self):
        return self.base.is_flat and (self.epsilon == 0.0 or self.U.is_zero())

    def swap(self):
        return ConformalMetric(self.base.swap(), self.U.transpose(), self.epsilon)

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(b"conformal")
        for arr in (self.base.f1.a, self.base.f1.b, self.base.f2.a, self.base.f2.b):
            h.update(("|" + ",".join(_fmt(v) for v in arr)).encode())
        for m in (self.U.cc, self.U.cs, self.U.sc, self.U.ss):
            h.update(("|" + ",".join(_fmt(v) for v in m.ravel())).encode())
        h.update(("|" + _fmt(self.epsilon)).encode())
        return h.hexdigest()[:12]

    def __repr__(self):
        return (
            f"ConformalMetric(eps={self.epsilon:g}, "
            f"rho in [{self.rho_min:.4g}, {self.rho_max:.4g}])"
        )


# -- metric files -------------------------------------------------------
#
# {
#   "f1": {"cos": [a0, a1, ...], "sin": [0, b1, ...]},
#   "f2": {"cos": [...], "sin": [...]},
#   "U": {"modes": [{"j": 1, "k": 2, "cc": 0.1, "cs": 0, "sc": 0, "ss": 0}, ...]},
#   "epsilon": 0.001
# }
#
# "U" and "epsilon" are optional; leaving both out gives a Liouville metric.


def _path_msg(path, where, msg):
    return f"{path}: {where}: {msg}"


def _read_profile(path, key, obj):
    if key not in obj:
        raise ValidationError(_path_msg(path, "$", f"missing required key '{key}'"))
    prof = obj[key]
    if not isinstance(prof, dict):
        raise ValidationError(_path_msg(path, f"$.{key}", "expected an object"))
    for sub in prof:
        if sub not in ("cos", "sin"):
            raise ValidationError(_path_msg(path, f"$.{key}", f"unexpected key '{sub}'"))
    cos = prof.get("cos", [0.0])
    sin = prof.get("sin", None)
    for name, arr in (("cos", cos), ("sin", sin)):
        if arr is None:
            continue
        if not isinstance(arr, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in arr
        ):
            raise ValidationError(
                _path_msg(path, f"$.{key}.{name}", "expected a list of numbers")
            )
    if sin is not None and len(sin) > 0 and sin[0] != 0:
        raise ValidationError(
            _path_msg(path, f"$.{key}.sin[0]", "sin coefficient of mode 0 must be 0")
        )
    return PeriodicFunction(cos, sin)


def _read_bivariate(path, obj):
    u = obj["U"]
    if not isinstance(u, dict) or "modes" not in u:
        raise ValidationError(_path_msg(path, "$.U", "expected {'modes': [...]}"))
    modes = u["modes"]
    if not isinstance(modes, list):
        raise ValidationError(_path_msg(path, "$.U.modes", "expected a list"))
    jmax = 0
    kmax = 0
    parsed = []
    for i, m in enumerate(modes):
        where = f"$.U.modes[{i}]"
        if not isinstance(m, dict):
            raise ValidationError(_path_msg(path, where, "expected an object"))
        try:
            j, k = int(m["j"]), int(m["k"])
        except (KeyError, TypeError, ValueError):
            raise ValidationError(_path_msg(path, where, "needs integer 'j' and 'k'"))
        if j < 0 or k < 0:
            raise ValidationError(_path_msg(path, where, "mode indices must be >= 0"))
        vals = {}
        for c in ("cc", "cs", "sc", "ss"):
            v = m.get(c, 0.0)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ValidationError(_path_msg(path, f"{where}.{c}", "expected a number"))
            vals[c] = float(v)
        if j == 0 and (vals["sc"] != 0 or vals["ss"] != 0):
            raise ValidationError(_path_msg(path, where, "sin mode with j = 0"))
        if k == 0 and (vals["cs"] != 0 or vals["ss"] != 0):
            raise ValidationError(_path_msg(path, where, "sin mode with k = 0"))
        jmax, kmax = max(jmax, j), max(kmax, k)
        parsed.append((j, k, vals))
    cc = np.zeros((jmax + 1, kmax + 1))
    cs = np.zeros_like(cc)
    sc = np.zeros_like(cc)
    ss = np.zeros_like(cc)
    for j, k, vals in parsed:
        cc[j, k] += vals["cc"]
        cs[j, k] += vals["cs"]
        sc[j, k] += vals["sc"]
        ss[j, k] += vals["ss"]
    return BivariateFunction(cc, cs, sc, ss)


def load_metric(path):
    """Read a metric description from a JSON file.

    Returns a ``LiouvilleMetric`` when no perturbation is present, otherwise
    a ``ConformalMetric``.  Malformed files raise ``ValidationError`` with
    the JSON path (and line number for syntax errors) of the offending entry.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ValidationError(f"{path}: cannot read metric file: {e}") from e
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(
            f"{path}: line {e.lineno}, column {e.colno}: invalid JSON ({e.msg})"
        ) from e
    if not isinstance(obj, dict):
        raise ValidationError(_path_msg(path, "$", "top level must be an object"))
    for key in obj:
        if key not in ("f1", "f2", "U", "epsilon"):
            raise ValidationError(_path_msg(path, "$", f"unexpected key '{key}'"))
    f1 = _read_profile(path, "f1", obj)
    f2 = _read_profile(path, "f2", obj)
    base = LiouvilleMetric(f1, f2)
    if "U" not in obj and "epsilon" not in obj:
        return base
    if "U" not in obj:
        raise ValidationError(_path_msg(path, "$", "'epsilon' given without 'U'"))
    U = _read_bivariate(path, obj)
    eps = obj.get("epsilon", 0.0)
    if not isinstance(eps, (int, float)) or isinstance(eps, bool):
        raise ValidationError(_path_msg(path, "$.epsilon", "expected a number"))
    return ConformalMetric(base, U, float(eps))


def save_metric(metric, path):
    """Write a metric to JSON with 17-significant-digit coefficients."""

    def prof(f):
        return {
            "cos": [float(_fmt(v)) for v in f.a],
            "sin": [float(_fmt(v)) for v in f.b],
        }

    obj = {"f1": prof(metric.f1), "f2": prof(metric.f2)}
    if isinstance(metric, ConformalMetric):
        modes = []
        J, K = metric.U.cc.shape
        for j in range(J):
            for k in range(K):
                entry = {"j": j, "k": k}
                any_nz = False
                for c, m in zip(
                    ("cc", "cs", "sc", "ss"),
                    (metric.U.cc, metric.U.cs, metric.U.sc, metric.U.ss),
                ):
                    if m[j, k] != 0.0:
                        entry[c] = float(_fmt(m[j, k]))
                        any_nz = True
                if any_nz:
                    modes.append(entry)
        obj["U"] = {"modes": modes}
        obj["epsilon"] = float(_fmt(metric.epsilon))
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, path)
    return path
