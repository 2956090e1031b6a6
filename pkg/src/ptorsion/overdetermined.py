"""Rigidity classification for ``Delta_p u = -1`` with ``u = 0`` and ``du/dnu = f(d)`` on the boundary.

Everything is phrased through ``ratio(t) = f(t) / phi(t)``. At the tangency
radii ``r0 <= r1`` comparison with ball solutions forces
``ratio(r0) >= 1 >= ratio(r1)``. A nondecreasing ratio (case i) or a single
upward crossing of 1 at ``R`` (case ii) then forces a ball about the pole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from .fem import BoundarySamples, StarDomain
from .geometry import PHI_LIMIT_RADIUS, BallQuantities

#: Ties in the tangency bounds within this tolerance count as equalities.
TIE_TOL = 1e-9
#: Spherical domains must stay inside this radius (a hemisphere).
SPHERICAL_LIMIT = math.pi / 2
SPHERICAL_MARGIN = 0.0

F_FORMS = ("const", "linear", "exp", "power")

_GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class OverdeterminedData:
    """Boundary data ``f`` and the ball quantities it is compared against.

    ``interval`` is the evaluation window ``(t_min, t_max)``; ``None`` lets
    :func:`classify` derive it from the domain's tangency radii.
    """

    f: Callable = field(repr=False)
    quantities: BallQuantities = field(repr=False)
    interval: tuple | None = None
    label: str = ""

    @property
    def p(self):
        return self.quantities.p

    @property
    def profile(self):
        return self.quantities.profile


@dataclass(frozen=True)
class TangencyRadii:
    r0: float
    r1: float

    def __post_init__(self):
        if not 0 < self.r0 <= self.r1:
            raise ValueError(f"need 0 < r0 <= r1, got ({self.r0}, {self.r1})")


@dataclass(frozen=True)
class CaseIIResult:
    R: float | None
    crossings: int
    reason: str = ""


@dataclass(frozen=True)
class Verdict:
    """Classification outcome.

    ``kind`` is one of ``BallForcedCaseI``, ``BallOfRadius``, ``NotApplicable``
    or ``Inconsistent``; ``reason`` explains the latter two.
    """

    kind: str
    R: float | None = None
    reason: str = ""
    r0: float = math.nan
    r1: float = math.nan
    ratio_at_r0: float = math.nan
    ratio_at_r1: float = math.nan
    case_i_margin: float = math.nan
    crossings: int = 0
    ratio_samples: tuple = field(default=(), repr=False)

    def report(self) -> str:
        """Flat ``key = value`` report."""
        lines = [
            "# case (ii) uses ratio = f/phi on both sides of R",
            f"verdict = {self.kind}",
        ]
        if self.R is not None:
            lines.append(f"R = {self.R!r}")
        if self.reason:
            lines.append(f"reason = {self.reason}")
        lines += [
            f"r0 = {self.r0!r}",
            f"r1 = {self.r1!r}",
            f"ratio_at_r0 = {self.ratio_at_r0!r}",
            f"ratio_at_r1 = {self.ratio_at_r1!r}",
            f"case_i_margin = {self.case_i_margin!r}",
            f"crossings = {self.crossings}",
        ]
        return "\n".join(lines) + "\n"


def phi_multiple(quantities: BallQuantities, form: str, **params) -> Callable:
    """``f = phi * g`` with ``g`` from a fixed whitelist.

    ``const``: ``c``; ``linear``: ``a + b t``; ``exp``: ``c exp(k t)``;
    ``power``: ``c t^k``.
    """
    defaults = {"const": {"c": 1.0}, "linear": {"a": 0.0, "b": 1.0},
                "exp": {"c": 1.0, "k": -1.0}, "power": {"c": 1.0, "k": 1.0}}
    if form not in defaults:
        raise ValueError(f"unknown f form {form!r}; allowed forms are {F_FORMS}")
    unknown = set(params) - set(defaults[form])
    if unknown:
        raise ValueError(f"{form} does not take {sorted(unknown)}")
    q = {**defaults[form], **{k: float(v) for k, v in params.items()}}
    if form == "const":
        g = lambda t: q["c"] * np.ones_like(t)  # noqa: E731
    elif form == "linear":
        g = lambda t: q["a"] + q["b"] * t  # noqa: E731
    elif form == "exp":
        g = lambda t: q["c"] * np.exp(q["k"] * t)  # noqa: E731
    else:
        g = lambda t: q["c"] * t ** q["k"]  # noqa: E731

    def f(t):
        t = np.asarray(t, dtype=float)
        return np.asarray(quantities.phi(t)) * g(t)

    return f


def sampled_f(d, values) -> Callable:
    """Monotone-cubic interpolant of a sampled ``(d, f)`` table."""
    d = np.asarray(d, dtype=float)
    values = np.asarray(values, dtype=float)
    order = np.argsort(d)
    d, values = d[order], values[order]
    if len(d) == 1:
        return lambda t: np.full_like(np.asarray(t, dtype=float), values[0])
    interp = PchipInterpolator(d, values, extrapolate=True)
    return lambda t: interp(np.asarray(t, dtype=float))


def _golden_min(f, a, b, tol=1e-13):
    c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def tangency_radii(domain: StarDomain, samples: int = 4096) -> TangencyRadii:
    """Inscribed and circumscribed geodesic-ball radii of a star domain about the pole."""
    theta = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)
    b = domain.radius(theta)
    h = 2 * math.pi / samples
    results = []
    for sign, i in ((1.0, int(np.argmin(b))), (-1.0, int(np.argmax(b)))):
        best = sign * b[i]
        for j in np.argsort(sign * b)[:4]:
            _, val = _golden_min(lambda x: sign * float(domain.radius(x)),
                                 theta[j] - h, theta[j] + h)
            best = min(best, val)
        results.append(sign * best)
    r0, r1 = results
    return TangencyRadii(float(min(r0, r1)), float(max(r0, r1)))


def ratio(data: OverdeterminedData, t):
    """``f(t) / phi(t)``; ``phi`` takes its small-ball limit form below ``1e-8``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("ratio needs t > 0")
    out = np.asarray(data.f(t), dtype=float) / np.asarray(data.quantities.phi(t))
    return float(out) if out.ndim == 0 else out


def euclidean_F(f: Callable, n: int, t):
    """``n f(t) / t``, the Euclidean p = 2 form of the ratio."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("euclidean_F needs t > 0")
    out = n * np.asarray(f(t), dtype=float) / t
    return float(out) if out.ndim == 0 else out


def check_case_i(data: OverdeterminedData, interval, tol: float = 1e-9, points: int = 1024):
    """Is the ratio nondecreasing on ``interval``? Returns ``(ok, margin)``.

    ``margin`` is the most negative consecutive difference normalized by the
    ratio's range.
    """
    grid = np.linspace(interval[0], interval[1], points)
    q = ratio(data, grid)
    diffs = np.diff(q) / (np.ptp(q) + 1e-12 * np.max(np.abs(q)) + 1e-30)
    margin = float(np.min(diffs))
    return bool(margin >= -tol), margin


def check_case_ii(data: OverdeterminedData, interval, tol: float = TIE_TOL,
                  points: int = 1024) -> CaseIIResult:
    """Single upward crossing of 1 by the ratio, located to ``1e-10`` by bisection."""
    grid = np.linspace(interval[0], interval[1], points)
    g = ratio(data, grid) - 1.0
    sign = np.where(g > tol, 1, np.where(g < -tol, -1, 0))
    nz = sign[sign != 0]
    crossings = int(np.count_nonzero(np.diff(nz)))
    if crossings == 0:
        return CaseIIResult(None, 0, "no sign change")
    if crossings > 1:
        return CaseIIResult(None, crossings, "multiple crossings")
    if nz[0] > 0:
        return CaseIIResult(None, 1, "crossing oriented downward")
    lo = grid[np.nonzero(sign < 0)[0][-1]]
    hi = grid[np.nonzero(sign > 0)[0][0]]
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if ratio(data, mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return CaseIIResult(0.5 * (lo + hi), 1)


def comparison_bounds(data: OverdeterminedData, radii: TangencyRadii,
                      tie_tol: float = TIE_TOL) -> tuple[bool, bool]:
    """Necessary conditions ``ratio(r0) >= 1`` and ``ratio(r1) <= 1`` (up to ``tie_tol``)."""
    return (bool(ratio(data, radii.r0) >= 1 - tie_tol),
            bool(ratio(data, radii.r1) <= 1 + tie_tol))


def default_interval(data: OverdeterminedData, radii: TangencyRadii):
    if data.interval is not None:
        return tuple(data.interval)
    upper = min(2 * radii.r1, data.profile.usable_radius)
    return (1e-4 * radii.r1, upper)


def classify(data: OverdeterminedData, domain: StarDomain, points: int = 1024) -> Verdict:
    radii = tangency_radii(domain)
    base = dict(r0=radii.r0, r1=radii.r1)
    profile = data.profile
    if profile.kind == "spherical" and radii.r1 > SPHERICAL_LIMIT + SPHERICAL_MARGIN:
        return Verdict("NotApplicable", reason="spherical domain beyond the hemisphere", **base)
    if radii.r1 >= profile.usable_radius:
        return Verdict("NotApplicable", reason="domain reaches the validity radius", **base)

    window = default_interval(data, radii)
    case_i_window = (max(1e-4 * radii.r1, PHI_LIMIT_RADIUS), radii.r1)
    grid = np.linspace(window[0], window[1], points)
    diag = dict(
        ratio_at_r0=ratio(data, radii.r0),
        ratio_at_r1=ratio(data, radii.r1),
        ratio_samples=tuple(zip(grid.tolist(), np.asarray(ratio(data, grid)).tolist())),
        **base,
    )
    low_ok, high_ok = comparison_bounds(data, radii)
    case_ok, margin = check_case_i(data, case_i_window, points=points)
    diag["case_i_margin"] = margin

    two = check_case_ii(data, window, points=points)
    diag["crossings"] = two.crossings
    if two.R is not None:
        if low_ok and high_ok:
            return Verdict("BallOfRadius", R=two.R, **diag)
        return Verdict("Inconsistent", R=two.R, reason=_violated(low_ok, high_ok, radii), **diag)
    if case_ok:
        if low_ok and high_ok:
            return Verdict("BallForcedCaseI", **diag)
        return Verdict("Inconsistent", reason=_violated(low_ok, high_ok, radii), **diag)
    return Verdict("NotApplicable",
                   reason=f"ratio is neither nondecreasing nor a single upward crossing ({two.reason})",
                   **diag)


def _violated(low_ok, high_ok, radii):
    parts = []
    if not low_ok:
        parts.append(f"ratio(r0={radii.r0:.6g}) < 1")
    if not high_ok:
        parts.append(f"ratio(r1={radii.r1:.6g}) > 1")
    return "; ".join(parts)


@dataclass(frozen=True)
class BinnedF:
    d: np.ndarray
    f: np.ndarray
    spread: np.ndarray
    abs_spread: np.ndarray
    max_spread: float


def bin_boundary_samples(samples, n_bins: int) -> BinnedF:
    """Bin samples into ``n_bins`` equal-width ``d`` bins.

    Each nonempty bin reports its mean ``d``, mean ``du/dnu``, the spread
    ``max - min`` and that spread normalized by ``|mean|``. When all ``d``
    coincide there is a single bin.
    """
    if isinstance(samples, BoundarySamples):
        d, g = samples.d, samples.dnu
    else:
        arr = np.asarray(samples, dtype=float)
        d, g = arr[:, 0], arr[:, 1]
    lo, hi = float(d.min()), float(d.max())
    if hi - lo <= 1e-12 * max(abs(hi), 1.0):
        which = np.zeros(len(d), dtype=int)
    else:
        which = np.minimum(((d - lo) / (hi - lo) * n_bins).astype(int), n_bins - 1)
    ds, fs, ranges = [], [], []
    for k in np.unique(which):
        sel = which == k
        ds.append(d[sel].mean())
        fs.append(g[sel].mean())
        ranges.append(np.ptp(g[sel]))
    fs, ranges = np.array(fs), np.array(ranges)
    spreads = ranges / np.abs(fs)
    return BinnedF(np.array(ds), fs, spreads, ranges, float(spreads.max()))


def extract_f_of_d(samples, n_bins: int = 16, spread_tol: float = 0.01):
    """Test whether boundary samples are a function of ``d``.

    Returns ``(table, max_spread)`` where ``table`` is a :class:`BinnedF`
    when every bin's normalized spread is below ``spread_tol``, else ``None``.
    """
    if len(samples) < 16:
        raise ValueError("need at least 16 boundary samples")
    binned = bin_boundary_samples(samples, n_bins)
    if binned.max_spread < spread_tol:
        return binned, binned.max_spread
    return None, binned.max_spread
