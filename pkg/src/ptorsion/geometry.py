"""Rotationally symmetric metrics ``g = dt^2 + rho(t)^2 g_S`` and geodesic-ball scalars."""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .quadrature import DEFAULT_QUAD, QuadratureSpec, gauss_legendre, integrate_panels

#: Distance kept from a finite validity radius when choosing usable radii.
RADIUS_MARGIN = 1e-6
#: Below this radius ``phi`` switches to its small-ball limit ``(t/n)^(1/(p-1))``.
PHI_LIMIT_RADIUS = 1e-8

PRESETS = ("euclidean", "hyperbolic", "spherical")
#: Parametrized analytic forms accepted for custom profiles (parameter ``a > 0``).
NAMED_FORMS = ("sinh-scaled", "sin-scaled", "cone")


@dataclass(frozen=True)
class WarpProfile:
    n: int
    kind: str
    rho: Callable = field(repr=False)
    rho_prime: Callable = field(repr=False)
    max_radius: float = math.inf
    label: str = ""

    @property
    def usable_radius(self) -> float:
        if math.isinf(self.max_radius):
            return math.inf
        return self.max_radius - RADIUS_MARGIN

    def check_radius(self, t, what="radius"):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0) or np.any(t >= self.max_radius):
            raise ValueError(f"{what} must lie in (0, {self.max_radius}), got {t}")


def _preset(kind):
    if kind == "euclidean":
        return (lambda t: np.asarray(t, dtype=float) * 1.0,
                lambda t: np.ones_like(np.asarray(t, dtype=float)), math.inf)
    if kind == "hyperbolic":
        return np.sinh, np.cosh, math.inf
    if kind == "spherical":
        return np.sin, np.cos, math.pi
    raise ValueError(f"unknown profile kind {kind!r}; presets are {PRESETS}")


def _named_form(form, a):
    if a <= 0:
        raise ValueError(f"{form} needs a positive parameter a, got {a}")
    if form == "sinh-scaled":
        return (lambda t: np.sinh(a * np.asarray(t)) / a,
                lambda t: np.cosh(a * np.asarray(t)), math.inf)
    if form == "sin-scaled":
        return (lambda t: np.sin(a * np.asarray(t)) / a,
                lambda t: np.cos(a * np.asarray(t)), math.pi / a)
    if form == "cone":
        return (lambda t: a * np.asarray(t, dtype=float),
                lambda t: np.full_like(np.asarray(t, dtype=float), a), math.inf)
    raise ValueError(f"unknown profile form {form!r}; allowed forms are {NAMED_FORMS}")


def _validate(profile: WarpProfile):
    rho, drho, rbar = profile.rho, profile.rho_prime, profile.max_radius
    if abs(float(rho(0.0))) > 1e-14:
        raise ValueError(f"rho(0) must vanish, got {float(rho(0.0))}")
    upper = 10.0 if math.isinf(rbar) else rbar
    near = np.logspace(-8, 0, 33) * min(1.0, 0.5 * upper)
    inner = np.linspace(0.0, upper, 258)[1:-1]
    ts = np.concatenate([near, inner])
    vals = np.asarray(rho(ts), dtype=float)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        bad = ts[~(vals > 0)][0]
        raise ValueError(f"rho must be positive on (0, {rbar}); fails at t={bad:.6g}")
    h = 1e-5 * np.maximum(ts, 1e-3)
    h = np.minimum(h, 0.5 * np.minimum(ts, upper - ts))
    fd = (np.asarray(rho(ts + h)) - np.asarray(rho(ts - h))) / (2 * h)
    d = np.asarray(drho(ts), dtype=float)
    err = np.abs(fd - d) / np.maximum(np.abs(d), 1.0)
    if np.max(err) > 1e-6:
        i = int(np.argmax(err))
        raise ValueError(f"rho_prime disagrees with finite differences of rho at t={ts[i]:.6g}")
    if abs(float(drho(0.0)) - 1.0) > 1e-8:
        warnings.warn(f"rho'(0) = {float(drho(0.0))} != 1; metric is singular at the pole",
                      stacklevel=3)


def make_profile(kind: str, n: int, custom_rho=None, custom_rho_prime=None,
                 max_radius=None, a: float | None = None) -> WarpProfile:
    """Build and validate a warping profile.

    ``kind`` is a preset name, one of the named forms (which take the
    parameter ``a``), or ``"custom"`` with explicit callables.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"dimension n must be an integer >= 2, got {n}")
    n = int(n)
    if kind == "custom":
        if custom_rho is None or custom_rho_prime is None or max_radius is None:
            raise ValueError("custom profiles need rho, rho_prime and max_radius")
        rho, drho, rbar = custom_rho, custom_rho_prime, float(max_radius)
        label = "custom"
    elif kind in NAMED_FORMS:
        rho, drho, rbar = _named_form(kind, 1.0 if a is None else float(a))
        label = f"{kind}: a={1.0 if a is None else float(a)!r}"
    else:
        rho, drho, rbar = _preset(kind)
        label = kind
    if not rbar > 0:
        raise ValueError("max_radius must be positive")
    profile = WarpProfile(n=n, kind=kind if kind in PRESETS else "custom",
                          rho=rho, rho_prime=drho, max_radius=rbar, label=label)
    _validate(profile)
    return profile


def parse_profile(text: str, n: int) -> WarpProfile:
    """Profile from its textual form: ``"hyperbolic"`` or ``"sinh-scaled: a=2"``."""
    name, _, rest = text.partition(":")
    name = name.strip()
    params = {}
    for item in rest.replace(",", " ").split():
        key, eq, value = item.partition("=")
        if not eq:
            raise ValueError(f"bad profile parameter {item!r}")
        params[key.strip()] = float(value)
    if name in PRESETS:
        if params:
            raise ValueError(f"preset {name!r} takes no parameters")
        return make_profile(name, n)
    if name in NAMED_FORMS:
        if set(params) - {"a"}:
            raise ValueError(f"{name} accepts only the parameter a")
        return make_profile(name, n, a=params.get("a", 1.0))
    raise ValueError(f"unknown profile {name!r}; choose from {PRESETS + NAMED_FORMS}")


def eta(profile: WarpProfile, t):
    """Laplacian of the distance function, ``(n-1) rho'(t) / rho(t)``."""
    profile.check_radius(t, "t")
    t = np.asarray(t, dtype=float)
    out = (profile.n - 1) * np.asarray(profile.rho_prime(t)) / np.asarray(profile.rho(t))
    return float(out) if out.ndim == 0 else out


def half_gamma(k: int) -> float:
    """Gamma(k/2) for a positive integer ``k``."""
    value = 1.0 if k % 2 == 0 else math.sqrt(math.pi)
    x = 1.0 if k % 2 == 0 else 0.5
    while x < k / 2:
        value *= x
        x += 1.0
    return value


def sphere_constant(n: int) -> float:
    """Area of the unit sphere S^{n-1}."""
    return 2 * math.pi ** (n / 2) / half_gamma(n)


class _RunningIntegral:
    """``t -> int_0^t f`` memoized on equally spaced anchors.

    Anchor panels are integrated adaptively and accumulated; the partial
    panel up to ``t`` uses a 16-point Gauss-Legendre rule, which is exact to
    rounding for the smooth integrands used here. The anchor cache only
    grows and is guarded by a lock.
    """

    def __init__(self, f, width, limit, quad):
        self._f = f
        self._h = width
        self._max_panels = math.inf if math.isinf(limit) else round(limit / width)
        self._quad = quad
        self._cum = np.zeros(1)
        self._lock = threading.Lock()

    def _grow(self, k):
        with self._lock:
            have = len(self._cum) - 1
            if k <= have:
                return
            target = min(max(k, 2 * have, 32), self._max_panels)
            edges = self._h * np.arange(have, target + 1)
            pieces = integrate_panels(self._f, edges, self._quad)
            self._cum = np.concatenate([self._cum, self._cum[-1] + np.cumsum(pieces)])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.floor(t / self._h).astype(int)
        if k.size:
            k = np.minimum(k, self._max_panels - 1) if self._max_panels < math.inf else k
            self._grow(int(k.max()) + 1)
        cum = self._cum
        return cum[k] + gauss_legendre(self._f, k * self._h, t)


class BallQuantities:
    """Geodesic-ball scalars for a profile and exponent ``p``.

    ``sphere_area`` is the perimeter ``|dB_t|``, ``ball_volume`` the volume
    ``|B_t|``, ``phi`` the boundary normal derivative ``(|B_t|/|dB_t|)^(1/(p-1))``
    of the ball's torsion function and ``eta`` the Laplacian of the distance.
    All methods accept scalars or arrays.
    """

    def __init__(self, profile: WarpProfile, p: float, quad: QuadratureSpec = DEFAULT_QUAD):
        if not p > 1:
            raise ValueError(f"exponent p must exceed 1, got {p}")
        self.profile = profile
        self.p = float(p)
        self.quad = quad
        self.omega = sphere_constant(profile.n)
        rbar = profile.max_radius
        width = 1 / 32 if math.isinf(rbar) else rbar / math.ceil(32 * rbar)
        self._volume = _RunningIntegral(self._area, width, rbar, quad)

    def _area(self, t):
        return self.omega * np.asarray(self.profile.rho(t), dtype=float) ** (self.profile.n - 1)

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t >= self.profile.max_radius):
            raise ValueError(f"radius outside [0, {self.profile.max_radius})")
        return t

    @staticmethod
    def _out(x):
        return float(x) if np.ndim(x) == 0 else x

    def sphere_area(self, t):
        return self._out(self._area(self._check(t)))

    def ball_volume(self, t):
        return self._out(self._volume(self._check(t)))

    def volume_ratio(self, t):
        """``|B_t| / |dB_t|``, with the small-ball limit ``t/n`` near the pole."""
        t = self._check(t)
        small = t < PHI_LIMIT_RADIUS
        safe = np.where(small, 1.0, t)
        ratio = np.where(small, t / self.profile.n, self._volume(safe) / self._area(safe))
        return self._out(ratio)

    def phi(self, t):
        return self._out(np.asarray(self.volume_ratio(t)) ** (1.0 / (self.p - 1.0)))

    def eta(self, t):
        return eta(self.profile, t)


def ball_quantities(profile: WarpProfile, p: float,
                    quad: QuadratureSpec = DEFAULT_QUAD) -> BallQuantities:
    return BallQuantities(profile, p, quad)
