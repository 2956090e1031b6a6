"""Radial p-torsion functions on geodesic balls.

On a ball ``B_r`` the torsion function is ``V(d)`` with ``|V'|^(p-1)``
equal to ``|B_t| / |dB_t|``, so ``V(t) = int_t^r phi``. The nested
exponential form of the same solution is kept as an independent oracle, and
a third route integrates the ODE for an arbitrary distance Laplacian ``eta``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import BallQuantities, WarpProfile, ball_quantities
from .quadrature import (
    DEFAULT_QUAD,
    QuadratureSpec,
    gauss_legendre,
    integrate,
    integrate_panels,
    log_gauss_legendre,
)

#: Exponents closer to 1 amplify quadrature noise through ``1/(p-1)``.
MIN_EXPONENT = 1.001


class RadialSolveError(RuntimeError):
    pass


def _check_exponent(p):
    if not p >= MIN_EXPONENT:
        raise ValueError(f"exponent p must be at least {MIN_EXPONENT}, got {p}")


@dataclass(frozen=True)
class RadialSolution:
    """Torsion function of ``B_r`` sampled on a uniform grid ``t`` of ``[0, r]``.

    ``speed`` maps a radius to ``|V'|`` and is used for exact off-grid
    evaluation; ``eta`` is the distance Laplacian the solution was built for.
    """

    p: float
    r: float
    t: np.ndarray
    V: np.ndarray
    Vp: np.ndarray
    speed: Callable = field(repr=False)
    eta: Callable = field(repr=False)
    profile: WarpProfile | None = None
    quad: QuadratureSpec = DEFAULT_QUAD

    def value_at(self, x):
        """``V`` at arbitrary radii in ``[0, r]``: nearest grid value above plus a panel integral."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > self.r * (1 + 1e-14)):
            raise ValueError(f"radius outside [0, {self.r}]")
        flat = np.minimum(x.ravel(), self.r)
        j = np.searchsorted(self.t, flat, side="left")
        out = self.V[j].copy()
        for i in np.nonzero(self.t[j] > flat)[0]:
            out[i] += integrate(self.speed, flat[i], self.t[j[i]], self.quad)
        return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)

    def derivative_at(self, x):
        x = np.asarray(x, dtype=float)
        out = -np.asarray(self.speed(np.clip(x, 0.0, self.r)))
        return float(out) if x.ndim == 0 else out


def _uniform_grid(r, grid_size):
    if int(grid_size) != grid_size or grid_size < 17:
        raise ValueError(f"grid_size must be an integer >= 17, got {grid_size}")
    t = np.linspace(0.0, r, int(grid_size))
    t[-1] = r
    return t


def _values_from_speed(speed, t, quad):
    pieces = integrate_panels(speed, t, quad)
    V = np.zeros_like(t)
    V[:-1] = np.cumsum(pieces[::-1])[::-1]
    return V


def solve_radial(profile: WarpProfile, p: float, r: float, grid_size: int = 1025,
                 quad: QuadratureSpec = DEFAULT_QUAD,
                 quantities: BallQuantities | None = None) -> RadialSolution:
    """Torsion function of the geodesic ball ``B_r``: ``V' = -phi`` and ``V(r) = 0``."""
    _check_exponent(p)
    if not 0 < r < profile.max_radius:
        raise ValueError(f"radius must lie in (0, {profile.max_radius}), got {r}")
    bq = quantities if quantities is not None else ball_quantities(profile, p, quad)
    t = _uniform_grid(r, grid_size)
    V = _values_from_speed(bq.phi, t, quad)
    return RadialSolution(p=float(p), r=float(r), t=t, V=V, Vp=-np.asarray(bq.phi(t)),
                          speed=bq.phi, eta=bq.eta, profile=profile, quad=quad)


def boundary_normal_derivative(sol: RadialSolution) -> float:
    """Inward normal derivative on ``dB_r``, ``-V'(r)``."""
    return float(-sol.Vp[-1])


def ode_residual(sol: RadialSolution) -> float:
    """Max of ``|d/dt |V'|^(p-1) + eta |V'|^(p-1) - 1|`` by centered differences.

    The two nodes nearest the pole are skipped: ``eta`` diverges there.
    """
    y = np.abs(sol.Vp) ** (sol.p - 1)
    h = np.diff(sol.t)
    inner = slice(2, len(sol.t) - 1)
    dy = (y[3:] - y[1:-2]) / (h[2:] + h[1:-1])
    res = dy + np.asarray(sol.eta(sol.t[inner])) * y[inner] - 1.0
    return float(np.max(np.abs(res)))


def _inner_eta_integral(profile, s, r):
    """``int_s^r eta`` for each entry of ``s``, via the substitution ``u = ln s``."""
    n = profile.n

    def integrand(x):
        return (n - 1) * profile.rho_prime(x) / profile.rho(x)

    s = np.asarray(s, dtype=float)
    return log_gauss_legendre(integrand, s.ravel(), np.full(s.size, r)).reshape(s.shape)


def v_nested_form(profile: WarpProfile, p: float, r: float, t: float,
                  quad: QuadratureSpec = DEFAULT_QUAD,
                  quantities: BallQuantities | None = None) -> float:
    """``V(t)`` from the triple-integral representation.

    ``V(t) = int_t^r exp(H(s)/(p-1)) [|B_r|/|dB_r| - int_s^r exp(-H(tau)) dtau]^(1/(p-1)) ds``
    with ``H(s) = int_s^r eta``. Each level is a separate quadrature; nothing
    here uses the identity ``V' = -phi``.
    """
    _check_exponent(p)
    if not 0 < r < profile.max_radius:
        raise ValueError(f"radius must lie in (0, {profile.max_radius}), got {r}")
    if not 0 < t <= r:
        raise ValueError(f"t must lie in (0, r], got {t}")
    if t == r:
        return 0.0
    bq = quantities if quantities is not None else ball_quantities(profile, p, quad)
    ratio_r = bq.ball_volume(r) / bq.sphere_area(r)

    def middle(s):
        # int_s^r exp(-H(tau)) dtau, on 8 panels per interval
        def weight(tau):
            return np.exp(-_inner_eta_integral(profile, tau, r))
        s = np.asarray(s, dtype=float)
        frac = np.linspace(0.0, 1.0, 9)
        cuts = s[..., None] + (r - s)[..., None] * frac
        return gauss_legendre(weight, cuts[..., :-1], cuts[..., 1:]).sum(axis=-1)

    worst = [0.0]

    def outer(s):
        bracket = ratio_r - middle(s)
        worst[0] = min(worst[0], float(np.min(bracket)))
        bracket = np.maximum(bracket, 0.0)
        H = _inner_eta_integral(profile, s, r)
        return np.exp(H / (p - 1)) * bracket ** (1.0 / (p - 1))

    value = integrate(outer, t, r, quad)
    if worst[0] < -1e-10:
        raise RadialSolveError(f"nested bracket went negative ({worst[0]:.3e})")
    return value


class _CustomEtaRadial:
    """Running integrals for a user-supplied distance Laplacian ``eta``.

    ``H(tau) = int_tau^r eta`` is integrated on regular panels above
    ``split`` and in ``ln tau`` below it, where ``eta ~ c/tau``.
    ``C(t) = int_0^t exp(-H)`` is memoized on the solution grid.
    """

    def __init__(self, eta_fn, r, t, quad):
        self.eta_fn = eta_fn
        self.r = r
        self.t = t
        self.quad = quad
        self.split = min(1e-4, 1e-2 * r)
        m = max(64, len(t) // 4)
        self.edges = np.linspace(self.split, r, m + 1)
        pieces = integrate_panels(self._eta, self.edges, quad)
        self.H_edges = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
        self.C_grid = np.concatenate(
            [[0.0], np.cumsum(integrate_panels(self.weight, t, quad))])

    def _eta(self, s):
        out = np.asarray(self.eta_fn(s), dtype=float)
        return np.broadcast_to(out, np.shape(s)) if out.ndim == 0 else out

    def H(self, tau):
        tau = np.asarray(tau, dtype=float)
        flat = tau.ravel()
        out = np.empty_like(flat)
        low = flat < self.split
        if np.any(~low):
            x = flat[~low]
            k = np.minimum(np.searchsorted(self.edges, x, side="right"), len(self.edges) - 1)
            out[~low] = self.H_edges[k] + gauss_legendre(self._eta, x, self.edges[k])
        if np.any(low):
            x = np.maximum(flat[low], 1e-300)
            out[low] = self.H_edges[0] + log_gauss_legendre(self._eta, x, np.full(x.size, self.split))
        return out.reshape(tau.shape)

    def weight(self, tau):
        return np.exp(-self.H(tau))

    def C(self, x):
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(self.t, x, side="right") - 1, 0, len(self.t) - 2)
        left = self.t[k]
        # first panel: tau = x v^2 smooths integrands like tau^c at the pole
        first = k == 0
        partial = np.where(
            first,
            gauss_legendre(lambda v: 2 * x[..., None] * v * self.weight(x[..., None] * v * v),
                           np.zeros_like(x), np.ones_like(x)),
            gauss_legendre(self.weight, left, x))
        return self.C_grid[k] + partial

    def bracket_power(self, x):
        """``|V'(x)|^(p-1) = exp(H(x)) [K - int_x^r exp(-H)]``.

        ``K - int_x^r exp(-H)`` equals ``int_0^x exp(-H)`` because
        ``K = int_0^r exp(-H)``; the latter form avoids cancellation.
        """
        x = np.asarray(x, dtype=float)
        safe = np.where(x > 0, x, self.t[1])
        c = self.C(safe)
        y = np.exp(self.H(safe) + np.log(np.maximum(c, 1e-300))) * (c > 0)
        return np.where(x > 0, y, 0.0)


def solve_radial_custom_eta(eta_fn: Callable, p: float, r: float, grid_size: int = 1025,
                            quad: QuadratureSpec = DEFAULT_QUAD) -> RadialSolution:
    """Radial torsion function for a distance with ``Delta d = eta_fn(d)``.

    ``|V'(r)|^(p-1)`` is fixed by ``V'(0) = 0``, i.e. ``int_0^r exp(-int_tau^r eta)``.
    """
    _check_exponent(p)
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r}")
    t = _uniform_grid(r, grid_size)
    run = _CustomEtaRadial(eta_fn, r, t, quad)
    y = run.bracket_power(t)
    if not np.all(np.isfinite(y)) or np.min(y) < -1e-12:
        raise RadialSolveError(f"|V'|^(p-1) invalid (min {np.min(y):.3e})")

    def speed(x):
        return np.maximum(run.bracket_power(x), 0.0) ** (1.0 / (p - 1))

    V = _values_from_speed(speed, t, quad)

    def eta_vec(x):
        return run._eta(np.asarray(x, dtype=float))

    return RadialSolution(p=float(p), r=float(r), t=t, V=V, Vp=-speed(t),
                          speed=speed, eta=eta_vec, quad=quad)


def residual_profile(sol: RadialSolution) -> np.ndarray:
    """Pointwise ODE residual on the grid (NaN where it is not defined)."""
    y = np.abs(sol.Vp) ** (sol.p - 1)
    out = np.full(len(sol.t), math.nan)
    h = np.diff(sol.t)
    dy = (y[3:] - y[1:-2]) / (h[2:] + h[1:-1])
    out[2:-1] = dy + np.asarray(sol.eta(sol.t[2:-1])) * y[2:-1] - 1.0
    return out


def write_radial_csv(sol: RadialSolution, path) -> None:
    """Columns ``t,V,Vprime,Phi,residual``; empty residual where undefined."""
    res = residual_profile(sol)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "V", "Vprime", "Phi", "residual"])
        for ti, vi, dvi, ri in zip(sol.t, sol.V, sol.Vp, res):
            w.writerow([repr(float(ti)), repr(float(vi)), repr(float(dvi)),
                        repr(float(-dvi)), "" if math.isnan(ri) else repr(float(ri))])
