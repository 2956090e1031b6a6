"""P1 finite elements for ``Delta_p u = -1``, ``u = 0`` on star-shaped domains of a 2-D warped metric.

Elements live in the normal-coordinate chart ``x = t (cos theta, sin theta)``
where the metric reads ``g = rr^T + (rho(t)/t)^2 (I - rr^T)``; it is smooth at
the pole, so the pole fan needs no special treatment. On every triangle the
metric is frozen at the centroid. The discrete energy

    J(u) = sum_T |T|_g [ (eps^2 + |grad u|_g^2)^(p/2) / p ] - int u

is minimized by Kacanov iteration (frozen weights, damped on energy increase).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .geometry import WarpProfile

#: Boundary radii must stay this far below the profile's validity radius.
DOMAIN_MARGIN = 1e-6


class FEMError(RuntimeError):
    pass


@dataclass(frozen=True)
class StarDomain:
    """Domain ``{(t, theta): t < b(theta)}`` with ``b`` a truncated Fourier series.

    ``b(theta) = a0 + sum_k cos_k cos(k theta) + sin_k sin(k theta)``, ``k >= 1``.
    """

    a0: float
    cos: tuple = ()
    sin: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "cos", tuple(float(c) for c in self.cos))
        object.__setattr__(self, "sin", tuple(float(c) for c in self.sin))
        theta = np.linspace(0.0, 2 * math.pi, 4096, endpoint=False)
        if not np.all(self.radius(theta) > 0):
            raise ValueError("star domain needs b(theta) > 0 for every direction")

    @classmethod
    def disk(cls, r: float) -> "StarDomain":
        return cls(float(r))

    @classmethod
    def from_samples(cls, values) -> "StarDomain":
        """Trigonometric interpolant of ``b`` sampled at ``theta_j = 2 pi j / N``."""
        values = np.asarray(values, dtype=float)
        N = len(values)
        c = np.fft.rfft(values) / N
        cos = 2 * c.real[1:]
        sin = -2 * c.imag[1:]
        if N % 2 == 0:
            cos[-1] /= 2
            sin[-1] = 0.0
        return cls(float(c.real[0]), tuple(cos), tuple(sin))

    def _k(self):
        K = max(len(self.cos), len(self.sin))
        a = np.zeros(K)
        b = np.zeros(K)
        a[:len(self.cos)] = self.cos
        b[:len(self.sin)] = self.sin
        return np.arange(1, K + 1), a, b

    def radius(self, theta):
        theta = np.asarray(theta, dtype=float)
        k, a, b = self._k()
        kt = theta[..., None] * k
        return self.a0 + np.cos(kt) @ a + np.sin(kt) @ b

    def derivative(self, theta):
        theta = np.asarray(theta, dtype=float)
        k, a, b = self._k()
        kt = theta[..., None] * k
        return np.cos(kt) @ (k * b) - np.sin(kt) @ (k * a)

    def is_disk(self) -> bool:
        return not any(self.cos) and not any(self.sin)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Structured polar mesh: one pole vertex, then ``N_r`` rings of ``N_theta`` vertices.

    Vertex ``1 + (i-1) N_theta + j`` sits at ``t = (i/N_r) b(theta_j)``.
    ``boundary_normal`` holds the inward g-unit normal in ``(t, theta)`` components.
    """

    domain: StarDomain
    profile: WarpProfile
    N_r: int
    N_theta: int
    offset: float
    t: np.ndarray
    theta: np.ndarray
    xy: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    boundary_d: np.ndarray
    boundary_normal: np.ndarray
    grads: np.ndarray = field(repr=False)
    ginv: np.ndarray = field(repr=False)
    area: np.ndarray = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.t)

    @cached_property
    def interior(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary] = False
        return np.nonzero(mask)[0]

    @cached_property
    def local_stiffness(self) -> np.ndarray:
        """``|T|_g grad(phi_a) . g^{-1} grad(phi_b)`` per triangle, shape ``(T, 3, 3)``."""
        gg = np.einsum("tai,tij->taj", self.grads, self.ginv)
        return self.area[:, None, None] * np.einsum("taj,tbj->tab", gg, self.grads)

    @cached_property
    def load(self) -> np.ndarray:
        """``int phi_i`` with the frozen metric area."""
        return np.bincount(self.triangles.ravel(), np.repeat(self.area / 3, 3),
                           minlength=self.n_vertices)

    @property
    def total_area(self) -> float:
        return float(self.area.sum())

    def mesh_size(self) -> float:
        return float(np.max(self.domain.radius(self.theta[self.boundary]))) / self.N_r


def _metric_at(xy, profile):
    """Inverse metric and volume factor ``rho(t)/t`` at chart points."""
    t = np.hypot(xy[:, 0], xy[:, 1])
    q = np.asarray(profile.rho(t), dtype=float) / t
    rhat = xy / t[:, None]
    outer = rhat[:, :, None] * rhat[:, None, :]
    ginv = outer + (np.eye(2) - outer) / (q * q)[:, None, None]
    return ginv, q


def build_mesh(domain: StarDomain, profile: WarpProfile, N_r: int, N_theta: int,
               offset: float = 0.0) -> Mesh:
    if profile.n != 2:
        raise ValueError("the finite-element solver is two-dimensional (n = 2)")
    if N_r < 4 or N_theta < 8 or N_theta % 2:
        raise ValueError("need N_r >= 4 and an even N_theta >= 8")
    fine = np.linspace(0.0, 2 * math.pi, 4096, endpoint=False)
    if np.max(domain.radius(fine)) >= profile.max_radius - DOMAIN_MARGIN:
        raise ValueError("domain reaches the profile's validity radius")

    angles = offset + 2 * math.pi * np.arange(N_theta) / N_theta
    b = domain.radius(angles)
    s = np.arange(1, N_r + 1) / N_r
    t = np.concatenate([[0.0], (s[:, None] * b[None, :]).ravel()])
    theta = np.concatenate([[0.0], np.tile(angles, N_r)])
    xy = np.stack([t * np.cos(theta), t * np.sin(theta)], axis=1)
    xy[0] = 0.0

    def vid(i, j):
        return 1 + (i - 1) * N_theta + (j % N_theta)

    j = np.arange(N_theta)
    tris = [np.stack([np.zeros(N_theta, dtype=int), vid(1, j), vid(1, j + 1)], axis=1)]
    for i in range(1, N_r):
        a, bb, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
        pair = np.empty((2 * N_theta, 3), dtype=int)
        pair[0::2] = np.stack([a, bb, c], axis=1)
        pair[1::2] = np.stack([a, c, d], axis=1)
        tris.append(pair)
    triangles = np.concatenate(tris)

    P = xy[triangles]
    e1 = P[:, 1] - P[:, 0]
    e2 = P[:, 2] - P[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det <= 1e-14 * np.max(np.abs(det))):
        raise ValueError("degenerate or inverted triangle; refine N_theta or smooth the boundary")
    # rows of inv([e1 e2]) give the gradients of the barycentric coordinates 1 and 2
    g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=1) / det[:, None]
    g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=1) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)
    ginv, q = _metric_at(P.mean(axis=1), profile)
    area = 0.5 * det * q

    boundary = vid(N_r, j)
    db = domain.derivative(angles)
    rho_b = np.asarray(profile.rho(b), dtype=float)
    norm = np.sqrt(1 + (db / rho_b) ** 2)
    normal = np.stack([-1 / norm, db / rho_b**2 / norm], axis=1)

    return Mesh(domain=domain, profile=profile, N_r=int(N_r), N_theta=int(N_theta),
                offset=float(offset), t=t, theta=theta, xy=xy, triangles=triangles,
                boundary=boundary, boundary_d=b, boundary_normal=normal,
                grads=grads, ginv=ginv, area=area)


@dataclass(frozen=True)
class SolverConfig:
    p: float
    epsilon: float = 1e-8
    max_iterations: int = 200
    energy_tolerance: float = 1e-12
    damping: float = 1.0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.energy_tolerance > 0:
            raise ValueError("energy_tolerance must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass(frozen=True)
class BoundarySamples:
    theta: np.ndarray
    d: np.ndarray
    dnu: np.ndarray

    def pairs(self):
        return list(zip(self.d.tolist(), self.dnu.tolist()))

    def __len__(self):
        return len(self.d)


@dataclass(eq=False)
class TorsionField:
    mesh: Mesh
    p: float
    epsilon: float
    u: np.ndarray
    energy_log: tuple
    converged: bool
    iterations: int

    @cached_property
    def boundary_samples(self) -> BoundarySamples:
        return boundary_normal_samples(self)


def _gradients(mesh, u):
    return np.einsum("ta,tai->ti", u[mesh.triangles], mesh.grads)


def _grad_norm2(mesh, u):
    g = _gradients(mesh, u)
    return np.einsum("ti,tij,tj->t", g, mesh.ginv, g)


def energy(mesh: Mesh, u, p: float, epsilon: float = 0.0) -> float:
    s = _grad_norm2(mesh, u)
    return float(mesh.area @ ((epsilon**2 + s) ** (p / 2)) / p - mesh.load @ u)


class _WeightedSolver:
    """Dirichlet-restricted weighted stiffness solves on a fixed mesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        tri = mesh.triangles
        self.rows = np.repeat(tri, 3, axis=1).ravel()
        self.cols = np.tile(tri, (1, 3)).ravel()
        self.interior = mesh.interior

    def solve(self, weights):
        m = self.mesh
        data = (weights[:, None, None] * m.local_stiffness).ravel()
        K = sp.csr_matrix((data, (self.rows, self.cols)), shape=(m.n_vertices,) * 2)
        Kii = K[self.interior][:, self.interior].tocsc()
        try:
            x = splu(Kii).solve(m.load[self.interior])
        except RuntimeError as exc:
            raise FEMError(f"singular stiffness matrix: {exc}") from exc
        u = np.zeros(m.n_vertices)
        u[self.interior] = x
        return u


def solve_torsion(mesh: Mesh, profile: WarpProfile | None = None,
                  config: SolverConfig | None = None) -> TorsionField:
    """Minimize the discrete p-torsion energy with zero boundary values."""
    if config is None:
        config = SolverConfig(p=2.0)
    if profile is not None and profile is not mesh.profile and profile != mesh.profile:
        raise ValueError("mesh was built for a different profile")
    p, eps = config.p, config.epsilon
    solver = _WeightedSolver(mesh)

    u = solver.solve(np.ones(len(mesh.triangles)))
    if p != 2:
        # best multiple of the p = 2 solution: c^p S / p - c L is minimal at (L/S)^(1/(p-1))
        S = mesh.area @ _grad_norm2(mesh, u) ** (p / 2)
        u = u * (mesh.load @ u / S) ** (1 / (p - 1))
    J = energy(mesh, u, p, eps)
    log = [J]
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        w = (eps**2 + _grad_norm2(mesh, u)) ** ((p - 2) / 2)
        target = solver.solve(w)
        alpha = config.damping
        while True:
            cand = u + alpha * (target - u)
            Jc = energy(mesh, cand, p, eps)
            if Jc <= J:
                break
            alpha /= 2
            if alpha < 2.0**-40:
                break
        if Jc > J:
            # no decrease left at rounding level
            converged = True
            break
        decrease = J - Jc
        u, J = cand, Jc
        log.append(J)
        if decrease <= config.energy_tolerance * abs(J):
            converged = True
            break
    if not converged:
        warnings.warn(f"Kacanov iteration did not converge in {config.max_iterations} steps "
                      f"(last energies {log[-3:]})", RuntimeWarning, stacklevel=2)
    return TorsionField(mesh=mesh, p=float(p), epsilon=float(eps), u=u,
                        energy_log=tuple(log), converged=converged, iterations=iterations)


def recovered_gradients(field: TorsionField) -> np.ndarray:
    """Vertex gradients (chart components) from metric-area-weighted triangle averages."""
    m = field.mesh
    g = _gradients(m, field.u)
    V = m.n_vertices
    tri = m.triangles.ravel()
    w = np.repeat(m.area, 3)
    out = np.empty((V, 2))
    total = np.bincount(tri, w, minlength=V)
    for k in range(2):
        out[:, k] = np.bincount(tri, w * np.repeat(g[:, k], 3), minlength=V) / total
    return out


def boundary_normal_samples(field: TorsionField) -> BoundarySamples:
    """``(d, g(grad u, nu))`` at every boundary vertex, ``nu`` the inward unit normal."""
    m = field.mesh
    idx = m.boundary
    grad = recovered_gradients(field)[idx]
    th = m.theta[idx]
    t = m.t[idx]
    u_t = grad[:, 0] * np.cos(th) + grad[:, 1] * np.sin(th)
    u_th = t * (-grad[:, 0] * np.sin(th) + grad[:, 1] * np.cos(th))
    dnu = m.boundary_normal[:, 0] * u_t + m.boundary_normal[:, 1] * u_th
    if np.any(dnu <= 0):
        warnings.warn("nonpositive boundary normal derivative; mesh is probably under-resolved",
                      RuntimeWarning, stacklevel=2)
    return BoundarySamples(theta=np.mod(th, 2 * math.pi), d=m.boundary_d.copy(), dnu=dnu)


def _triangle_id(mesh, ring, sector):
    """Triangles in the cell between ring ``ring`` and ``ring + 1`` of sector ``sector``."""
    sector = sector % mesh.N_theta
    if ring == 0:
        return [sector]
    base = mesh.N_theta + 2 * ((ring - 1) * mesh.N_theta + sector)
    return [base, base + 1]


def field_value_at(field: TorsionField, t: float, theta: float) -> float:
    """Piecewise-linear interpolant of the nodal values at ``(t, theta)``."""
    m = field.mesh
    b = float(m.domain.radius(theta))
    if t < 0:
        raise ValueError("t must be nonnegative")
    s = t / b
    if s > 1 + 1e-12:
        raise ValueError(f"point (t={t}, theta={theta}) lies outside the domain")
    if s >= 1 - 1e-12:
        return 0.0
    if t == 0:
        return float(field.u[0])
    x = np.array([t * math.cos(theta), t * math.sin(theta)])
    dth = 2 * math.pi / m.N_theta
    sector = int(math.floor((theta - m.offset) / dth))
    ring = int(math.floor(s * m.N_r))
    best, best_lam, best_tri = -math.inf, None, None
    for i in range(max(ring - 1, 0), min(ring + 2, m.N_r)):
        for jj in (sector - 1, sector, sector + 1):
            for tid in _triangle_id(m, i, jj):
                P = m.xy[m.triangles[tid]]
                A = np.array([P[1] - P[0], P[2] - P[0]]).T
                l12 = np.linalg.solve(A, x - P[0])
                lam = np.array([1 - l12.sum(), l12[0], l12[1]])
                if lam.min() > best:
                    best, best_lam, best_tri = lam.min(), lam, tid
    if best < -1e-6 * max(1, m.N_r):
        raise ValueError(f"point (t={t}, theta={theta}) not located in the mesh")
    return float(best_lam @ field.u[m.triangles[best_tri]])


def write_mesh(mesh: Mesh, path) -> None:
    """Flat text: ``v t theta`` per vertex, then ``f i j k`` per triangle (0-based)."""
    with open(path, "w") as fh:
        for ti, th in zip(mesh.t, mesh.theta):
            fh.write(f"v {float(ti)!r} {float(th)!r}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"f {a} {b} {c}\n")


def write_field_csv(field: TorsionField, path) -> None:
    m = field.mesh
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["vertex_id", "t", "theta", "u"])
        for i, (ti, th, ui) in enumerate(zip(m.t, m.theta, field.u)):
            w.writerow([i, repr(float(ti)), repr(float(th)), repr(float(ui))])


def write_boundary_csv(samples: BoundarySamples, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "d", "dnu_u"])
        for th, d, g in zip(samples.theta, samples.d, samples.dnu):
            w.writerow([repr(float(th)), repr(float(d)), repr(float(g))])
