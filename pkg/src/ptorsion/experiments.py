"""Configuration-driven experiments producing CSV artifacts and a JSON report."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fem
from .config import ExperimentConfig, parse_domain, parse_f, profile_of
from .geometry import ball_quantities
from .overdetermined import (
    OverdeterminedData,
    bin_boundary_samples,
    classify,
    extract_f_of_d,
    tangency_radii,
)
from .quadrature import QuadratureSpec
from .radial import ode_residual, solve_radial, write_radial_csv


@dataclass
class ExperimentReport:
    config: dict
    results: dict = field(default_factory=dict)
    manifest: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and all(self.flags.values())

    def to_dict(self) -> dict:
        return {"config": self.config, "results": self.results, "manifest": self.manifest,
                "timings": self.timings, "flags": self.flags, "error": self.error,
                "ok": self.ok}


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([x if isinstance(x, (int, str)) else repr(float(x)) for x in row])


def _solver_config(cfg):
    return fem.SolverConfig(p=cfg.p, epsilon=cfg.epsilon, max_iterations=cfg.max_iterations,
                            energy_tolerance=cfg.energy_tolerance, damping=cfg.damping)


class _Run:
    def __init__(self, cfg: ExperimentConfig, out: Path, report: ExperimentReport):
        self.cfg = cfg
        self.out = out
        self.report = report
        self.quad = QuadratureSpec(abs_tolerance=cfg.quad_tol)
        self.profile = profile_of(cfg)
        self.bq = ball_quantities(self.profile, cfg.p, self.quad)

    def path(self, name):
        self.report.manifest.append(name)
        return self.out / name

    def radial(self):
        cfg = self.cfg
        sol = solve_radial(self.profile, cfg.p, cfg.r, cfg.grid_size, self.quad, self.bq)
        write_radial_csv(sol, self.path("radial.csv"))
        res = ode_residual(sol)
        self.report.results.update(V0=float(sol.V[0]), phi_r=float(-sol.Vp[-1]), ode_residual=res)
        self.report.flags["ode_residual_below_1e-4"] = bool(res < 1e-4)

    def phi_table(self):
        cfg = self.cfg
        t = cfg.t_max * np.arange(1, cfg.points + 1) / cfg.points
        t[-1] = cfg.t_max
        S, A = self.bq.sphere_area(t), self.bq.ball_volume(t)
        phi, eta = self.bq.phi(t), self.bq.eta(t)
        _write_rows(self.path("phi_table.csv"), ["t", "S", "A", "Phi", "eta"],
                    zip(t, S, A, phi, eta))
        self.report.results.update(phi_at_t_max=float(phi[-1]))

    def _solve(self, domain, tag=""):
        cfg = self.cfg
        mesh = fem.build_mesh(domain, self.profile, cfg.N_r, cfg.N_theta, cfg.offset)
        sol = fem.solve_torsion(mesh, self.profile, _solver_config(cfg))
        fem.write_mesh(mesh, self.path(f"mesh{tag}.txt"))
        fem.write_field_csv(sol, self.path(f"field{tag}.csv"))
        fem.write_boundary_csv(sol.boundary_samples, self.path(f"boundary{tag}.csv"))
        return mesh, sol

    def fem_ball(self):
        cfg = self.cfg
        mesh, sol = self._solve(fem.StarDomain.disk(cfg.r))
        oracle = solve_radial(self.profile, cfg.p, cfg.r, quad=self.quad, quantities=self.bq)
        expected = oracle.value_at(mesh.t)
        _write_rows(self.path("oracle.csv"), ["vertex_id", "u_radial"],
                    zip(range(mesh.n_vertices), expected))
        phi = float(self.bq.phi(cfg.r))
        dnu = sol.boundary_samples.dnu
        dev = float(np.max(np.abs(dnu / phi - 1)))
        self.report.results.update(
            phi_r=phi, max_nodal_deviation=float(np.max(np.abs(sol.u - expected))),
            boundary_max_rel_deviation=dev, boundary_rel_spread=float(np.ptp(dnu) / phi),
            converged=sol.converged, iterations=sol.iterations)
        self.report.flags["boundary_within_tolerance"] = bool(dev < cfg.boundary_tol)
        self.report.flags["converged"] = bool(sol.converged)

    def fem_star(self):
        cfg = self.cfg
        domain = parse_domain(cfg.domain, cfg.seed)
        mesh, sol = self._solve(domain)
        radii = tangency_radii(domain)
        inner = solve_radial(self.profile, cfg.p, radii.r0, quad=self.quad, quantities=self.bq)
        outer = solve_radial(self.profile, cfg.p, radii.r1, quad=self.quad, quantities=self.bq)
        in_ball = mesh.t <= radii.r0
        lower = np.where(in_ball, inner.value_at(np.minimum(mesh.t, radii.r0)), -math.inf)
        upper = outer.value_at(mesh.t)
        _write_rows(self.path("sandwich.csv"), ["vertex_id", "lower", "u", "upper"],
                    zip(range(mesh.n_vertices), lower, sol.u, upper))
        low_gap = float(np.max(lower[in_ball] - sol.u[in_ball]))
        high_gap = float(np.max(sol.u - upper))
        table, spread = extract_f_of_d(sol.boundary_samples, cfg.n_bins)
        self.report.results.update(r0=radii.r0, r1=radii.r1, lower_violation=low_gap,
                                   upper_violation=high_gap, f_of_d_spread=spread,
                                   f_of_d_consistent=table is not None,
                                   converged=sol.converged)
        self.report.flags["sandwich"] = bool(max(low_gap, high_gap) <= cfg.sandwich_tol)
        self.report.flags["converged"] = bool(sol.converged)

    def classify(self):
        cfg = self.cfg
        domain = parse_domain(cfg.domain, cfg.seed)
        data = OverdeterminedData(parse_f(cfg.f, self.bq), self.bq, label=cfg.f)
        verdict = classify(data, domain)
        self.path("verdict.txt").write_text(verdict.report())
        _write_rows(self.path("ratio.csv"), ["t", "ratio"], verdict.ratio_samples)
        self.report.results.update(verdict=verdict.kind, R=verdict.R, reason=verdict.reason,
                                   r0=verdict.r0, r1=verdict.r1)

    def rigidity_sweep(self):
        cfg = self.cfg
        cos = [0.0] * cfg.k

        def one(lam):
            c = list(cos)
            c[cfg.k - 1] = cfg.R * lam
            domain = fem.StarDomain(cfg.R, tuple(c))
            mesh = fem.build_mesh(domain, self.profile, cfg.N_r, cfg.N_theta, cfg.offset)
            return fem.solve_torsion(mesh, self.profile, _solver_config(cfg))

        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            sols = list(pool.map(one, cfg.lambdas))
        spreads = []
        for i, (lam, sol) in enumerate(zip(cfg.lambdas, sols)):
            fem.write_boundary_csv(sol.boundary_samples, self.path(f"boundary_{i}.csv"))
            binned = bin_boundary_samples(sol.boundary_samples, cfg.n_bins)
            spreads.append(float(np.max(binned.abs_spread)))
        _write_rows(self.path("sweep.csv"), ["lambda", "D"], zip(cfg.lambdas, spreads))
        phi = float(self.bq.phi(cfg.R))
        D = np.array(spreads)
        self.report.results.update(phi_R=phi, D=spreads, n_bins=cfg.n_bins)
        self.report.flags["D0_below_1pct_phi"] = bool(D[0] < 0.01 * phi)
        self.report.flags["D_strictly_increasing"] = bool(np.all(np.diff(D) > 0))
        self.report.flags["D_last_above_5_D0"] = bool(D[-1] > 5 * D[0])


_DISPATCH = {
    "radial": _Run.radial,
    "phi-table": _Run.phi_table,
    "fem-ball": _Run.fem_ball,
    "fem-star": _Run.fem_star,
    "classify": _Run.classify,
    "rigidity-sweep": _Run.rigidity_sweep,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentReport:
    """Run one experiment; module errors end up in ``report.error``."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = ExperimentReport(config=cfg.echo())
    start = time.perf_counter()
    try:
        _DISPATCH[cfg.kind](_Run(cfg, out, report))
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        report.error = f"{type(exc).__name__}: {exc}"
    report.timings["total_seconds"] = time.perf_counter() - start
    report.manifest.append("report.json")
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, default=_jsonable) + "\n")
    return report


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")
