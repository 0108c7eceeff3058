"""End-to-end runs: assemble, eigenpairs, geometry certificate, solver, report files."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, jsonable
from .discretization import assemble, dump_matrices
from .exceptions import MixnlError
from .nonlinearity import check_AR
from .solvers import (
    LinkingOptions,
    MountainPassOptions,
    NewtonOptions,
    Problem,
    solve_linking,
    solve_mountain_pass,
    verify_linking_geometry,
    verify_mp_geometry,
)
from .spectra import solve_eigen

__all__ = ["RunReport", "StageError", "run", "branch_for", "write_outputs", "LAMBDA_1"]

log = logging.getLogger(__name__)

# the first Neumann eigenvalue is exactly 1 (constants); the branch uses this value
LAMBDA_1 = 1.0
STAGES = ("assemble", "eigs", "geometry", "solve")


class StageError(MixnlError):
    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage
        self.original = exc


def branch_for(lam: float) -> str:
    return "mountain_pass" if lam < LAMBDA_1 else "linking"


@dataclass
class RunReport:
    config: dict
    version: str = __version__
    branch: str | None = None
    eigen: dict = field(default_factory=dict)
    hypotheses: dict = field(default_factory=dict)
    certificate: dict = field(default_factory=dict)
    solution: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    error: dict | None = None
    # arrays kept out of the JSON
    nodes: np.ndarray | None = None
    u: np.ndarray | None = None
    lambdas_tilde: np.ndarray | None = None
    trace: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.error is None and bool(self.checks) and all(c["passed"] for c in self.checks.values())

    def to_dict(self, timings: bool = True) -> dict:
        out = {
            "version": self.version,
            "passed": self.passed,
            "branch": self.branch,
            "config": self.config,
            "eigen": self.eigen,
            "hypotheses": self.hypotheses,
            "certificate": self.certificate,
            "solution": self.solution,
            "checks": self.checks,
            "error": self.error,
        }
        if timings:
            out["timings"] = self.timings
        return jsonable(out)


def _check(report, name, value, limit, passed):
    report.checks[name] = {"value": value, "limit": limit, "passed": bool(passed)}


class _Stage:
    def __init__(self, report, name):
        self.report, self.name = report, name

    def __enter__(self):
        self.t0 = time.perf_counter()
        log.info("stage %s", self.name)

    def __exit__(self, typ, exc, tb):
        self.report.timings[self.name] = time.perf_counter() - self.t0
        if exc is not None and isinstance(exc, MixnlError) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def run(config: RunConfig, stop_after: str | None = None, branch: str | None = None,
        dump_dir=None) -> RunReport:
    """Execute the pipeline up to ``stop_after`` (one of ``assemble``, ``eigs``,
    ``geometry``, ``solve``).  ``branch`` forces ``mountain_pass`` or
    ``linking``; by default it follows ``lambda`` against 1.

    Module errors are caught and stored in ``report.error`` with their stage.
    """
    if stop_after is not None and stop_after not in STAGES:
        raise ValueError(f"stop_after must be one of {STAGES}")
    report = RunReport(config=config.raw)
    try:
        _run(config, report, stop_after or "solve", branch, dump_dir)
    except StageError as exc:
        report.error = {"stage": exc.stage, "type": type(exc.original).__name__, "message": str(exc.original)}
        log.error("%s", exc)
    return report


def _run(config, report, stop_after, forced, dump_dir):
    cfg = config.raw
    lam = float(cfg["lambda"])
    tol = float(cfg["solver"]["tol"])
    seed = int(cfg["seed"])
    with _Stage(report, "assemble"):
        mesh = config.mesh()
        matrices = assemble(mesh, config.measure, float(cfg["alpha"]), config.quad)
        report.nodes = mesh.nodes
        if dump_dir is not None:
            dump_matrices(matrices, dump_dir)
    report.eigen["n_nodes"] = int(mesh.n_nodes)
    if stop_after == "assemble":
        _check(report, "assembly", 0.0, 0.0, True)
        return

    with _Stage(report, "eigs"):
        eig = solve_eigen(matrices, method=cfg["solver"]["eigen_method"])
    lt = eig.lambdas_tilde
    n_show = min(int(cfg["solver"]["n_eigs"]), eig.k)
    report.lambdas_tilde = lt[:n_show]
    ones = mesh.interior_dofs
    e1 = eig.vectors[ones, 0]
    e1_dev = float(np.ptp(e1) / np.max(np.abs(e1)))
    gap_scale = max(1.0, float(lt[1]))
    report.eigen.update({"lambda_tilde": lt[:n_show].tolist(), "lambda_1_tilde": float(lt[0]),
                         "lambda_2_tilde": float(lt[1]), "e1_relative_deviation": e1_dev, "method": eig.method})
    _check(report, "lambda_1_tilde_zero", abs(float(lt[0])), 1e-8 * gap_scale, abs(lt[0]) <= 1e-8 * gap_scale)
    _check(report, "e1_constant", e1_dev, 1e-6, e1_dev <= 1e-6)
    if stop_after == "eigs":
        return

    nl = config.nonlinearity
    problem = Problem(matrices, lam, nl, eig=eig)
    ar = check_AR(nl, problem.bookkeeping)
    report.hypotheses = ar.to_dict()
    _check(report, "hypotheses", float(ar.holds), 1.0, ar.holds)

    kind = forced or branch_for(lam)
    report.branch = kind
    sv = cfg["solver"]
    with _Stage(report, "geometry"):
        if kind == "mountain_pass":
            if lam >= LAMBDA_1:
                raise StageError("geometry", MixnlError(f"mountain-pass branch needs lambda < 1, got {lam}"))
            cert = verify_mp_geometry(problem, n_dirs=int(sv["n_dirs"]), seed=seed)
        else:
            if lam < LAMBDA_1:
                raise StageError("geometry", MixnlError(f"linking branch needs lambda >= 1, got {lam}"))
            index = eig.locate(lam)
            cert = verify_linking_geometry(problem, index, n_samples=int(sv["n_samples"]), seed=seed)
    report.certificate = cert.to_dict()
    _check(report, "geometry_beta_positive", cert.beta, 0.0, cert.beta > 0)
    if stop_after == "geometry":
        return

    newton = NewtonOptions(tol=min(tol, 1e-10))
    with _Stage(report, "solve"):
        if kind == "mountain_pass":
            mp = sv.get("mp", {})
            opts = MountainPassOptions(tol=tol, max_iter=int(mp.get("max_iter", 2000)),
                                       path_points=int(mp.get("path_points", 40)), n_dirs=int(sv["n_dirs"]),
                                       seed=seed, newton=newton)
            sol = solve_mountain_pass(problem, opts, certificate=cert)
        else:
            link = sv.get("link", {})
            opts = LinkingOptions(tol=tol, seeds=int(link.get("seeds", 8)), n_samples=int(sv["n_samples"]),
                                  seed=seed, newton=NewtonOptions(tol=min(tol, 1e-10), max_iter=60))
            sol = solve_linking(problem, cert.index, opts, certificate=cert)
    report.u = sol.u
    report.trace = sol.trace
    interior = sol.u[mesh.interior_dofs]
    spread = float(np.ptp(interior))
    report.solution = sol.summary() | {"interior_spread": spread, "interior_mean": float(np.mean(interior))}
    _check(report, "residual", sol.residual, tol, sol.residual <= tol)
    _check(report, "nontrivial", sol.norm, 1e-3, sol.norm >= 1e-3)
    _check(report, "level_positive", sol.level, 0.0, sol.level > 0)
    _check(report, "level_above_beta", sol.level - cert.beta, -tol, sol.level >= cert.beta - tol)


def write_outputs(report: RunReport, out_dir) -> list[Path]:
    """Write ``report.json`` and whichever CSV tables the run produced."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "report.json"
    path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    written.append(path)
    if report.lambdas_tilde is not None:
        path = out / "eigs.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "lambda_tilde", "lambda"])
            for k, lt in enumerate(report.lambdas_tilde, start=1):
                w.writerow([k, repr(float(lt)), repr(float(lt) + 1.0)])
        written.append(path)
    if report.u is not None:
        path = out / "solution.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "u"])
            for x, v in zip(report.nodes, report.u):
                w.writerow([repr(float(x)), repr(float(v))])
        written.append(path)
    if report.trace:
        path = out / "trace.csv"
        keys = sorted({k for row in report.trace for k in row})
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
            w.writeheader()
            for row in report.trace:
                w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
        written.append(path)
    return written
