"""Energy functional, gradient and critical-point searches.

The discrete energy on nodal vectors ``u`` is

    I(u) = 1/2 u^T (M + alpha K + B) u - lam/2 u^T M u - int_omega F(u_h)

with ``F`` integrated by 4-point Gauss on every interior cell.  Below the
first eigenvalue the mountain-pass path method is used; at or above it a
deflated Newton search seeded along the next eigenvector, checked against an
independently sampled linking certificate.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar

from .discretization import OperatorMatrices, anorm
from .exceptions import (
    DegeneratePathError,
    DomainError,
    GeometryNotCertifiedError,
    NonConvergenceError,
)
from .measure import OrderBookkeeping, s_sharp
from .spectra import LOCATE_RTOL, EigenDecomposition, solve_eigen, split

__all__ = [
    "Problem",
    "Solution",
    "NewtonOptions",
    "MountainPassOptions",
    "LinkingOptions",
    "Deflation",
    "energy",
    "gradient",
    "hessian",
    "residual",
    "morse_index",
    "newton_solve",
    "verify_mp_geometry",
    "solve_mountain_pass",
    "verify_linking_geometry",
    "solve_linking",
]

log = logging.getLogger(__name__)

_GX, _GW = np.polynomial.legendre.leggauss(4)
_GX = 0.5 * (_GX + 1.0)
_GW = 0.5 * _GW
_PHI = np.stack([1.0 - _GX, _GX])  # (2 local dofs, 4 points)


class Problem:
    """Discrete ``L u + u = lam u + f(u)`` with homogeneous Neumann conditions."""

    def __init__(self, matrices: OperatorMatrices, lam: float, nl, eig: EigenDecomposition | None = None):
        self.matrices = matrices
        self.lam = float(lam)
        self.nl = nl
        self.bookkeeping: OrderBookkeeping = s_sharp(matrices.measure, matrices.alpha)
        self._eig = eig
        mesh = matrices.mesh
        self.free = matrices.free_dofs
        self.cells = np.flatnonzero(mesh.cell_is_interior)
        self.h = mesh.widths[self.cells]
        self.Q = matrices.norm_matrix
        self.H0 = self.Q - self.lam * matrices.M
        self._Qfree = linalg.cho_factor(self.Q[np.ix_(self.free, self.free)])
        self._basis_norm = np.sqrt(np.diag(self.Q))

    @property
    def n(self) -> int:
        return self.matrices.mesh.n_nodes

    @property
    def eig(self) -> EigenDecomposition:
        if self._eig is None:
            self._eig = solve_eigen(self.matrices)
        return self._eig

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n)

    def constant(self, c: float = 1.0) -> np.ndarray:
        u = np.zeros(self.n)
        u[self.free] = c
        return u

    def riesz(self, g) -> np.ndarray:
        """Representative of the dual vector ``g`` in the energy inner product."""
        w = np.zeros(self.n)
        w[self.free] = linalg.cho_solve(self._Qfree, np.asarray(g)[self.free])
        return w

    def norm(self, u) -> float:
        return anorm(u, self.matrices)

    def l2_norm(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return math.sqrt(max(float(u @ self.matrices.M @ u), 0.0))

    def _at_gauss(self, u):
        u = np.asarray(u, dtype=float)
        return np.outer(u[self.cells], _PHI[0]) + np.outer(u[self.cells + 1], _PHI[1])  # (cells, 4)

    def _weights(self):
        return self.h[:, None] * _GW[None, :]

    def integral_F(self, u) -> float:
        return float(np.sum(self._weights() * self.nl.F(self._at_gauss(u))))

    def load_f(self, u) -> np.ndarray:
        vals = self._weights() * self.nl.f(self._at_gauss(u))
        out = np.zeros(self.n)
        np.add.at(out, self.cells, vals @ _PHI[0])
        np.add.at(out, self.cells + 1, vals @ _PHI[1])
        return out

    def jacobian_f(self, u) -> np.ndarray:
        vals = self._weights() * self.nl.df(self._at_gauss(u))
        out = np.zeros((self.n, self.n))
        for a in range(2):
            for b in range(2):
                np.add.at(out, (self.cells + a, self.cells + b), vals @ (_PHI[a] * _PHI[b]))
        return out


# -------------------------------------------------------------- functional pieces


def energy(problem: Problem, u) -> float:
    u = np.asarray(u, dtype=float)
    return 0.5 * float(u @ problem.H0 @ u) - problem.integral_F(u)


def gradient(problem: Problem, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    g = problem.H0 @ u - problem.load_f(u)
    out = np.zeros_like(g)
    out[problem.free] = g[problem.free]
    return out


def hessian(problem: Problem, u) -> np.ndarray:
    return problem.H0 - problem.jacobian_f(u)


def morse_index(problem: Problem, u) -> int:
    """Number of negative directions of the Hessian relative to the energy inner product."""
    f = problem.free
    H = hessian(problem, u)[np.ix_(f, f)]
    ev = linalg.eigvalsh(0.5 * (H + H.T), problem.Q[np.ix_(f, f)])
    return int(np.sum(ev < -1e-8))


def residual(problem: Problem, u, g=None) -> float:
    """``max_j |<I'(u), phi_j>| / ||phi_j||`` over the free basis functions."""
    g = gradient(problem, u) if g is None else g
    free = problem.free
    return float(np.max(np.abs(g[free]) / problem._basis_norm[free]))


# ---------------------------------------------------------------------- results


@dataclass
class Solution:
    u: np.ndarray
    level: float
    residual: float
    iterations: int
    kind: str
    certificate: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)
    norm: float = float("nan")

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "level": self.level,
            "residual": self.residual,
            "iterations": self.iterations,
            "anorm": self.norm,
            "certificate": self.certificate,
        }


@dataclass(frozen=True)
class NewtonOptions:
    tol: float = 1e-10
    max_iter: int = 50
    min_damping: float = 1.0 / 1024
    rcond_floor: float = 1e-14


@dataclass
class Deflation:
    """Shifted power deflation ``prod_r (||u - r||^-power + shift)`` in the energy norm."""

    roots: list = field(default_factory=list)
    power: float = 2.0
    shift: float = 1.0
    radius: float = 1e-6

    def grad_log(self, problem: Problem, u) -> np.ndarray:
        out = np.zeros_like(u)
        for r in self.roots:
            diff = u - r
            d = max(problem.norm(diff), 1e-300)
            m_r = d ** (-self.power) + self.shift
            out += -self.power * d ** (-self.power - 2.0) * (problem.Q @ diff) / m_r
        return out

    def too_close(self, problem: Problem, u) -> bool:
        return any(problem.norm(u - r) < self.radius * (1.0 + problem.norm(r)) for r in self.roots)


def _solve_sym(H, rhs, rcond_floor):
    with warnings.catch_warnings():
        warnings.simplefilter("error", linalg.LinAlgWarning)
        try:
            return linalg.solve(H, rhs, assume_a="sym"), None
        except (linalg.LinAlgError, linalg.LinAlgWarning) as exc:
            cond = np.linalg.cond(H)
            return None, f"singular Hessian (cond={cond:.3e}): {exc}"


def newton_solve(problem: Problem, u0, opts: NewtonOptions | None = None, deflation: Deflation | None = None) -> Solution:
    """Damped (optionally deflated) Newton iteration on ``I'(u) = 0``.

    The damping factor is halved until the Euclidean norm of the scaled
    residual decreases.  Raises :class:`NonConvergenceError` on a singular
    Hessian, stagnation, or when the iterate lands on a deflated root.
    """
    opts = opts or NewtonOptions()
    u = np.array(u0, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("initial guess is not finite")
    free = problem.free
    scale = problem._basis_norm[free]
    trace = []

    def merit(g):
        return float(np.linalg.norm(g[free] / scale))

    g = gradient(problem, u)
    res = residual(problem, u, g)
    trace.append({"iter": 0, "residual": res, "level": energy(problem, u), "damping": 0.0})
    for it in range(1, opts.max_iter + 1):
        if res <= opts.tol:
            break
        H = hessian(problem, u)[np.ix_(free, free)]
        step, err = _solve_sym(H, -g[free], opts.rcond_floor)
        if step is None:
            raise NonConvergenceError(err, trace)
        du = np.zeros_like(u)
        du[free] = step
        if deflation is not None and deflation.roots:
            gamma = float(deflation.grad_log(problem, u) @ du)
            if abs(1.0 - gamma) > 1e-12:
                du = du / (1.0 - gamma)
        m0 = merit(g)
        damping = 1.0
        while True:
            trial = u + damping * du
            g_trial = gradient(problem, trial)
            if merit(g_trial) < m0 or damping <= opts.min_damping:
                break
            damping *= 0.5
        u, g = trial, g_trial
        res = residual(problem, u, g)
        trace.append({"iter": it, "residual": res, "level": energy(problem, u), "damping": damping})
        if not np.isfinite(res):
            raise NonConvergenceError("Newton iteration diverged", trace)
    if res > opts.tol:
        raise NonConvergenceError(f"Newton did not reach tol={opts.tol:g} in {opts.max_iter} iterations (residual {res:.3e})", trace)
    if deflation is not None and deflation.too_close(problem, u):
        raise NonConvergenceError("Newton converged onto a deflated root", trace)
    return Solution(u=u, level=energy(problem, u), residual=res, iterations=len(trace) - 1,
                    kind="newton", trace=trace, norm=problem.norm(u))


# ------------------------------------------------------------------ mountain pass


def _default_rho_grid():
    return np.geomspace(1e-3, 2.0, 40)


def _unit(problem: Problem, u):
    nrm = problem.norm(u)
    return u / nrm


def _random_directions(problem: Problem, n_dirs: int, rng: np.random.Generator):
    dirs = [_unit(problem, problem.constant(1.0))]
    for _ in range(n_dirs):
        v = np.zeros(problem.n)
        v[problem.free] = rng.standard_normal(problem.free.size)
        dirs.append(_unit(problem, v))
    return dirs


@dataclass
class MountainPassCertificate:
    rho: float
    beta: float
    e: np.ndarray
    e_norm: float
    e_level: float
    n_dirs: int
    seed: int | None

    def to_dict(self) -> dict:
        return {"rho": self.rho, "beta": self.beta, "e_norm": self.e_norm, "e_level": self.e_level,
                "n_dirs": self.n_dirs, "seed": self.seed, "certified": True}


def verify_mp_geometry(problem: Problem, n_dirs: int = 64, rho_grid=None, seed: int | None = 0,
                       max_doublings: int = 60) -> MountainPassCertificate:
    """Sample the small-sphere lower bound ``beta`` and find a far point with negative energy."""
    if problem.lam >= 1.0:
        raise DomainError("mountain-pass geometry needs lam < 1")
    rng = np.random.default_rng(seed)
    dirs = _random_directions(problem, n_dirs, rng)
    rho_grid = _default_rho_grid() if rho_grid is None else np.asarray(rho_grid, dtype=float)
    best = (-math.inf, None, None)
    for rho in rho_grid:
        vals = [energy(problem, rho * d) for d in dirs]
        j = int(np.argmin(vals))
        if vals[j] > best[0]:
            best = (vals[j], float(rho), dirs[j])
    beta, rho, d_min = best
    if beta > 0:
        beta = min(beta, _sphere_minimum(problem, None, d_min, dirs, rho, rng))
    if not beta > 0:
        raise GeometryNotCertifiedError("no radius on the grid gives a positive sampled minimum")
    u0 = dirs[0]
    t = 1.0
    for _ in range(max_doublings):
        e = t * u0
        if problem.norm(e) > rho and energy(problem, e) < 0:
            return MountainPassCertificate(rho=rho, beta=beta, e=e, e_norm=problem.norm(e), e_level=energy(problem, e),
                                           n_dirs=n_dirs, seed=seed)
        t *= 2.0
    raise GeometryNotCertifiedError(f"energy along the constant ray stays >= 0 up to t={t:g}")


@dataclass(frozen=True)
class MountainPassOptions:
    tol: float = 1e-8
    max_iter: int = 2000
    path_points: int = 40
    switch_tol: float = 1e-2
    path_bump: float = 0.05
    step: float = 1.0
    nontrivial_floor: float = 1e-3
    n_dirs: int = 64
    seed: int | None = 0
    newton: NewtonOptions = NewtonOptions(tol=1e-10)


def _redistribute(problem: Problem, pts):
    """Evenly spaced points (in energy-norm arclength) along the polyline ``pts``, endpoints kept."""
    if len(pts) < 3:
        return list(pts)
    seg = np.array([problem.norm(b - a) for a, b in zip(pts[:-1], pts[1:])])
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0:
        return list(pts)
    new = [pts[0]]
    for tval in np.linspace(0.0, s[-1], len(pts))[1:-1]:
        k = min(int(np.searchsorted(s, tval, side="right")) - 1, len(pts) - 2)
        w = (tval - s[k]) / seg[k] if seg[k] > 0 else 0.0
        new.append((1.0 - w) * pts[k] + w * pts[k + 1])
    new.append(pts[-1])
    return new


def _initial_path(problem: Problem, e, P, rng, bump):
    v = np.zeros(problem.n)
    v[problem.free] = rng.standard_normal(problem.free.size)
    # smooth the random bump with the inverse energy operator
    v = problem.riesz(problem.matrices.M @ v)
    v *= bump * problem.norm(e) / max(problem.norm(v), 1e-300)
    return [k / P * e + math.sin(math.pi * k / P) * v for k in range(P + 1)]


def solve_mountain_pass(problem: Problem, opts: MountainPassOptions | None = None,
                        certificate: MountainPassCertificate | None = None) -> Solution:
    """Path-deformation mountain-pass search between 0 and a negative-energy point.

    Every sweep relaxes all interior path points along the energy-norm
    gradient with the path tangent projected out; the current maximum
    instead climbs along the tangent, so it converges to the saddle on the
    lowest path.  The path is then re-spaced on each side of the maximum.
    Once the gradient norm at the maximum drops below ``switch_tol`` Newton
    polishes it to ``tol``; on failure the threshold is tightened and the
    sweeps resume.
    """
    opts = opts or MountainPassOptions()
    if certificate is None:
        try:
            certificate = verify_mp_geometry(problem, n_dirs=opts.n_dirs, seed=opts.seed)
        except GeometryNotCertifiedError as exc:
            raise DegeneratePathError(f"no mountain-pass path: {exc}") from exc
    P = opts.path_points
    rng = np.random.default_rng(opts.seed)
    path = _initial_path(problem, certificate.e, P, rng, opts.path_bump)
    trace = []
    switch = opts.switch_tol
    step = opts.step
    prev_gnorm = math.inf
    for it in range(1, opts.max_iter + 1):
        levels = [energy(problem, z) for z in path]
        k = 1 + int(np.argmax(levels[1:-1]))
        z = path[k]
        g = gradient(problem, z)
        w = problem.riesz(g)
        gnorm = math.sqrt(max(float(g @ w), 0.0))
        trace.append({"iter": it, "stage": "path", "level": levels[k], "gradient_norm": gnorm,
                      "residual": residual(problem, z, g), "index": k})
        if problem.norm(z) < opts.nontrivial_floor or levels[k] <= 0.0:
            raise DegeneratePathError("path maximum collapsed to the trivial critical point", trace)
        if gnorm <= switch:
            try:
                polished = newton_solve(problem, z, opts.newton)
            except NonConvergenceError as exc:
                log.debug("Newton polish failed (%s); tightening the switch threshold", exc)
                switch *= 0.01
            else:
                for row in polished.trace[1:]:
                    trace.append({"iter": it, "stage": "newton", "level": row["level"],
                                  "gradient_norm": float("nan"), "residual": row["residual"], "index": k})
                u = polished.u
                if problem.norm(u) < opts.nontrivial_floor:
                    raise DegeneratePathError("Newton polish collapsed to the trivial critical point", trace)
                index = morse_index(problem, u)
                if index > 1:
                    log.debug("polished point has Morse index %d; resuming path sweeps", index)
                    switch = min(switch, gnorm) * 0.1
                    continue
                path[k] = u
                levels[k] = energy(problem, u)
                cert = certificate.to_dict()
                cert.update({"path_max": max(levels), "path_points": P, "morse_index": index, "path_max_before_polish": trace[-1]["level"]})
                return Solution(u=u, level=levels[k], residual=residual(problem, u), iterations=it,
                                kind="mountain_pass", certificate=cert, trace=trace, norm=problem.norm(u))
        if gnorm > 2.0 * prev_gnorm and step > 1e-3:
            step *= 0.5
        prev_gnorm = gnorm
        new_path = [path[0]]
        for j in range(1, P):
            wj = w if j == k else problem.riesz(gradient(problem, path[j]))
            tangent = path[j + 1] - path[j - 1]
            tn = problem.norm(tangent)
            along = 0.0
            if tn > 0:
                tangent = tangent / tn
                along = float(tangent @ problem.Q @ wj)
            # tangential component removed; the maximum moves uphill along the path instead
            direction = wj - (2.0 if j == k else 1.0) * along * tangent
            # Q >= M bounds the preconditioned Hessian by 1 + |lam| + max f'(u)
            stiff = 1.0 + abs(problem.lam) + float(np.max(np.abs(problem.nl.df(path[j]))))
            new_path.append(path[j] - (step / stiff) * direction)
        new_path.append(path[-1])
        path = _redistribute(problem, new_path[: k + 1])[:-1] + _redistribute(problem, new_path[k:])
    raise NonConvergenceError(f"mountain-pass iteration did not converge in {opts.max_iter} steps", trace)


# ------------------------------------------------------------------------ linking


@dataclass
class LinkingCertificate:
    index: int
    rho: float
    beta: float
    R: float
    e: np.ndarray
    face_max: dict
    n_samples: int
    seed: int | None

    def to_dict(self) -> dict:
        return {"index": self.index, "rho": self.rho, "beta": self.beta, "R": self.R, "face_max": self.face_max,
                "n_samples": self.n_samples, "seed": self.seed, "certified": True}


def _check_linking_range(problem: Problem, i: int):
    eig = problem.eig
    if eig.k < i + 1:
        raise DomainError(f"need at least {i + 1} eigenpairs, have {eig.k}")
    lam_k = eig.lambdas
    if not lam_k[i - 1] - LOCATE_RTOL * max(abs(lam_k[i - 1]), 1.0) <= problem.lam < lam_k[i]:
        raise DomainError(f"lam={problem.lam} is not in [lambda_{i}, lambda_{i + 1}) = [{lam_k[i - 1]}, {lam_k[i]})")
    return eig


def _sample_face_points(problem, basis, e, R, n, rng):
    """Points of the boundary of {v in H_i, ||v|| <= R} + {t e : 0 <= t <= R}, grouped by face."""
    def rand_h(radius):
        c = rng.standard_normal(basis.shape[1])
        v = basis @ c
        nv = problem.norm(v)
        return v * (radius / nv) if nv > 0 else v

    unit_dirs = [basis[:, j] / problem.norm(basis[:, j]) for j in range(basis.shape[1])]
    unit_dirs += [-d for d in unit_dirs]
    radii = np.linspace(0.0, 1.0, 9)[1:]
    bottom, top, side = [], [], []
    for d in unit_dirs:
        for a in radii:
            bottom.append(a * R * d)
            top.append(a * R * d + R * e)
        for t in np.linspace(0.0, R, 9):
            side.append(R * d + t * e)
    top.append(R * e)
    for _ in range(n):
        a = rng.uniform()
        bottom.append(rand_h(a * R))
        top.append(rand_h(a * R) + R * e)
        side.append(rand_h(R) + rng.uniform(0.0, R) * e)
    return {"bottom": bottom, "top": top, "side": side}


def _sphere_descent(problem: Problem, sp, d, rho, iters: int = 200) -> float:
    """Lower the sampled minimum of the energy on the rho-sphere
    by projected gradient descent from direction ``d``.

    ``sp`` is a :class:`Splitting` whose complement constrains the search, or
    ``None`` for the whole space.
    """
    project = (lambda v: v) if sp is None else sp.project_complement
    u = rho * _unit(problem, project(d))
    return _sphere_walk(problem, project, u, rho, iters)


def _sphere_minimum(problem: Problem, sp, d, dirs, rho, rng, n_starts: int = 4, kick: float = 0.2) -> float:
    """Best of the descent from ``d`` and from ``n_starts`` random kicks of it
    (a symmetric ``d`` can be stationary on the sphere without being a minimum)."""
    best = _sphere_descent(problem, sp, d, rho)
    for j in rng.choice(len(dirs), size=min(n_starts, len(dirs)), replace=False):
        best = min(best, _sphere_descent(problem, sp, d + kick * dirs[j], rho))
    return best


def _sphere_walk(problem: Problem, project, u, rho, iters):
    level = energy(problem, u)
    step = 1.0
    for _ in range(iters):
        w = project(problem.riesz(gradient(problem, u)))
        w -= (float(w @ problem.Q @ u) / rho**2) * u
        if problem.norm(w) <= 1e-12 * rho:
            break
        while step > 1e-8:
            cand = rho * _unit(problem, u - step * w)
            c_level = energy(problem, cand)
            if c_level < level:
                u, level = cand, c_level
                step = min(2.0 * step, 1.0)
                break
            step *= 0.5
        else:
            break
    return level


def verify_linking_geometry(problem: Problem, i: int, n_samples: int = 64, rho_grid=None, seed: int | None = 0,
                            max_doublings: int = 40) -> LinkingCertificate:
    """Sampled linking certificate for ``lam`` in ``[lambda_i, lambda_{i+1})``.

    Positivity is sampled on a sphere of the complement of the first ``i``
    eigenvectors; nonpositivity on the boundary of the cylinder over the
    first ``i`` eigenvectors in the direction of eigenvector ``i + 1``.
    """
    eig = _check_linking_range(problem, i)
    rng = np.random.default_rng(seed)
    sp = split(eig, i)
    comp = sp.complement_basis
    lam_c = eig.lambdas[i:]
    dirs = [comp[:, 0]]
    for j in range(n_samples):
        c = rng.standard_normal(comp.shape[1])
        if j % 2:
            c = c / np.sqrt(lam_c)  # favour the smooth end of the complement
        dirs.append(comp @ c)
    dirs = [_unit(problem, d) for d in dirs]
    rho_grid = _default_rho_grid() if rho_grid is None else np.asarray(rho_grid, dtype=float)
    best = (-math.inf, None, None)
    for rho in rho_grid:
        vals = [energy(problem, rho * d) for d in dirs]
        j = int(np.argmin(vals))
        if vals[j] > best[0]:
            best = (vals[j], float(rho), dirs[j])
    beta, rho, d_min = best
    if beta > 0:
        beta = min(beta, _sphere_minimum(problem, sp, d_min, dirs, rho, rng))
    if not beta > 0:
        raise GeometryNotCertifiedError(
            "sampled energy on the complement sphere is not positive (lam too close to the next eigenvalue?)")

    e = comp[:, 0]  # L2-normalised eigenvector i+1
    R = max(2.0 * rho, 1.0)
    for _ in range(max_doublings):
        faces = _sample_face_points(problem, sp.basis, e, R, n_samples, rng)
        face_max = {name: max(energy(problem, v) for v in pts) for name, pts in faces.items()}
        if all(val <= 0.0 for val in face_max.values()) and R > rho:
            return LinkingCertificate(index=i, rho=rho, beta=beta, R=R, e=e, face_max=face_max,
                                      n_samples=n_samples, seed=seed)
        R *= 2.0
    raise GeometryNotCertifiedError(f"energy on the linking boundary is still positive at R={R:g}")


@dataclass(frozen=True)
class LinkingOptions:
    tol: float = 1e-8
    seeds: int = 8
    seed_scales: tuple = (0.5, 1.0, 2.0, 4.0)
    perturbation: float = 0.05
    nontrivial_floor: float = 1e-3
    n_samples: int = 64
    seed: int | None = 0
    newton: NewtonOptions = NewtonOptions(tol=1e-10, max_iter=60)
    deflation_power: float = 2.0
    deflation_shift: float = 1.0


def _scale_for(problem: Problem, e):
    """Amplitude at which the seed ``t e`` balances the quadratic and nonlinear parts."""
    quad = float(e @ problem.H0 @ e)
    nonlin = float(problem.load_f(e) @ e)
    if quad > 0 and nonlin > 0:
        return math.sqrt(quad / nonlin) if problem.nl.p == 4 else (quad / nonlin) ** (1.0 / (problem.nl.p - 2.0))
    return 1.0


def solve_linking(problem: Problem, i: int, opts: LinkingOptions | None = None,
                  certificate: LinkingCertificate | None = None, known_roots=None) -> Solution:
    """Deflated Newton search for a nontrivial critical point in the linking regime.

    Seeds are ``t e_{i+1}`` plus small random components in the span of the
    first ``i`` eigenvectors.  The trivial solution and ``known_roots`` are
    deflated.  Among converged nontrivial roots with level at least the
    certified ``beta`` the one with the lowest level (then lowest seed
    index) is returned.
    """
    opts = opts or LinkingOptions()
    if certificate is None:
        certificate = verify_linking_geometry(problem, i, n_samples=opts.n_samples, seed=opts.seed)
    eig = problem.eig
    sp = split(eig, i)
    e = sp.complement_basis[:, 0]
    base = _scale_for(problem, e)
    rng = np.random.default_rng(opts.seed)
    seeds = []
    for j in range(opts.seeds):
        t = base * opts.seed_scales[j % len(opts.seed_scales)] * (1 if (j // len(opts.seed_scales)) % 2 == 0 else -1)
        pert = sp.basis @ rng.standard_normal(i) if j else np.zeros(problem.n)
        seeds.append(t * e + opts.perturbation * abs(t) * pert)
    deflation = Deflation(roots=[problem.zeros()] + [np.asarray(r, dtype=float) for r in (known_roots or [])],
                          power=opts.deflation_power, shift=opts.deflation_shift)
    found = []
    trace = []
    for j, u0 in enumerate(seeds):
        try:
            sol = newton_solve(problem, u0, opts.newton, deflation=deflation)
        except NonConvergenceError as exc:
            trace.append({"seed": j, "status": "failed", "reason": str(exc), "iterations": len(exc.trace)})
            continue
        status = "converged"
        if sol.norm < opts.nontrivial_floor:
            status = "trivial"
        elif sol.level < certificate.beta - opts.tol:
            status = "below_beta"
        trace.append({"seed": j, "status": status, "level": sol.level, "residual": sol.residual,
                      "iterations": sol.iterations, "anorm": sol.norm})
        deflation.roots.append(sol.u.copy())
        if status == "converged":
            found.append((sol.level, j, sol))
    if not found:
        raise NonConvergenceError("no seed converged to a nontrivial critical point above beta", trace)
    found.sort(key=lambda item: (item[0], item[1]))
    level, j, sol = found[0]
    cert = certificate.to_dict()
    cert.update({"seed_index": j, "roots_found": len(found)})
    return Solution(u=sol.u, level=level, residual=sol.residual, iterations=sol.iterations, kind="linking",
                    certificate=cert, trace=trace, norm=sol.norm)
