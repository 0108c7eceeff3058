"""Piecewise-linear discretisation of the mixed local/nonlocal Neumann form in 1D.

The mesh covers ``[-R, R]``: a uniform interior part on ``omega`` and a graded
exterior collar on each side.  Three matrices are assembled on all nodes:

* ``M``  mass matrix of L2(omega) (exterior cells contribute nothing),
* ``K``  stiffness matrix of the gradient term on omega,
* ``B``  the measure-weighted Gagliardo form over all pairs of points except
  exterior x exterior, with the tail beyond ``|x| = R`` dropped.

Element pairs of ``B`` are integrated in three ways: same-cell pairs in
closed form, node-sharing pairs by a Duffy split whose radial integral is
exact, and disjoint pairs by tensor Gauss-Legendre with panel refinement
chosen from a Bernstein-ellipse error estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.sparse import coo_matrix

from .exceptions import AssemblyError, DegenerateMeasureError, DomainError
from .measure import SpectralMeasure, cns_constant

__all__ = [
    "Mesh1D",
    "QuadratureOptions",
    "OperatorMatrices",
    "build_mesh",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_gagliardo",
    "assemble",
    "anorm",
    "interpolate",
    "kernel_moments",
    "extension",
    "neumann_residual",
    "dump_matrices",
]


@dataclass(frozen=True)
class Mesh1D:
    nodes: np.ndarray
    x_l: float
    x_r: float
    R: float
    n_in: int
    n_ext: int
    grading: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def n_cells(self) -> int:
        return self.nodes.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def interior_dofs(self) -> np.ndarray:
        return np.arange(self.n_ext, self.n_ext + self.n_in + 1)

    @property
    def exterior_dofs(self) -> np.ndarray:
        return np.concatenate([np.arange(self.n_ext), np.arange(self.n_ext + self.n_in + 1, self.n_nodes)])

    @property
    def interior_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.interior_dofs] = True
        return mask

    @property
    def cell_is_interior(self) -> np.ndarray:
        flags = np.zeros(self.n_cells, dtype=bool)
        flags[self.n_ext:self.n_ext + self.n_in] = True
        return flags

    @property
    def omega_length(self) -> float:
        return self.x_r - self.x_l


@dataclass(frozen=True)
class QuadratureOptions:
    near_singular_subdivisions: int = 6
    far_field_order: int = 4
    tol: float = 1e-10

    def __post_init__(self):
        if self.near_singular_subdivisions < 1:
            raise DomainError("near_singular_subdivisions must be >= 1")
        if self.far_field_order < 2:
            raise DomainError("far_field_order must be >= 2")
        if not (0.0 < self.tol <= 1e-2):
            raise DomainError("quadrature tolerance must lie in (0, 1e-2]")


@dataclass(frozen=True)
class OperatorMatrices:
    M: np.ndarray
    K: np.ndarray
    B: np.ndarray
    alpha: float
    mesh: Mesh1D
    measure: SpectralMeasure = field(default_factory=SpectralMeasure)

    @property
    def operator(self) -> np.ndarray:
        """``alpha K + B``: the bilinear form of the operator without the L2 part."""
        return self.alpha * self.K + self.B

    @property
    def norm_matrix(self) -> np.ndarray:
        return self.M + self.alpha * self.K + self.B

    @property
    def free_dofs(self) -> np.ndarray:
        """DOFs that carry unknowns; exterior nodes are decoupled when the measure vanishes."""
        if self.measure.is_zero:
            return self.mesh.interior_dofs
        return np.arange(self.mesh.n_nodes)


# --------------------------------------------------------------------------- mesh


def _grading_ratio(h_first: float, length: float, n: int) -> float:
    """Ratio ``r`` with ``h_first * (1 + r + ... + r^(n-1)) = length``."""
    if n == 1 or h_first * n >= length:
        return 1.0

    def excess(r):
        return h_first * (r**n - 1.0) / (r - 1.0) - length

    hi = 2.0
    while excess(hi) < 0:
        hi *= 2.0
    return brentq(excess, 1.0 + 1e-12, hi, xtol=1e-14)


def _collar(length: float, n: int, ratio: float) -> np.ndarray:
    """Cumulative offsets ``0 < ... < length`` of a geometric collar of ``n`` cells."""
    if ratio == 1.0:
        return np.linspace(0.0, length, n + 1)[1:]
    sizes = ratio ** np.arange(n)
    offsets = np.cumsum(sizes) / sizes.sum() * length
    offsets[-1] = length
    return offsets


def build_mesh(omega, R, n_in, n_ext, grading="auto") -> Mesh1D:
    """Interior cells of equal width plus ``n_ext`` geometrically graded cells per side.

    ``grading="auto"`` picks the ratio so the first collar cell matches the
    interior width; a number fixes the ratio.
    """
    x_l, x_r = (float(v) for v in omega)
    if not x_l < x_r:
        raise DomainError("omega must be an interval (x_l, x_r) with x_l < x_r")
    R = float(R)
    if not R > max(abs(x_l), abs(x_r)):
        raise DomainError(f"collar radius R={R} must exceed max(|x_l|, |x_r|)")
    if int(n_in) != n_in or n_in < 2:
        raise DomainError("n_in must be an integer >= 2")
    if int(n_ext) != n_ext or n_ext < 1:
        raise DomainError("n_ext must be an integer >= 1")
    n_in, n_ext = int(n_in), int(n_ext)
    h = (x_r - x_l) / n_in
    left_len, right_len = x_l + R, R - x_r
    if grading == "auto":
        ratio_l = _grading_ratio(h, left_len, n_ext)
        ratio_r = _grading_ratio(h, right_len, n_ext)
        ratio = max(ratio_l, ratio_r)
    else:
        ratio = ratio_l = ratio_r = float(grading)
        if ratio < 1.0:
            raise DomainError("grading ratio must be >= 1")
    interior = np.linspace(x_l, x_r, n_in + 1)
    left = (x_l - _collar(left_len, n_ext, ratio_l))[::-1]
    right = x_r + _collar(right_len, n_ext, ratio_r)
    left[0], right[-1] = -R, R
    nodes = np.concatenate([left, interior, right])
    if np.any(np.diff(nodes) <= 0):
        raise DomainError("mesh nodes are not strictly increasing")
    return Mesh1D(nodes=nodes, x_l=x_l, x_r=x_r, R=R, n_in=n_in, n_ext=n_ext, grading=ratio)


# ------------------------------------------------------------------- local terms


def _scatter(n, rows, cols, vals) -> np.ndarray:
    mat = coo_matrix((np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=(n, n)).toarray()
    return 0.5 * (mat + mat.T)


def assemble_mass(mesh: Mesh1D) -> np.ndarray:
    cells = np.flatnonzero(mesh.cell_is_interior)
    h = mesh.widths[cells]
    local = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    dofs = np.stack([cells, cells + 1], axis=1)
    rows = np.repeat(dofs[:, :, None], 2, axis=2)
    cols = np.repeat(dofs[:, None, :], 2, axis=1)
    return _scatter(mesh.n_nodes, rows, cols, h[:, None, None] * local)


def assemble_stiffness(mesh: Mesh1D) -> np.ndarray:
    cells = np.flatnonzero(mesh.cell_is_interior)
    h = mesh.widths[cells]
    local = np.array([[1.0, -1.0], [-1.0, 1.0]])
    dofs = np.stack([cells, cells + 1], axis=1)
    rows = np.repeat(dofs[:, :, None], 2, axis=2)
    cols = np.repeat(dofs[:, None, :], 2, axis=1)
    return _scatter(mesh.n_nodes, rows, cols, local / h[:, None, None])


def _bernstein_rho(dist_ratio):
    """Bernstein-ellipse parameter for a singularity at ``dist_ratio`` interval lengths away."""
    z = 1.0 + 2.0 * np.asarray(dist_ratio, dtype=float)
    return z + np.sqrt(z * z - 1.0)


def _target_ratio(order, tol):
    """Distance/length ratio at which an ``order``-point Gauss panel meets ``tol``."""
    rho = tol ** (-1.0 / (2.0 * order))
    return 0.5 * (0.5 * (rho + 1.0 / rho) - 1.0)


def _graded_breaks(dist, order, tol, cap):
    """Panel breakpoints on [0, 1], measured from the end nearest the singularity.

    ``dist`` is the distance of the singularity beyond that end (relative to
    the unit interval).  Panels grow geometrically so that each one sees the
    singularity at least ``_target_ratio`` of its length away; at most ``cap``
    panels are used.  Returns ``(breaks, m, est)`` with ``breaks`` of shape
    ``(P, cap + 1)`` padded with 1.0, panel counts ``m`` and the error estimate.
    """
    dist = np.asarray(dist, dtype=float)
    tau = _target_ratio(order, tol)
    breaks = np.ones((dist.size, cap + 1))
    breaks[:, 0] = 0.0
    m = np.full(dist.size, cap, dtype=int)
    done = np.zeros(dist.size, dtype=bool)
    for k in range(cap):
        step = breaks[:, k] + (dist + breaks[:, k]) / tau
        last = (step >= 1.0) | (k == cap - 1)
        newly = last & ~done
        m[newly] = k + 1
        breaks[:, k + 1] = np.where(done | last, 1.0, step)
        done |= last
    lo = breaks[np.arange(dist.size), m - 1]
    est = _bernstein_rho((dist + lo) / (1.0 - lo)) ** (-2.0 * order)
    return breaks, m, est


def _graded_rule(breaks, m, order, near_end_at_one=False):
    """Composite Gauss nodes/weights ``(P, m*order)`` from per-row breakpoints."""
    x, w = _gauss01(order)
    lo, hi = breaks[:, :m], breaks[:, 1:m + 1]
    t = (lo[:, :, None] + (hi - lo)[:, :, None] * x[None, None, :]).reshape(len(breaks), -1)
    wt = ((hi - lo)[:, :, None] * w[None, None, :]).reshape(len(breaks), -1)
    if near_end_at_one:
        t = 1.0 - t
    return t, wt


def _gauss01(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _same_cell(mesh: Mesh1D, s: float):
    cells = np.flatnonzero(mesh.cell_is_interior)
    h = mesh.widths[cells]
    # int_0^h int_0^h |x-y|^(1-2s) dx dy, times the squared P1 slopes
    integral = 2.0 * h ** (3.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s))
    local = np.array([[1.0, -1.0], [-1.0, 1.0]])
    dofs = np.stack([cells, cells + 1], axis=1)
    rows = np.repeat(dofs[:, :, None], 2, axis=2)
    cols = np.repeat(dofs[:, None, :], 2, axis=1)
    return rows, cols, (integral / h**2)[:, None, None] * local


def _adjacent_pairs(mesh: Mesh1D, s: float, quad: QuadratureOptions):
    inside = mesh.cell_is_interior
    first = np.flatnonzero(inside[:-1] | inside[1:])
    h1 = mesh.widths[first]
    h2 = mesh.widths[first + 1]
    order = quad.far_field_order
    cap = quad.near_singular_subdivisions
    q = 1.0 + 2.0 * s
    vals = np.zeros((first.size, 3, 3))
    worst = (0.0, None)
    # two Duffy triangles; singular point of the t-integrand sits at -h1/h2 (resp. -h2/h1)
    for near, far, diff in (
        (h1, h2, lambda t: np.stack([np.ones_like(t), t - 1.0, -t])),
        (h2, h1, lambda t: np.stack([t, 1.0 - t, -np.ones_like(t)])),
    ):
        breaks, m, est = _graded_breaks(near / far, order, quad.tol, cap)
        k = int(np.argmax(est))
        if est[k] > worst[0]:
            worst = (float(est[k]), (int(first[k]), int(first[k]) + 1))
        for mm in np.unique(m):
            sel = np.flatnonzero(m == mm)
            t, w = _graded_rule(breaks[sel], int(mm), order)
            d = diff(t)  # (3, P, nt)
            denom = (near[sel, None] + far[sel, None] * t) ** (-q)
            vals[sel] += np.einsum("ipt,jpt,pt->pij", d, d, denom * w)
    vals *= (2.0 * h1 * h2 / (3.0 - 2.0 * s))[:, None, None]
    dofs = np.stack([first, first + 1, first + 2], axis=1)
    rows = np.repeat(dofs[:, :, None], 3, axis=2)
    cols = np.repeat(dofs[:, None, :], 3, axis=1)
    return rows, cols, vals, worst


def _disjoint_pairs(mesh: Mesh1D):
    inside = mesh.cell_is_interior
    nc = mesh.n_cells
    E, F = np.triu_indices(nc, k=2)
    keep = inside[E] | inside[F]
    return E[keep], F[keep]


def _disjoint_contrib(mesh: Mesh1D, s_list, weights, quad: QuadratureOptions):
    E, F = _disjoint_pairs(mesh)
    a, h = mesh.nodes[:-1], mesh.widths
    gap = a[F] - (a[E] + h[E])
    order, cap = quad.far_field_order, quad.near_singular_subdivisions
    # each cell is graded toward the other one; the kernel singularity is `gap` away
    bE, mE, estE = _graded_breaks(gap / h[E], order, quad.tol, cap)
    bF, mF, estF = _graded_breaks(gap / h[F], order, quad.tol, cap)
    est = np.maximum(estE, estF)
    worst = (0.0, None)
    if est.size:
        k = int(np.argmax(est))
        worst = (float(est[k]), (int(E[k]), int(F[k])))
    vals = np.zeros((E.size, 4, 4))
    for me, mf in np.unique(np.stack([mE, mF], axis=1), axis=0):
        sel = np.flatnonzero((mE == me) & (mF == mf))
        tx, wxr = _graded_rule(bE[sel], int(me), order, near_end_at_one=True)
        ty, wyr = _graded_rule(bF[sel], int(mf), order)
        x = a[E[sel], None] + h[E[sel], None] * tx
        y = a[F[sel], None] + h[F[sel], None] * ty
        wx = h[E[sel], None] * wxr
        wy = h[F[sel], None] * wyr
        # D_i(x, y) = phi_i(x) - phi_i(y); dofs of E live in x only, dofs of F in y only
        phx = np.stack([1.0 - tx, tx])  # (2, P, nx)
        phy = np.stack([1.0 - ty, ty])
        dist = y[:, None, :] - x[:, :, None]
        for s, c in zip(s_list, weights):
            ker = c * dist ** (-1.0 - 2.0 * s) * wx[:, :, None] * wy[:, None, :]
            vals[sel, :2, :2] += np.einsum("ipx,jpx,px->pij", phx, phx, ker.sum(axis=2))
            vals[sel, 2:, 2:] += np.einsum("ipy,jpy,py->pij", phy, phy, ker.sum(axis=1))
            cross = -np.einsum("ipx,jpy,pxy->pij", phx, phy, ker)
            vals[sel, :2, 2:] += cross
            vals[sel, 2:, :2] += np.transpose(cross, (0, 2, 1))
    vals *= 2.0  # both orderings (E, F) and (F, E) lie in the integration set
    dofs = np.stack([E, E + 1, F, F + 1], axis=1)
    rows = np.repeat(dofs[:, :, None], 4, axis=2)
    cols = np.repeat(dofs[:, None, :], 4, axis=1)
    return rows, cols, vals, worst


def assemble_gagliardo(mesh: Mesh1D, measure: SpectralMeasure, quad: QuadratureOptions | None = None) -> np.ndarray:
    """Measure-weighted Gagliardo matrix ``sum_k c_k c_{1,s_k}/2 G(s_k)``."""
    quad = quad or QuadratureOptions()
    n = mesh.n_nodes
    if measure.is_zero:
        return np.zeros((n, n))
    s_list = list(measure.orders)
    weights = [c * cns_constant(1, s) / 2.0 for s, c in measure.atoms]
    rows, cols, vals = [], [], []
    worst = (0.0, None)
    for s, wgt in zip(s_list, weights):
        r, c, v = _same_cell(mesh, s)
        rows.append(r), cols.append(c), vals.append(wgt * v)
        r, c, v, wst = _adjacent_pairs(mesh, s, quad)
        rows.append(r), cols.append(c), vals.append(wgt * v)
        worst = max(worst, wst, key=lambda p: p[0])
    r, c, v, wst = _disjoint_contrib(mesh, s_list, weights, quad)
    rows.append(r), cols.append(c), vals.append(v)
    worst = max(worst, wst, key=lambda p: p[0])
    if worst[0] > quad.tol:
        raise AssemblyError(
            f"quadrature error estimate {worst[0]:.3g} exceeds tol={quad.tol:g} "
            f"with {quad.near_singular_subdivisions} subdivisions; worst cell pair {worst[1]}",
            worst_pair=worst[1],
        )
    return _scatter(n, np.concatenate([x.ravel() for x in rows]),
                    np.concatenate([x.ravel() for x in cols]),
                    np.concatenate([x.ravel() for x in vals]))


def assemble(mesh: Mesh1D, measure: SpectralMeasure, alpha: float, quad: QuadratureOptions | None = None) -> OperatorMatrices:
    if alpha < 0:
        raise DomainError("alpha must be >= 0")
    return OperatorMatrices(
        M=assemble_mass(mesh),
        K=assemble_stiffness(mesh),
        B=assemble_gagliardo(mesh, measure, quad),
        alpha=float(alpha),
        mesh=mesh,
        measure=measure,
    )


def anorm(u, matrices: OperatorMatrices) -> float:
    u = np.asarray(u, dtype=float)
    return math.sqrt(max(float(u @ matrices.norm_matrix @ u), 0.0))


# ------------------------------------------------------- exterior point integrals


def _power_integral(r0, r1, e):
    """``int_{r0}^{r1} r^(e-1) dr``, stable as ``e -> 0`` (where it becomes a log)."""
    r0 = np.asarray(r0, dtype=float)
    r1 = np.asarray(r1, dtype=float)
    log_ratio = np.log(r1 / r0)
    if abs(e) < 1e-300:
        return log_ratio
    return r0**e * np.expm1(e * log_ratio) / e


def interpolate(mesh: Mesh1D, u, x):
    """Evaluate the P1 interpolant of nodal values ``u`` at ``x`` (inside ``[-R, R]``)."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > mesh.R * (1 + 1e-14)):
        raise DomainError("point outside the meshed collar; supply its value explicitly")
    return np.interp(x, mesh.nodes, np.asarray(u, dtype=float))


def kernel_moments(mesh: Mesh1D, u_interior, x: float, s: float):
    """``(int_omega |x-y|^{-1-2s} dy, int_omega u_h(y) |x-y|^{-1-2s} dy)`` for ``x`` outside omega.

    Exact for the P1 interpolant ``u_h`` of the interior nodal values.
    """
    if mesh.x_l <= x <= mesh.x_r:
        raise DomainError(f"point {x} is not outside the closed domain")
    y = mesh.nodes[mesh.interior_dofs]
    u = np.asarray(u_interior, dtype=float)
    if u.shape != y.shape:
        raise DomainError(f"expected {y.size} interior values, got {u.shape}")
    y0, y1, u0, u1 = y[:-1], y[1:], u[:-1], u[1:]
    slope = (u1 - u0) / (y1 - y0)
    r0, r1 = np.abs(y0 - x), np.abs(y1 - x)
    lo, hi = np.minimum(r0, r1), np.maximum(r0, r1)
    sign = 1.0 if x < mesh.x_l else -1.0  # y = x + sign * r
    base = u0 + slope * (x - y0)  # value of the linear piece at y = x
    w0 = _power_integral(lo, hi, -2.0 * s)  # int r^{-1-2s}
    w1 = _power_integral(lo, hi, 1.0 - 2.0 * s)  # int r^{-2s}
    return math.fsum(w0), math.fsum(base * w0 + sign * slope * w1)


def _checked_measure(measure: SpectralMeasure):
    if measure.is_zero:
        raise DegenerateMeasureError("the exterior extension is undefined for a zero measure")
    return [(s, c * cns_constant(1, s)) for s, c in measure.atoms]


def extension(u_interior, points, measure: SpectralMeasure, mesh: Mesh1D) -> np.ndarray:
    """Exterior values that make the measure-averaged nonlocal normal derivative vanish.

    Each value is a kernel-weighted mean of the interior profile; the
    weights include the normalising constants so the result matches
    :func:`neumann_residual`.
    """
    atoms = _checked_measure(measure)
    out = []
    for x in np.atleast_1d(np.asarray(points, dtype=float)):
        num = den = 0.0
        for s, c in atoms:
            w0, wu = kernel_moments(mesh, u_interior, x, s)
            num += c * wu
            den += c * w0
        out.append(num / den)
    return np.array(out)


def neumann_residual(u, x: float, measure: SpectralMeasure, mesh: Mesh1D, value_at_x=None) -> float:
    """``int N_s u(x) dmu(s)`` at an exterior point ``x``.

    ``u`` holds values on all mesh nodes; ``u(x)`` comes from the P1
    interpolant unless ``value_at_x`` is given (required beyond the collar).
    """
    if mesh.x_l <= x <= mesh.x_r:
        raise DomainError(f"point {x} is not outside the closed domain")
    u = np.asarray(u, dtype=float)
    ux = float(interpolate(mesh, u, x)) if value_at_x is None else float(value_at_x)
    u_in = u[mesh.interior_dofs]
    total = []
    for s, c in measure.atoms:
        w0, wu = kernel_moments(mesh, u_in, x, s)
        total.append(c * cns_constant(1, s) * (ux * w0 - wu))
    return math.fsum(total)


def dump_matrices(matrices: OperatorMatrices, directory) -> list[Path]:
    """Write ``M``, ``K``, ``B`` as ``row col value`` text files (nonzeros only)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name in ("M", "K", "B"):
        mat = getattr(matrices, name)
        rows, cols = np.nonzero(mat)
        path = directory / f"{name}.coo"
        with open(path, "w") as fh:
            fh.write(f"# {mat.shape[0]} {mat.shape[1]} {rows.size}\n")
            for i, j in zip(rows, cols):
                fh.write(f"{i} {j} {mat[i, j]:.17g}\n")
        written.append(path)
    return written
