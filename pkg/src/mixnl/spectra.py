"""Neumann eigenpairs of the discrete operator and the induced eigenspace splitting.

The L2 pairing lives on omega only, so exterior collar values carry no mass.
They are eliminated by static condensation: for fixed interior values the
energy is minimised over the collar, which is the discrete counterpart of
the exterior extension formula.  The remaining interior pencil is
symmetric definite and solved densely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .discretization import OperatorMatrices
from .exceptions import DegenerateOperatorError, DomainError, EigenSolverError

__all__ = ["EigenDecomposition", "Splitting", "solve_eigen", "split", "slaving_operator", "CLUSTER_RTOL", "LOCATE_RTOL"]

CLUSTER_RTOL = 1e-9
LOCATE_RTOL = 1e-8


@dataclass(frozen=True)
class EigenDecomposition:
    lambdas_tilde: np.ndarray
    vectors: np.ndarray  # (n_nodes, k), M-orthonormal on omega
    matrices: OperatorMatrices
    method: str = "schur"

    @property
    def lambdas(self) -> np.ndarray:
        return self.lambdas_tilde + 1.0

    @property
    def k(self) -> int:
        return self.lambdas_tilde.size

    def clusters(self, rtol: float = CLUSTER_RTOL) -> list[list[int]]:
        """Groups of 0-based indices whose eigenvalues agree within ``rtol``."""
        groups = [[0]] if self.k else []
        lam = self.lambdas
        for j in range(1, self.k):
            if abs(lam[j] - lam[j - 1]) <= rtol * max(abs(lam[j]), 1.0):
                groups[-1].append(j)
            else:
                groups.append([j])
        return groups

    def coefficients(self, u) -> np.ndarray:
        """M-inner products of ``u`` (rows) with the eigenvectors."""
        return np.asarray(u, dtype=float) @ self.matrices.M @ self.vectors

    def locate(self, lam: float, rtol: float = LOCATE_RTOL) -> int:
        """1-based ``i`` with ``lambda_i <= lam < lambda_{i+1}``.

        Eigenvalues within ``rtol`` above ``lam`` count as reached, so the
        exact value 1 locates ``i = 1`` despite round-off in the discrete one.
        """
        lam_k = self.lambdas
        reached = lam_k <= lam + rtol * np.maximum(np.abs(lam_k), 1.0)
        if not reached[0]:
            raise DomainError(f"lambda={lam} lies below lambda_1={lam_k[0]}")
        i = int(np.count_nonzero(reached))
        if i >= self.k:
            raise DomainError(f"lambda={lam} is not below the largest computed eigenvalue; request more pairs")
        return i


@dataclass(frozen=True)
class Splitting:
    index: int
    decomp: EigenDecomposition

    @property
    def basis(self) -> np.ndarray:
        return self.decomp.vectors[:, : self.index]

    @property
    def complement_basis(self) -> np.ndarray:
        return self.decomp.vectors[:, self.index:]

    def project(self, u) -> np.ndarray:
        """M-orthogonal projection onto the span of the first ``index`` eigenvectors."""
        u = np.asarray(u, dtype=float)
        coeff = u @ self.decomp.matrices.M @ self.basis
        return coeff @ self.basis.T

    def project_complement(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return u - self.project(u)


def slaving_operator(matrices: OperatorMatrices) -> np.ndarray | None:
    """Map interior nodal values to the energy-minimising collar values.

    Returns ``None`` when the measure vanishes (the collar is decoupled).
    """
    if matrices.measure.is_zero:
        return None
    mesh = matrices.mesh
    A = matrices.operator
    ii, ee = mesh.interior_dofs, mesh.exterior_dofs
    try:
        factor = linalg.cho_factor(A[np.ix_(ee, ee)])
    except linalg.LinAlgError as exc:
        raise EigenSolverError("exterior block of the operator is not positive definite") from exc
    return -linalg.cho_solve(factor, A[np.ix_(ee, ii)])


def _fix_signs(vectors: np.ndarray, M: np.ndarray) -> np.ndarray:
    means = np.ones(M.shape[0]) @ M @ vectors
    scale = np.max(np.abs(vectors), axis=0)
    for j in range(vectors.shape[1]):
        if abs(means[j]) > 1e-10 * scale[j]:
            flip = means[j] < 0
        else:
            nz = np.flatnonzero(np.abs(vectors[:, j]) > 1e-12 * scale[j])
            flip = vectors[nz[0], j] < 0
        if flip:
            vectors[:, j] *= -1.0
    return vectors


def solve_eigen(matrices: OperatorMatrices, k: int | None = None, method: str = "schur", reg: float = 1e-10) -> EigenDecomposition:
    """The ``k`` smallest Neumann eigenpairs ``(lambda_tilde, e)``.

    ``method="schur"`` condenses the collar exactly; ``method="regularized"``
    keeps every DOF and adds ``reg`` times the collar mass to the right-hand
    pencil (useful as a cross-check on small meshes).
    """
    mesh = matrices.mesh
    if matrices.alpha == 0 and matrices.measure.is_zero:
        raise DegenerateOperatorError("alpha = 0 with a zero measure leaves no operator")
    ii = mesh.interior_dofs
    n_int = ii.size
    k = n_int if k is None else int(k)
    if not 1 <= k <= n_int:
        raise DomainError(f"k must lie in [1, {n_int}]")
    A, M = matrices.operator, matrices.M
    if method == "schur":
        X = slaving_operator(matrices)
        S = A[np.ix_(ii, ii)]
        if X is not None:
            S = S + A[np.ix_(ii, mesh.exterior_dofs)] @ X
        S = 0.5 * (S + S.T)
        try:
            lam, v = linalg.eigh(S, M[np.ix_(ii, ii)], subset_by_index=[0, k - 1])
        except linalg.LinAlgError as exc:
            raise EigenSolverError(f"generalized eigensolver failed: {exc}") from exc
        vectors = np.zeros((mesh.n_nodes, k))
        vectors[ii] = v
        if X is not None:
            vectors[mesh.exterior_dofs] = X @ v
    elif method == "regularized":
        free = matrices.free_dofs
        collar = _collar_mass(mesh)
        rhs = M + reg * collar
        try:
            lam, v = linalg.eigh(A[np.ix_(free, free)], rhs[np.ix_(free, free)], subset_by_index=[0, k - 1])
        except linalg.LinAlgError as exc:
            raise EigenSolverError(f"regularized pencil is not definite: {exc}") from exc
        vectors = np.zeros((mesh.n_nodes, k))
        vectors[free] = v
        # renormalise in M alone (the regularisation slightly perturbs the scaling)
        vectors /= np.sqrt(np.einsum("ij,ik,kj->j", vectors, M, vectors))
    else:
        raise DomainError(f"unknown eigen method {method!r}")
    if not np.all(np.isfinite(lam)):
        raise EigenSolverError("non-finite eigenvalues")
    vectors = _fix_signs(vectors, M)
    return EigenDecomposition(lambdas_tilde=np.asarray(lam), vectors=vectors, matrices=matrices, method=method)


def _collar_mass(mesh) -> np.ndarray:
    n = mesh.n_nodes
    out = np.zeros((n, n))
    for c in np.flatnonzero(~mesh.cell_is_interior):
        h = mesh.widths[c]
        out[c:c + 2, c:c + 2] += h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    return out


def split(decomp: EigenDecomposition, i: int) -> Splitting:
    """Split at index ``i`` (1-based): the first ``i`` eigenvectors span the lower part."""
    if int(i) != i or not 1 <= i < decomp.k:
        raise DomainError(f"split index {i} must lie in [1, {decomp.k - 1}]")
    for group in decomp.clusters():
        if (i - 1) in group and i in group:
            raise DomainError(f"split index {i} cuts through the eigenvalue cluster {[g + 1 for g in group]}")
    return Splitting(index=int(i), decomp=decomp)
