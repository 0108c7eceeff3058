"""scikit-learn style wrappers over the functional API.

Both estimators are configured entirely through constructor parameters
(so ``get_params``/``set_params``/``clone`` work) and expose their results
as trailing-underscore attributes after ``fit``.  There is no training
data: ``fit`` accepts and ignores ``X`` to stay pipeline compatible.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .discretization import QuadratureOptions, assemble, build_mesh, interpolate
from .measure import from_atoms
from .nonlinearity import PowerNonlinearity
from .pipeline import LAMBDA_1
from .solvers import (
    LinkingOptions,
    MountainPassOptions,
    Problem,
    solve_linking,
    solve_mountain_pass,
    verify_linking_geometry,
    verify_mp_geometry,
)
from .spectra import solve_eigen

__all__ = ["NeumannEigenmaps", "CriticalPointSolver"]


class _OperatorParams(BaseEstimator):
    def _assemble(self):
        mesh = build_mesh(tuple(self.omega), self.collar_R, self.n_in, self.n_ext)
        measure = from_atoms([tuple(a) for a in self.atoms])
        return assemble(mesh, measure, self.alpha, QuadratureOptions(tol=self.quad_tol))


class NeumannEigenmaps(TransformerMixin, _OperatorParams):
    """Lowest Neumann eigenpairs; transforms nodal vectors to eigen coefficients.

    Attributes after ``fit``: ``mesh_``, ``matrices_``, ``lambdas_tilde_``,
    ``lambdas_`` and ``components_`` (nodes x n_components, L2-orthonormal).
    """

    def __init__(self, omega=(-1.0, 1.0), collar_R=8.0, n_in=128, n_ext=32, atoms=((0.5, 1.0),), alpha=0.0,
                 n_components=8, method="schur", quad_tol=1e-10):
        self.omega = omega
        self.collar_R = collar_R
        self.n_in = n_in
        self.n_ext = n_ext
        self.atoms = atoms
        self.alpha = alpha
        self.n_components = n_components
        self.method = method
        self.quad_tol = quad_tol

    def fit(self, X=None, y=None):
        self.matrices_ = self._assemble()
        self.mesh_ = self.matrices_.mesh
        self.decomposition_ = solve_eigen(self.matrices_, k=self.n_components, method=self.method)
        self.lambdas_tilde_ = self.decomposition_.lambdas_tilde
        self.lambdas_ = self.decomposition_.lambdas
        self.components_ = self.decomposition_.vectors
        self.n_features_in_ = self.mesh_.n_nodes
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} nodal values per row, got {X.shape[1]}")
        return self.decomposition_.coefficients(X)

    def inverse_transform(self, C):
        check_is_fitted(self, "components_")
        return check_array(C) @ self.components_.T


class CriticalPointSolver(_OperatorParams):
    """Nontrivial critical point of the energy for ``f(t) = a |t|^(p-2) t``.

    The branch follows ``lam``: mountain pass below 1, linking at or above.
    ``predict(x)`` evaluates the computed solution at points of ``[-R, R]``.
    """

    def __init__(self, lam=0.0, a=1.0, p=4.0, omega=(-1.0, 1.0), collar_R=8.0, n_in=128, n_ext=32,
                 atoms=((0.5, 1.0),), alpha=0.0, tol=1e-8, seed=0, quad_tol=1e-10):
        self.lam = lam
        self.a = a
        self.p = p
        self.omega = omega
        self.collar_R = collar_R
        self.n_in = n_in
        self.n_ext = n_ext
        self.atoms = atoms
        self.alpha = alpha
        self.tol = tol
        self.seed = seed
        self.quad_tol = quad_tol

    def fit(self, X=None, y=None):
        matrices = self._assemble()
        problem = Problem(matrices, self.lam, PowerNonlinearity(self.a, self.p))
        if self.lam < LAMBDA_1:
            self.branch_ = "mountain_pass"
            cert = verify_mp_geometry(problem, seed=self.seed)
            sol = solve_mountain_pass(problem, MountainPassOptions(tol=self.tol, seed=self.seed), certificate=cert)
        else:
            self.branch_ = "linking"
            cert = verify_linking_geometry(problem, problem.eig.locate(self.lam), seed=self.seed)
            sol = solve_linking(problem, cert.index, LinkingOptions(tol=self.tol, seed=self.seed), certificate=cert)
        self.mesh_ = matrices.mesh
        self.certificate_ = cert.to_dict()
        self.solution_ = sol.u
        self.level_ = sol.level
        self.residual_ = sol.residual
        self.n_iter_ = sol.iterations
        return self

    def predict(self, x):
        check_is_fitted(self, "solution_")
        return interpolate(self.mesh_, self.solution_, np.asarray(x, dtype=float))
