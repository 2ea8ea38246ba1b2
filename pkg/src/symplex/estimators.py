"""scikit-learn style wrappers around the solvers."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import linesearch as ls
from .exceptions import LineSearchExhausted
from .operators import ADMMResolvent, CompositeProblem, duality_gap, zero_map
from .problems import LassoData, make_matrix_game
from .symplectic import SymplecticConfig, sfbs_step, speg_step, symplectic_init


class SymplecticLasso(RegressorMixin, BaseEstimator):
    """LASSO ``1/2||Xw - y||^2 + alpha||w||_1`` solved by accelerated ADMM (no intercept)."""

    def __init__(self, alpha=0.1, r=2.0, D=1.6, max_iter=5000, tol=1e-8):
        self.alpha = alpha
        self.r = r
        self.D = D
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        g = ADMMResolvent(X, y, self.alpha)
        problem = CompositeProblem(f=zero_map(X.shape[1]), dim=X.shape[1], g=g, name="lasso",
                                   data={"lasso": LassoData(X, y, self.alpha)})
        policy = ls.LineSearchPolicy()
        state = ls.linesearch_init(symplectic_init(None, np.zeros(X.shape[1])), 1.0, 0.0)
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            try:
                state = ls.admm_accel_step(state, problem, policy, self.r, self.D)
            except LineSearchExhausted:
                state = ls.restart_policy(state)
                continue
            if np.linalg.norm(state.residual) <= self.tol:
                break
        x, w = g.split(state.resolvent_arg)
        self.coef_ = w
        self.n_iter_ = n_iter
        self.split_residual_ = float(np.linalg.norm(x - w))
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return check_array(X) @ self.coef_


class MatrixGameSolver(BaseEstimator):
    """Equilibrium of ``min_x max_y x^T A y`` over simplices by SPEG+."""

    def __init__(self, r=2.0, D=None, max_iter=5000, tol=1e-8):
        self.r = r
        self.D = D
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, A, y=None):
        A = check_array(A)
        problem = make_matrix_game(0, 0, A=A)
        m = A.shape[0]
        L = problem.L
        D = 0.5 * (self.r - 1.0) / L if self.D is None else self.D
        cfg = SymplecticConfig(r=self.r, D=D, L=L, theorem="thm3_4")
        z0 = np.concatenate([np.full(m, 1.0 / m), np.full(A.shape[1], 1.0 / A.shape[1])])
        state = symplectic_init(problem.f, z0, problem.g)
        for _ in range(self.max_iter):
            state = speg_step(state, problem.f, problem.g, cfg)
            if np.linalg.norm(state.residual) <= self.tol:
                break
        self.x_, self.y_ = state.z[:m], state.z[m:]
        self.gap_ = duality_gap(self.x_, self.y_, A)
        self.n_iter_ = state.k
        return self


class InclusionSolver(BaseEstimator):
    """Solve ``0 in F(z) + G(z)`` for a :class:`CompositeProblem` with SFBS; ``fit`` takes the problem."""

    def __init__(self, r=2.0, D=None, L=None, rho=None, s=None, max_iter=10000, tol=1e-8):
        self.r = r
        self.D = D
        self.L = L
        self.rho = rho
        self.s = s
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, problem, z0=None):
        L = self.L if self.L is not None else (problem.L or 1.0)
        rho = self.rho if self.rho is not None else (problem.rho or 0.0)
        s = 1.0 / L if self.s is None else self.s
        D = (self.r - 1.0) * (0.5 * s + rho) if self.D is None else self.D
        cfg = SymplecticConfig(r=self.r, D=D, L=L, rho=rho, s=s,
                               theorem="thm3_1" if s == 1.0 / L else "thm4_2")
        z0 = np.zeros(problem.dim) if z0 is None else np.asarray(z0, dtype=float)
        state = symplectic_init(problem.f, z0, problem.g)
        for _ in range(self.max_iter):
            state = sfbs_step(state, problem, cfg)
            if np.linalg.norm(state.residual) <= self.tol:
                break
        self.solution_ = state.z
        self.residual_ = float(np.linalg.norm(state.residual))
        self.n_iter_ = state.k
        return self
