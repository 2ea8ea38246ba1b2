"""Seeded problem generators with known structure.

Every generator is a deterministic function of its arguments. Linear
operators carry exact ``L`` and ``rho`` metadata; matrix games carry a
power-iteration estimate of the spectral norm.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .exceptions import ConfigError
from .operators import (
    ADMMResolvent,
    CompositeProblem,
    MapOracle,
    product_simplex_resolvent,
    soft_threshold,
    zero_map,
)

PROBLEM_KINDS = ("quadratic2d", "matrix_game", "lasso", "random_monotone", "comonotone_linear")


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    m: int = 100
    n: int = 100
    seed: int = 0
    mu: float = 0.1
    L: float = 1.0
    rho: float = 0.0

    def build(self):
        if self.kind == "quadratic2d":
            return make_quadratic2d()
        if self.kind == "matrix_game":
            return make_matrix_game(self.m, self.n, self.seed)
        if self.kind == "lasso":
            return make_lasso(self.m, self.n, self.mu, self.seed)
        if self.kind == "random_monotone":
            return make_random_monotone(self.n, self.L, self.seed)
        if self.kind == "comonotone_linear":
            return make_comonotone_linear(self.n, self.L, self.rho, self.seed)
        raise ConfigError(f"unknown problem kind {self.kind!r}; expected one of {PROBLEM_KINDS}")


def _rotation_blocks(n):
    """Block-diagonal skew matrix made of [[0, 1], [-1, 0]] blocks."""
    S = np.zeros((n, n))
    for i in range(0, n, 2):
        S[i, i + 1] = 1.0
        S[i + 1, i] = -1.0
    return S


def _random_orthogonal(n, rng):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def _linear_problem(M, L, rho, name, seed):
    M = np.ascontiguousarray(M)
    M.setflags(write=False)
    n = M.shape[0]
    f = MapOracle(lambda z: M @ z, lipschitz_hint=L, comonotone_hint=rho, name=name)
    return CompositeProblem(
        f=f, dim=n, known_solution=np.zeros(n), name=name, seed=seed, L=L, rho=rho, data={"M": M}
    )


def make_quadratic2d():
    """Saddle operator of ``-x^2/6 + (2 sqrt2/3) xy + y^2/6`` (L = 1, rho = -1/3)."""
    c = 2.0 * math.sqrt(2.0) / 3.0
    M = np.array([[-1.0 / 3.0, c], [-c, -1.0 / 3.0]])
    return _linear_problem(M, 1.0, -1.0 / 3.0, "quadratic2d", None)


def make_random_monotone(n, L=1.0, seed=0):
    """Skew operator ``L Q S Q^T``: monotone, exactly L-Lipschitz, zero at the origin."""
    if n % 2:
        raise ConfigError(f"n must be even, got {n}")
    if not L > 0:
        raise ConfigError("L must be positive")
    rng = np.random.default_rng(seed)
    Q = _random_orthogonal(n, rng)
    M = L * (Q @ _rotation_blocks(n) @ Q.T)
    return _linear_problem(M, float(L), 0.0, "random_monotone", seed)


def make_comonotone_linear(n, L=1.0, rho=0.0, seed=0):
    """Linear operator with ``|F(p)-F(q)| = L|p-q|`` and comonotonicity index exactly ``rho``.

    ``rho * L <= 1`` in absolute value is required for the construction.
    """
    if n % 2:
        raise ConfigError(f"n must be even, got {n}")
    if not L > 0:
        raise ConfigError("L must be positive")
    if abs(rho) * L > 1:
        raise ConfigError(f"|rho| L = {abs(rho) * L} > 1: no such operator exists")
    rng = np.random.default_rng(seed)
    Q = _random_orthogonal(n, rng)
    b = rho * L * L
    a = math.sqrt(max(L * L - (rho * L * L) ** 2, 0.0))
    M = Q @ (b * np.eye(n) + a * _rotation_blocks(n)) @ Q.T
    return _linear_problem(M, float(L), float(rho), "comonotone_linear", seed)


def spectral_norm(A, tol=1e-10, max_iter=10000, seed=0):
    """Largest singular value of ``A`` by power iteration on ``A^T A``."""
    A = np.asarray(A, dtype=float)
    v = np.random.default_rng(seed).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        norm_w = np.linalg.norm(w)
        if norm_w == 0:
            return 0.0
        v = w / norm_w
        new_sigma = math.sqrt(norm_w)
        if abs(new_sigma - sigma) <= tol * new_sigma:
            return new_sigma
        sigma = new_sigma
    return sigma


def nash_equilibrium(A):
    """Exact equilibrium ``(x*, y*)`` of ``min_x max_y x^T A y`` by linear programming."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    # x-player: min t  s.t. A^T x <= t, sum x = 1, x >= 0
    c = np.zeros(m + 1)
    c[-1] = 1.0
    res_x = linprog(
        c,
        A_ub=np.hstack([A.T, -np.ones((n, 1))]),
        b_ub=np.zeros(n),
        A_eq=np.hstack([np.ones((1, m)), np.zeros((1, 1))]),
        b_eq=[1.0],
        bounds=[(0, None)] * m + [(None, None)],
        method="highs",
    )
    # y-player: max t  s.t. A y >= t, sum y = 1, y >= 0
    res_y = linprog(
        np.concatenate([np.zeros(n), [-1.0]]),
        A_ub=np.hstack([-A, np.ones((m, 1))]),
        b_ub=np.zeros(m),
        A_eq=np.hstack([np.ones((1, n)), np.zeros((1, 1))]),
        b_eq=[1.0],
        bounds=[(0, None)] * n + [(None, None)],
        method="highs",
    )
    if not (res_x.success and res_y.success):
        raise RuntimeError("equilibrium LP failed")
    x = np.maximum(res_x.x[:m], 0.0)
    y = np.maximum(res_y.x[:n], 0.0)
    return x / x.sum(), y / y.sum()


def make_matrix_game(m, n, seed=0, A=None):
    """Matrix game ``min_{x in simplex} max_{y in simplex} x^T A y`` as ``F + N_C``."""
    if A is None:
        if m < 2 or n < 2:
            raise ConfigError("matrix game needs m, n >= 2")
        A = np.random.default_rng(seed).standard_normal((m, n))
    A = np.array(A, dtype=float)
    m, n = A.shape
    A.setflags(write=False)

    def F(z):
        return np.concatenate([A @ z[m:], -(A.T @ z[:m])])

    norm = spectral_norm(A)
    L = 1.01 * norm
    f = MapOracle(F, lipschitz_hint=L, comonotone_hint=0.0, name="matrix_game")
    data = {"A": A, "m": m, "n": n, "spectral_norm": norm}
    return CompositeProblem(
        f=f, dim=m + n, g=product_simplex_resolvent(m, n), name="matrix_game", seed=seed, L=L, rho=0.0, data=data
    )


def game_solution(problem):
    """Equilibrium of a matrix-game problem as a stacked vector."""
    x, y = nash_equilibrium(problem.data["A"])
    return np.concatenate([x, y])


class LassoData:
    """Data, objective and reference optimum of ``1/2||Ax-b||^2 + mu||x||_1``."""

    def __init__(self, A, b, mu):
        self.A, self.b, self.mu = A, b, float(mu)

    def objective(self, x):
        r = self.A @ x - self.b
        return 0.5 * float(r @ r) + self.mu * float(np.abs(x).sum())

    @functools.cached_property
    def solution(self):
        return lasso_proximal_gradient(self.A, self.b, self.mu)

    @property
    def optimum(self):
        return self.objective(self.solution)


def make_lasso(m, n, mu=0.1, seed=0):
    """LASSO as the zero problem of the Douglas-Rachford operator (``F = 0``)."""
    if m < 1 or n < 1:
        raise ConfigError("m, n must be positive")
    if not mu > 0:
        raise ConfigError("mu must be positive")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    A.setflags(write=False)
    b.setflags(write=False)
    g = ADMMResolvent(A, b, mu)
    data = {"A": A, "b": b, "mu": float(mu), "lasso": LassoData(A, b, mu)}
    return CompositeProblem(f=zero_map(n), dim=n, g=g, name="lasso", seed=seed, L=None, rho=0.0, data=data)


def lasso_proximal_gradient(A, b, mu, max_iter=200000, tol=1e-15):
    """Reference LASSO minimiser: FISTA with gradient-based adaptive restart."""
    A = np.asarray(A, dtype=float)
    step = 1.0 / spectral_norm(A) ** 2
    x = np.zeros(A.shape[1])
    y, t = x.copy(), 1.0
    Atb = A.T @ b
    for _ in range(max_iter):
        grad = A.T @ (A @ y) - Atb
        x_new = soft_threshold(y - step * grad, step * mu)
        if np.dot(y - x_new, x_new - x) > 0:
            t = 1.0
            y = x.copy()
            continue
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        moved = np.linalg.norm(x_new - x)
        x, t = x_new, t_new
        if moved <= tol * max(1.0, np.linalg.norm(x)):
            break
    return x


def lasso_admm(A, b, mu, max_iter=200000, tol=1e-14):
    """Independent LASSO reference: plain ADMM (iterated Douglas-Rachford sweep)."""
    g = ADMMResolvent(A, b, mu)
    v = np.zeros(np.asarray(A).shape[1])
    for _ in range(max_iter):
        v_new = g(v)
        moved = np.linalg.norm(v_new - v)
        v = v_new
        if moved <= tol * max(1.0, np.linalg.norm(v)):
            break
    return g.split(v)[1]


# --------------------------------------------------------------------------
# CSV dump / load
# --------------------------------------------------------------------------


def dump_problem(problem, path):
    """Write the defining matrix row-major, with a ``#`` header of dims and parameters.

    LASSO problems append ``b`` as a final column (``rhs=1`` in the header).
    """
    kind = problem.name
    header = {"kind": kind, "seed": problem.seed}
    if kind in ("matrix_game", "lasso"):
        mat = np.asarray(problem.data["A"])
    else:
        mat = np.asarray(problem.data["M"])
        header.update(L=problem.L, rho=problem.rho)
    header.update(rows=mat.shape[0], cols=mat.shape[1])
    if kind == "lasso":
        header.update(mu=problem.data["mu"], rhs=1)
        mat = np.column_stack([mat, problem.data["b"]])
    with open(path, "w") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in header.items()) + "\n")
        for row in mat:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def load_problem(path):
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing header line")
        header = dict(item.split("=", 1) for item in first[1:].split())
        mat = np.loadtxt(fh, delimiter=",", ndmin=2)
    kind = header["kind"]
    seed = None if header.get("seed") in (None, "None") else int(header["seed"])
    if kind == "matrix_game":
        return make_matrix_game(0, 0, seed=seed, A=mat)
    if kind == "lasso":
        A, b = mat[:, :-1], mat[:, -1]
        A.setflags(write=False)
        b.setflags(write=False)
        mu = float(header["mu"])
        g = ADMMResolvent(A, b, mu)
        data = {"A": A, "b": b, "mu": mu, "lasso": LassoData(A, b, mu)}
        return CompositeProblem(f=zero_map(A.shape[1]), dim=A.shape[1], g=g, name="lasso", seed=seed, rho=0.0, data=data)
    return _linear_problem(mat, float(header["L"]), float(header["rho"]), kind, seed)
