"""Vector helpers, operator oracles and the concrete resolvents used by the solvers.

Vectors are dense 1-D ``float64`` numpy arrays. Oracles are thin immutable
wrappers around callables so that solvers can be written against a single
interface whether ``G`` is a projection, a proximal map or an ADMM sweep.
"""

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import linalg

from .exceptions import ConfigError, DivergenceError, InfeasibleError

FEASIBILITY_TOL = 1e-12


def as_vector(values, name="vector"):
    """Return ``values`` as a finite 1-D float array (a copy is not forced)."""
    vec = np.asarray(values, dtype=float)
    if vec.ndim == 0:
        vec = vec.reshape(1)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} contains non-finite entries")
    return vec


def inner(a, b):
    """Euclidean inner product; mismatched dimensions are an error."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


def sqnorm(a):
    return float(np.dot(a, a))


# --------------------------------------------------------------------------
# Oracles
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MapOracle:
    """Single-valued operator ``F`` with optional Lipschitz / comonotonicity hints."""

    eval: Callable[[np.ndarray], np.ndarray]
    lipschitz_hint: Optional[float] = None
    comonotone_hint: Optional[float] = None
    name: str = "F"

    def __post_init__(self):
        if self.lipschitz_hint is not None and not self.lipschitz_hint > 0:
            raise ConfigError("lipschitz_hint must be positive")

    def __call__(self, z):
        return self.eval(z)


def zero_map(dim):
    """The null operator on R^dim (Lipschitz with any constant)."""
    zero = np.zeros(dim)
    return MapOracle(lambda z: zero.copy(), lipschitz_hint=None, comonotone_hint=None, name="zero")


def linear_map(M, lipschitz_hint=None, comonotone_hint=None, name="linear"):
    M = np.asarray(M, dtype=float)
    return MapOracle(lambda z: M @ z, lipschitz_hint, comonotone_hint, name)


class ResolventOracle:
    """Resolvent ``J_{lam G}`` of a maximally monotone ``G``.

    ``resolve(v, lam)`` must be firmly nonexpansive in ``v`` for every fixed
    ``lam > 0``. Projections ignore ``lam`` since normal cones are invariant
    under positive scaling.
    """

    def __init__(self, resolve, name="J"):
        self._resolve = resolve
        self.name = name

    def resolve(self, v, lam=1.0):
        return self._resolve(v, lam)

    def __call__(self, v, lam=1.0):
        return self._resolve(v, lam)

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


def identity_resolvent():
    return ResolventOracle(lambda v, lam: np.array(v, dtype=float), name="identity")


@dataclass(frozen=True)
class CompositeProblem:
    """Inclusion problem ``0 in F(z) + G(z)``.

    ``g`` is ``None`` when ``G = 0``. ``data`` holds problem-specific arrays
    (game matrix, LASSO data) that diagnostics and reporting need.
    """

    f: MapOracle
    dim: int
    g: Optional[ResolventOracle] = None
    known_solution: Optional[np.ndarray] = None
    name: str = "problem"
    seed: Optional[int] = None
    L: Optional[float] = None
    rho: Optional[float] = None
    data: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.known_solution is not None:
            z_star = as_vector(self.known_solution, "known_solution")
            z_star.setflags(write=False)
            object.__setattr__(self, "known_solution", z_star)
            if self.g is None:
                res = np.linalg.norm(self.f(z_star))
                if res > 1e-9:
                    raise ConfigError(f"known_solution is not a zero of F (|F(z*)| = {res:.3e})")

    @property
    def constrained(self):
        return self.g is not None

    def resolve(self, v, lam=1.0):
        if self.g is None:
            return v
        return self.g(v, lam)


# --------------------------------------------------------------------------
# Projections and proximal maps
# --------------------------------------------------------------------------


def project_simplex(v):
    """Euclidean projection onto the unit simplex (sort-based, exact)."""
    v = np.asarray(v, dtype=float)
    n = v.size
    if n == 0:
        raise ValueError("cannot project an empty vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, n + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def project_product_simplex(v, split):
    """Project ``v[:split]`` and ``v[split:]`` onto their simplices independently."""
    v = np.asarray(v, dtype=float)
    if not 1 <= split < v.size:
        raise ValueError(f"split must satisfy 1 <= split < {v.size}, got {split}")
    return np.concatenate([project_simplex(v[:split]), project_simplex(v[split:])])


def project_box(v, lower, upper):
    return np.clip(v, lower, upper)


def simplex_resolvent(dim):
    return ResolventOracle(lambda v, lam: project_simplex(v), name=f"simplex({dim})")


def product_simplex_resolvent(m, n):
    return ResolventOracle(lambda v, lam: project_product_simplex(v, m), name=f"simplex({m})xsimplex({n})")


def box_resolvent(lower, upper):
    return ResolventOracle(lambda v, lam: project_box(v, lower, upper), name="box")


def soft_threshold(v, tau):
    """Proximal map of ``tau * ||.||_1``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


class LeastSquaresProx:
    """Cached proximal map of ``lam/2 ||A x - b||^2``.

    Solves ``(I + lam A^T A) x = v + lam A^T b``. Wide matrices go through
    the Woodbury identity so only a ``min(m, n)`` sized Cholesky factor is kept.
    """

    def __init__(self, A, b, lam):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float)
        if b.ndim != 1 or b.size != A.shape[0]:
            raise ValueError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
        if not lam > 0:
            raise ValueError("lam must be positive")
        self.A, self.b, self.lam = A, b, float(lam)
        m, n = A.shape
        self._lam_Atb = self.lam * (A.T @ b)
        self._wide = m < n
        if self._wide:
            self._factor = linalg.cho_factor(np.eye(m) + self.lam * (A @ A.T))
        else:
            self._factor = linalg.cho_factor(np.eye(n) + self.lam * (A.T @ A))

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.A.shape[1],):
            raise ValueError(f"v has shape {v.shape}, expected ({self.A.shape[1]},)")
        rhs = v + self._lam_Atb
        if self._wide:
            A = self.A
            return rhs - self.lam * (A.T @ linalg.cho_solve(self._factor, A @ rhs))
        return linalg.cho_solve(self._factor, rhs)


def prox_least_squares(v, A, b, lam):
    """Uncached convenience form of :class:`LeastSquaresProx`."""
    return LeastSquaresProx(A, b, lam)(v)


class ADMMResolvent(ResolventOracle):
    """Douglas-Rachford sweep for ``min 1/2||Ax-b||^2 + mu||y||_1, x = y``.

    The map ``v -> v + q - p`` with ``p = prox_f(v)`` and
    ``q = prox_g(2p - v)`` is firmly nonexpansive, hence the resolvent of a
    maximally monotone operator. Fixed points ``v`` give LASSO solutions ``p``.
    Iterating it is ADMM.
    """

    def __init__(self, A, b, mu):
        if not mu >= 0:
            raise ValueError("mu must be nonnegative")
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float)
        self.mu = float(mu)
        self._prox = {1.0: LeastSquaresProx(self.A, self.b, 1.0)}
        super().__init__(self._sweep, name="admm")

    def _ls(self, lam):
        lam = float(lam)
        prox = self._prox.get(lam)
        if prox is None:
            prox = self._prox[lam] = LeastSquaresProx(self.A, self.b, lam)
        return prox

    def split(self, v, lam=1.0):
        """Return ``(p, q)``: the least-squares and l1 halves of the sweep at ``v``."""
        p = self._ls(lam)(v)
        w = 2.0 * p - v
        q = soft_threshold(w, lam * self.mu) if self.mu > 0 else w
        return p, q

    def _sweep(self, v, lam):
        p, q = self.split(v, lam)
        return v + q - p


def admm_resolvent(v, lasso, lam=1.0):
    """One Douglas-Rachford sweep of ``lasso`` (a problem built by ``make_lasso``)."""
    g = lasso.g if isinstance(lasso, CompositeProblem) else lasso
    if not isinstance(g, ADMMResolvent):
        raise ValueError("problem does not carry LASSO data")
    return g(np.asarray(v, dtype=float), lam)


def duality_gap(x, y, A, tol=1e-8):
    """``max_j (A^T x)_j - min_i (A y)_i`` for a feasible strategy pair."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.asarray(A, dtype=float)
    for name, p in (("x", x), ("y", y)):
        violation = max(abs(p.sum() - 1.0), float(np.max(-p, initial=0.0)))
        if violation > tol:
            raise InfeasibleError(f"{name} is not in the simplex (violation {violation:.3e})", violation)
    return float(np.max(A.T @ x) - np.min(A @ y))


DIVERGENCE_RADIUS = 1e12


def check_iterate(z, last_state, *extra):
    """Raise :class:`DivergenceError` if ``z`` (or any of ``extra``) is non-finite or huge."""
    # a single dot product catches NaN, Inf and overflow in one comparison
    if not float(np.dot(z, z)) <= DIVERGENCE_RADIUS**2:
        if not np.all(np.isfinite(z)):
            raise DivergenceError("iterate became non-finite", last_state)
        raise DivergenceError(f"|z| exceeded {DIVERGENCE_RADIUS:g}", last_state)
    for vec in extra:
        if not np.isfinite(np.dot(vec, vec)) and not np.all(np.isfinite(vec)):
            raise DivergenceError("iterate became non-finite", last_state)
