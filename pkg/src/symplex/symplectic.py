"""Symplectic proximal point and the symplectic extragradient family.

All steps share :class:`SymplecticState`. ``fz`` caches ``F(z_k)`` so each
extragradient step costs exactly two operator evaluations, and ``g_tilde``
holds the surrogate element of ``G(z_k)`` (or of the normal cone) recovered
from the last resolvent call. ``fz + g_tilde`` is therefore an element of
``T(z_k)`` whose norm upper-bounds ``dist(0, T(z_k))``.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .exceptions import ConfigError, InvariantViolation
from .operators import as_vector, check_iterate

_BOUNDARY_RTOL = 1e-12
THEOREMS = (None, "thm3_1", "thm3_4", "thm4_2")


@dataclass(frozen=True)
class SymplecticState:
    k: int
    z: np.ndarray
    u: np.ndarray
    z_tilde: np.ndarray
    z_half: np.ndarray
    fz: np.ndarray
    g_tilde: np.ndarray
    fhalf: Optional[np.ndarray] = None
    beta: Optional[float] = None

    @property
    def residual(self):
        return self.fz + self.g_tilde


def symplectic_init(F, z0, projection=None, beta=None):
    """Initial state: ``u_0 = z_0``, ``g_tilde_0 = 0``, ``F(z_0)`` cached.

    ``F`` may be ``None`` for the pure proximal point method.
    """
    z0 = as_vector(z0, "z0").copy()
    if projection is not None:
        z0 = projection(z0, 1.0)
    fz = np.zeros_like(z0) if F is None else F(z0)
    return SymplecticState(
        k=0, z=z0, u=z0, z_tilde=z0, z_half=z0, fz=fz, g_tilde=np.zeros_like(z0), beta=beta
    )


@dataclass(frozen=True)
class SymplecticConfig:
    """Parameters of SFBS / SPEG+ and the theorem whose hypotheses they must meet.

    ``s`` defaults to ``1/L``. ``theorem`` selects the admissible region checked
    at construction: ``"thm3_1"`` (``0 < D <= (r-1)(1/L + 2 rho)``, ``s = 1/L``),
    ``"thm4_2"`` (``max(0, -2 rho) < s < 1/L``, ``0 < D < (r-1)(s + 2 rho)``) or
    ``"thm3_4"`` (``rho = 0``, ``0 < D <= (r-1) s``). ``None`` only checks
    ``r > 1`` and ``D > 0``.
    """

    r: float = 2.0
    D: float = 0.5
    L: float = 1.0
    rho: float = 0.0
    s: Optional[float] = None
    theorem: Optional[str] = None
    mixing: str = "analysis"

    def __post_init__(self):
        if self.s is None:
            object.__setattr__(self, "s", 1.0 / self.L)
        r, D, L, rho, s = self.r, self.D, self.L, self.rho, self.s
        if not r > 1:
            raise ConfigError(f"r must satisfy r > 1, got {r}")
        if not L > 0:
            raise ConfigError(f"L must be positive, got {L}")
        if not D > 0:
            raise ConfigError(f"D must be positive, got {D}")
        if not s > 0:
            raise ConfigError(f"s must be positive, got {s}")
        if self.mixing not in ("analysis", "printed"):
            raise ConfigError("mixing must be 'analysis' or 'printed'")
        if self.theorem not in THEOREMS:
            raise ConfigError(f"unknown theorem {self.theorem!r}")
        if self.theorem == "thm3_1":
            if not rho > -1.0 / (2.0 * L):
                raise ConfigError("rho must satisfy rho > -1/(2L)")
            bound = (r - 1.0) * (1.0 / L + 2.0 * rho)
            if D > bound * (1.0 + _BOUNDARY_RTOL):
                raise ConfigError(f"D must satisfy 0<D<=(r-1)(1/L+2rho) = {bound:.6g}, got {D}")
        elif self.theorem == "thm4_2":
            if not rho > -1.0 / (2.0 * L):
                raise ConfigError("rho must satisfy rho > -1/(2L)")
            if not max(0.0, -2.0 * rho) < s < 1.0 / L:
                raise ConfigError(f"s must satisfy max(0,-2rho) < s < 1/L, got {s}")
            bound = (r - 1.0) * (s + 2.0 * rho)
            if not D < bound:
                raise ConfigError(f"D must satisfy 0<D<(r-1)(s+2rho) = {bound:.6g}, got {D}")
        elif self.theorem == "thm3_4":
            if rho != 0:
                raise ConfigError("SPEG+ theory assumes a monotone F (rho = 0)")
            if not s <= (1.0 / L) * (1.0 + _BOUNDARY_RTOL):
                raise ConfigError(f"s must satisfy 0 < s <= 1/L, got {s}")
            bound = (r - 1.0) * s
            if D > bound * (1.0 + _BOUNDARY_RTOL):
                raise ConfigError(f"D must satisfy 0<D<=(r-1)s = {bound:.6g}, got {D}")

    @property
    def d_star(self):
        """``(r-1)(s/2 + rho)``: the D that maximises the guaranteed rate."""
        return (self.r - 1.0) * (0.5 * self.s + self.rho)


def _mix(k, r, z, u):
    return (k / (k + r)) * z + (r / (k + r)) * u


def sppa_step(state, J, r, D, lam=1.0):
    """Symplectic proximal point step; the resolvent is applied to the mixed point."""
    k = state.k
    z_tilde = _mix(k, r, state.z, state.u)
    z_new = J(z_tilde, lam)
    u_new = state.u + (D / r) * (z_new - z_tilde)
    check_iterate(z_new, state, u_new)
    return replace(
        state, k=k + 1, z=z_new, u=u_new, z_tilde=z_tilde, z_half=z_tilde, g_tilde=(z_tilde - z_new) / lam
    )


def seg_step(state, F, alpha, beta, C):
    """Reordered SEG step (two evaluations of ``F`` per call)."""
    u_new = state.u - C * state.fz
    z_tilde = (1.0 - alpha) * state.z + alpha * u_new
    z_half = z_tilde - beta * state.fz
    f_half = F(z_half)
    z_new = z_tilde - beta * f_half
    check_iterate(z_new, state, u_new)
    return replace(
        state, k=state.k + 1, z=z_new, u=u_new, z_tilde=z_tilde, z_half=z_half, fz=F(z_new), fhalf=f_half
    )


def sfbs_step(state, problem, cfg):
    """Symplectic forward-backward splitting with step ``cfg.s``.

    With ``s = 1/L`` this is the plain algorithm; ``s < 1/L`` is the
    generalized-step variant. Without ``G`` it is SEG+ with ``g_tilde = 0``.
    """
    F = problem.f
    k, r, s, rho = state.k, cfg.r, cfg.s, cfg.rho
    w = k / (k + r)
    # without G the surrogate stays exactly zero, so adding it is skipped
    free = problem.g is None
    T = state.fz if free else state.fz + state.g_tilde
    z_tilde = _mix(k, r, state.z, state.u)
    z_half = z_tilde - (w * (s + 2.0 * rho)) * T
    f_half = F(z_half)
    arg = z_tilde - s * f_half
    if rho != 0.0:
        arg = arg - (2.0 * rho * w) * T
    if free:
        z_new = arg
        g_new = state.g_tilde
    else:
        z_new = problem.g(arg, s)
        g_new = (arg - z_new) / s
    f_new = F(z_new)
    u_new = state.u - (cfg.D / r) * (f_new if free else f_new + g_new)
    check_iterate(z_new, state, u_new)
    return SymplecticState(k + 1, z_new, u_new, z_tilde, z_half, f_new, g_new, f_half, state.beta)


def speg_step(state, F, P, cfg):
    """Symplectic projected extragradient+ step with step ``cfg.s``."""
    k, r, s = state.k, cfg.r, cfg.s
    w = k / (k + r)
    z_tilde = _mix(k, r, state.z, state.u)
    z_half = P(z_tilde - (w * s) * state.fz, s)
    f_half = F(z_half)
    arg = z_tilde - s * f_half
    z_new = P(arg, s)
    c_new = (arg - z_new) / s
    f_new = F(z_new)
    u_new = state.u - (cfg.D / r) * (f_new + c_new)
    check_iterate(z_new, state, u_new)
    return replace(
        state, k=k + 1, z=z_new, u=u_new, z_tilde=z_tilde, z_half=z_half, fz=f_new, g_tilde=c_new, fhalf=f_half
    )


# --------------------------------------------------------------------------
# SEG with varying / constant step size
# --------------------------------------------------------------------------


def _shifted_mix(k, r, z, u, mixing):
    n = k + r
    if mixing == "analysis":
        return ((n - 1.0) / n) * z + (1.0 / n) * u
    return (1.0 / n) * z + ((n - 1.0) / n) * u


def validate_seg_vary(beta0, r, D, L):
    """Check ``beta0 in (0, 1/L)`` and ``-1 < D < r(r-1)(1-L^2 b^2)/((2r-1)L^2 b^2) - 1``."""
    if not r > 1:
        raise ConfigError("r must satisfy r > 1")
    if not 0 < beta0 < 1.0 / L:
        raise ConfigError(f"beta0 must lie in (0, 1/L), got {beta0}")
    lb2 = (L * beta0) ** 2
    upper = r * (r - 1.0) * (1.0 - lb2) / ((2.0 * r - 1.0) * lb2) - 1.0
    if not -1.0 < D < upper:
        raise ConfigError(f"D must satisfy -1 < D < {upper:.6g}, got {D}")


def seg_vary_floor(beta0, r, D, L):
    """Guaranteed lower bound on the varying step sizes."""
    lb2 = (L * beta0) ** 2
    return beta0 * (1.0 - (2.0 * r - 1.0) * (1.0 + D) * lb2 / (r * (r - 1.0) * (1.0 - lb2)))


def seg_vary_step(state, F, r, D, L, mixing="analysis"):
    """SEG with the shrinking step-size schedule; ``state.beta`` carries ``beta_k``."""
    k, beta = state.k, state.beta
    if beta is None or not 0 < beta < 1.0 / L:
        raise InvariantViolation(f"beta_k = {beta} left (0, 1/L)", state)
    z_tilde = _shifted_mix(k, r, state.z, state.u, mixing)
    z_half = z_tilde - beta * state.fz
    f_half = F(z_half)
    z_new = z_tilde - beta * f_half
    f_new = F(z_new)
    q = 1.0 - (L * beta) ** 2
    lb3 = L * L * beta**3
    n = k + r
    u_new = state.u - (D * lb3 / (2.0 * (n - 1.0) * q)) * f_new
    beta_new = beta - (1.0 + D) * lb3 / ((n * n - 1.0) * q)
    check_iterate(z_new, state, u_new)
    if not 0 < beta_new < 1.0 / L:
        raise InvariantViolation(f"beta_(k+1) = {beta_new} left (0, 1/L)", state)
    return replace(
        state, k=k + 1, z=z_new, u=u_new, z_tilde=z_tilde, z_half=z_half, fz=f_new, fhalf=f_half, beta=beta_new
    )


def seg_const_step(state, F, r, beta, L, mixing="analysis"):
    """SEG with constant step ``beta`` and the matching negative momentum coefficient."""
    if not 0 < beta < 1.0 / L:
        raise ConfigError(f"beta must lie in (0, 1/L), got {beta}")
    k = state.k
    z_tilde = _shifted_mix(k, r, state.z, state.u, mixing)
    z_half = z_tilde - beta * state.fz
    f_half = F(z_half)
    z_new = z_tilde - beta * f_half
    f_new = F(z_new)
    coef = L * L * beta**3 / (2.0 * (k + r - 1.0) * (1.0 - (L * beta) ** 2))
    u_new = state.u + coef * f_new
    check_iterate(z_new, state, u_new)
    return replace(
        state, k=k + 1, z=z_new, u=u_new, z_tilde=z_tilde, z_half=z_half, fz=f_new, fhalf=f_half, beta=beta
    )


def seg_const_coefficient(k, r, beta, L):
    """Momentum coefficient ``C_k`` (negative) of the constant-step method, in ``u_{k+1} = u_k - C_k F``."""
    return -(L * L * beta**3) / (2.0 * (k + r - 1.0) * (1.0 - (L * beta) ** 2))
