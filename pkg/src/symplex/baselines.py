"""Classical extragradient-family steps: EG, EG+, Halpern, EAG and FEG.

Each step is a pure function ``(state, oracle, params) -> new state``. When
``state.projection`` is set, every forward move is followed by the
projection, and ``g_tilde`` holds the normal-cone element recovered from the
last projection, so ``fz + g_tilde`` is a computable element of ``T(z)``.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .operators import ResolventOracle, as_vector, check_iterate


@dataclass(frozen=True)
class BaselineState:
    k: int
    z: np.ndarray
    z_half: np.ndarray
    z0: np.ndarray
    fz: np.ndarray
    g_tilde: np.ndarray
    fhalf: Optional[np.ndarray] = None
    projection: Optional[ResolventOracle] = None

    @property
    def residual(self):
        return self.fz + self.g_tilde


def baseline_init(F, z0, projection=None):
    """State at ``k = 0``; ``z0`` is projected first when a projection is given."""
    z0 = as_vector(z0, "z0").copy()
    if projection is not None:
        z0 = projection(z0, 1.0)
    z0.setflags(write=False)
    return BaselineState(
        k=0, z=z0, z_half=z0, z0=z0, fz=F(z0), g_tilde=np.zeros_like(z0), projection=projection
    )


def _extragradient(state, F, base, half_shift, step, full_shift):
    """Shared core: ``z_half = P(base - half_shift)``, ``z1 = P(base - step F(z_half) - full_shift)``."""
    P = state.projection
    z_half = base - half_shift
    if P is not None:
        z_half = P(z_half, step)
    f_half = F(z_half)
    arg = base - step * f_half - full_shift
    if P is not None:
        z_new = P(arg, step)
        g_tilde = (arg - z_new) / step
    else:
        z_new = arg
        g_tilde = np.zeros_like(arg)
    check_iterate(z_new, state, z_half)
    return replace(
        state, k=state.k + 1, z=z_new, z_half=z_half, fz=F(z_new), g_tilde=g_tilde, fhalf=f_half
    )


def eg_step(state, F, s):
    """Korpelevich extragradient: two forward steps of size ``s`` from ``z_k``."""
    return _extragradient(state, F, state.z, s * state.fz, s, 0.0)


def egplus_step(state, F, s, beta=0.5):
    """EG+ : extrapolate with ``s / beta``, update with ``s``; ``beta = 1`` is plain EG."""
    return _extragradient(state, F, state.z, (s / beta) * state.fz, s, 0.0)


def halpern_step(state, J, alpha):
    """Anchored resolvent step ``z_{k+1} = alpha z_0 + (1 - alpha) J(z_k)``."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    jz = J(state.z, 1.0)
    z_new = alpha * state.z0 + (1.0 - alpha) * jz
    check_iterate(z_new, state)
    return replace(state, k=state.k + 1, z=z_new, z_half=jz)


def eag_defaults(k, L):
    """Anchor weight ``1/(k+2)`` and step ``1/(8L)``."""
    return 1.0 / (k + 2), 1.0 / (8.0 * L)


def eag_step(state, F, alpha, beta):
    """Extra anchored gradient step."""
    base = alpha * state.z0 + (1.0 - alpha) * state.z
    return _extragradient(state, F, base, beta * state.fz, beta, 0.0)


def feg_step(state, F, L, rho, alpha):
    """Fast extragradient step for rho-comonotone ``F`` (``alpha_k = 1/(k+1)`` in the standard schedule)."""
    if not 1.0 / L + 2.0 * rho > 0:
        raise ValueError("FEG requires 1/L + 2 rho > 0")
    base = alpha * state.z0 + (1.0 - alpha) * state.z
    comp = 1.0 - alpha
    return _extragradient(
        state, F, base, comp * (1.0 / L + 2.0 * rho) * state.fz, 1.0 / L, comp * 2.0 * rho * state.fz
    )


def ppa_step(state, J, lam=1.0):
    """Proximal point step ``z_{k+1} = J(z_k)``; ``g_tilde = (z_k - z_{k+1}) / lam`` lies in ``G(z_{k+1})``.

    With the Douglas-Rachford resolvent this is plain ADMM.
    """
    z_new = J(state.z, lam)
    check_iterate(z_new, state)
    return replace(state, k=state.k + 1, z=z_new, z_half=state.z, g_tilde=(state.z - z_new) / lam)
