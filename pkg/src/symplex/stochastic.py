"""Stochastic symplectic extragradient+ (SSEG+) with pluggable noise schedules.

Noise is isotropic Gaussian with total variance ``sigma^2 = E|zeta|^2``, so
each coordinate has standard deviation ``sigma / sqrt(dim)``. Integer and
half-integer indices draw from two independent child streams of the run's
seed. The draw for index ``k+1`` used in the ``u`` update is kept and reused
as ``zeta_k`` for the next step's extrapolation, as the method prescribes.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .exceptions import ConfigError
from .operators import check_iterate

SCHEDULE_KINDS = ("zero", "constant", "decaying")


@dataclass(frozen=True)
class NoiseSchedule:
    kind: str = "zero"
    E1: float = 1.0
    E2: float = 1.0
    eps: float = 1e-4
    r: float = 2.0
    base_seed: int = 0

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown noise schedule {self.kind!r}; expected one of {SCHEDULE_KINDS}")
        if self.kind != "zero" and not (self.E1 > 0 and self.E2 > 0 and self.eps > 0):
            raise ConfigError("E1, E2 and eps must be positive")


def sigma_at(schedule, index):
    """Standard deviation of the noise at integer or half-integer ``index``.

    ``decaying`` uses ``E1 eps / (r k)`` at integer ``k`` (``k = 0`` clamped to
    ``k = 1``) and ``E2 eps / (r (k + r))`` at ``k + 1/2``; ``constant`` uses
    ``E1 eps`` and ``E2 eps``.
    """
    if index < 0:
        raise ValueError("index must be nonnegative")
    if schedule.kind == "zero":
        return 0.0
    k = math.floor(index)
    half = index - k == 0.5
    if index - k not in (0.0, 0.5):
        raise ValueError(f"index must be an integer or half-integer, got {index}")
    if schedule.kind == "constant":
        var = (schedule.E2 if half else schedule.E1) * schedule.eps
    elif half:
        var = schedule.E2 * schedule.eps / (schedule.r * (k + schedule.r))
    else:
        var = schedule.E1 * schedule.eps / (schedule.r * max(k, 1))
    return math.sqrt(var)


@dataclass
class NoiseStream:
    """Per-run generator pair: one stream for integer indices, one for half indices."""

    schedule: NoiseSchedule
    seed: Optional[int] = None

    def __post_init__(self):
        seed = self.schedule.base_seed if self.seed is None else self.seed
        self.integer_rng, self.half_rng = np.random.default_rng(seed).spawn(2)

    def draw(self, index, dim):
        sigma = sigma_at(self.schedule, index)
        if sigma == 0.0:
            return np.zeros(dim)
        rng = self.half_rng if index % 1 else self.integer_rng
        return (sigma / math.sqrt(dim)) * rng.standard_normal(dim)


@dataclass(frozen=True)
class StochasticState:
    k: int
    z: np.ndarray
    u: np.ndarray
    z_half: np.ndarray
    fz: np.ndarray
    zeta: np.ndarray

    @property
    def residual(self):
        return self.fz


def sseg_init(F, z0, stream):
    z0 = np.asarray(z0, dtype=float).copy()
    return StochasticState(k=0, z=z0, u=z0, z_half=z0, fz=F(z0), zeta=stream.draw(0, z0.size))


def validate_sseg(r, D):
    if not r >= 2:
        raise ConfigError(f"r must satisfy r >= 2, got {r}")
    if not 0 < D <= 1:
        raise ConfigError(f"D must satisfy 0 < D <= 1, got {D}")


def sseg_step(state, F, L, r, D, stream):
    """One SSEG+ step; ``F(z_k)`` is cached so each step costs two evaluations."""
    k, dim = state.k, state.z.size
    w = k / (k + r)
    z_tilde = w * state.z + (r / (k + r)) * state.u
    z_half = z_tilde - (w * (1.0 / L)) * (state.fz + state.zeta)
    zeta_half = stream.draw(k + 0.5, dim)
    f_half = F(z_half)
    z_new = z_tilde - (1.0 / L) * (f_half + zeta_half)
    f_new = F(z_new)
    zeta_new = stream.draw(k + 1, dim)
    u_new = state.u - (D / r) * (f_new + zeta_new)
    check_iterate(z_new, state, u_new)
    return replace(state, k=k + 1, z=z_new, u=u_new, z_half=z_half, fz=f_new, zeta=zeta_new)
