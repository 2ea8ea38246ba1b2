"""Adaptive ``(L_k, rho_k)`` line search for SFBS and SPEG+, restarts, and accelerated ADMM.

A trial uses the current ``(L_k, rho_k)`` and is re-run with a larger
``L_k`` until both acceptance conditions hold:

* ``<dT, dz> >= rho_k |dT|^2`` with ``dT = T~(z_{k+1}) - T~(z_k)``;
* ``|F(z_{k+1}) - F(z_{k+1/2})| <= L_k |z_{k+1} - z_{k+1/2}|``.

``rho_k`` is never decreased between restarts. Each outer step first probes
a slightly larger ``rho`` and rolls the probe back if the first condition
rejects it. A rejection with nothing left to roll back means the current
``rho`` is no longer valid along the trajectory; the step then raises
:class:`LineSearchExhausted` and the caller may restart from ``z_k``.

The ``rho`` test is skipped while the step-size sum is zero (first step
after an initialisation or restart): there ``T~(z_k)`` is the conventional
zero surrogate rather than an element of ``T(z_k)``, and the condition
enters the Lyapunov difference multiplied by that zero sum.
"""

from dataclasses import dataclass, replace
from typing import Any, Optional

import numpy as np

from .baselines import BaselineState, eg_step, feg_step
from .exceptions import ConfigError, LineSearchExhausted
from .operators import check_iterate, inner, sqnorm

ACCEPT_RTOL = 1e-12


@dataclass(frozen=True)
class LineSearchPolicy:
    L_growth: float = 2.0
    L_shrink: float = 1.0
    rho_probe: float = 0.1
    rho_max: float = np.inf
    max_backtracks: int = 40
    restart_enabled: bool = True
    max_restarts: int = 1000

    def __post_init__(self):
        if not (np.isfinite(self.L_growth) and self.L_growth > 1):
            raise ConfigError("L_growth must be a finite number > 1")
        if not 0 < self.L_shrink <= 1:
            raise ConfigError("L_shrink must lie in (0, 1]")
        if not self.rho_probe >= 0:
            raise ConfigError("rho_probe must be nonnegative")
        if self.max_backtracks < 0:
            raise ConfigError("max_backtracks must be nonnegative")

    @classmethod
    def constant(cls):
        """Never probes ``rho`` nor shrinks ``L``: constant hints stay constant while they pass."""
        return cls(rho_probe=0.0, L_shrink=1.0)


@dataclass(frozen=True)
class LineSearchState:
    """Wraps an inner solver state with the line-search bookkeeping.

    ``L`` and ``rho`` are the parameters of the last accepted step (the
    initial hints before the first step). ``sigma`` is the running sum of
    ``1/(2 L_i) + rho_i`` over accepted steps since the last restart.
    """

    inner: Any
    L: float
    rho: float
    sigma: float
    L0: float
    rho0: float
    backtracks: int = 0
    restarts: int = 0
    total_k: int = 0
    resolvent_arg: Optional[np.ndarray] = None

    @property
    def k(self):
        return self.total_k

    @property
    def z(self):
        return self.inner.z

    @property
    def residual(self):
        return self.inner.residual


def linesearch_init(inner_state, L0, rho0=0.0):
    if not L0 > 0:
        raise ConfigError("initial L must be positive")
    if not rho0 > -1.0 / (2.0 * L0):
        raise ConfigError(f"initial rho must satisfy rho > -1/(2L) = {-1.0 / (2.0 * L0):.6g}, got {rho0}")
    return LineSearchState(
        inner=inner_state, L=float(L0), rho=float(rho0), sigma=0.0, L0=float(L0), rho0=float(rho0),
        resolvent_arg=inner_state.z,
    )


def _rho_scale(dt2, dz, t_old, t_new, f_new, rho):
    # G~ comes out of a difference quotient, so dT carries rounding of the size of
    # |T~| and |F| (not |dT|); near convergence that dominates <dT, dz>
    size = np.sqrt(dt2) + np.sqrt(sqnorm(t_old)) + np.sqrt(sqnorm(t_new)) + np.sqrt(sqnorm(f_new))
    return size * np.sqrt(sqnorm(dz)) + abs(rho) * dt2


def check_accept(z, z_new, z_half, t_old, t_new, f_new, f_half, L, rho, check_rho=True, check_L=True,
                 rtol=ACCEPT_RTOL):
    """Classify a trial as ``"accepted"``, ``"reject_rho"`` or ``"reject_L"``.

    Zero denominators make the corresponding condition vacuous (accepted).
    """
    if check_rho:
        dt = t_new - t_old
        dz = z_new - z
        dt2 = sqnorm(dt)
        if dt2 > 0:
            lhs = inner(dt, dz)
            rhs = rho * dt2
            if lhs < rhs - rtol * _rho_scale(dt2, dz, t_old, t_new, f_new, rho):
                return "reject_rho"
    if check_L:
        gap = float(np.linalg.norm(z_new - z_half))
        if gap > 0:
            if float(np.linalg.norm(f_new - f_half)) > L * gap * (1.0 + rtol):
                return "reject_L"
    return "accepted"


def acceptance_slack(z, z_new, z_half, t_old, t_new, f_new, f_half, L, rho):
    """Relative slacks ``(rho_slack, L_slack)`` of both conditions; nonnegative means satisfied."""
    dt = t_new - t_old
    dz = z_new - z
    dt2 = sqnorm(dt)
    if dt2 > 0:
        rho_slack = (inner(dt, dz) - rho * dt2) / _rho_scale(dt2, dz, t_old, t_new, f_new, rho)
    else:
        rho_slack = 0.0
    gap = float(np.linalg.norm(z_new - z_half))
    if gap > 0:
        L_slack = (L * gap - float(np.linalg.norm(f_new - f_half))) / (L * gap)
    else:
        L_slack = 0.0
    return float(rho_slack), float(L_slack)


def alpha_sigma(L_k, rho_k, sigma_k, r):
    """Mixing weight ``r c / (Sigma_k + r c)`` with ``c = 1/(2 L_k) + rho_k``."""
    c = 1.0 / (2.0 * L_k) + rho_k
    if not c > 0:
        raise ConfigError(f"1/(2L_k) + rho_k must be positive, got {c}")
    return r * c / (sigma_k + r * c)


def _check_rD(r, D):
    if not r > 1:
        raise ConfigError(f"r must satisfy r > 1, got {r}")
    if not 0 < D < 2.0 * (r - 1.0):
        raise ConfigError(f"D must satisfy 0<D<2(r-1) = {2.0 * (r - 1.0):.6g}, got {D}")


def _sfbs_trial(st, F, J, L, rho, sigma, r):
    c = 1.0 / (2.0 * L) + rho
    alpha = r * c / (sigma + r * c)
    w = 1.0 - alpha
    T = st.fz + st.g_tilde
    z_tilde = w * st.z + alpha * st.u
    z_half = z_tilde - (w * (1.0 / L + 2.0 * rho)) * T
    f_half = F(z_half)
    arg = z_tilde - (1.0 / L) * f_half - (2.0 * rho * w) * T
    if J is None:
        z_new = arg
        g_new = np.zeros_like(arg)
    else:
        z_new = J(arg, 1.0 / L)
        g_new = L * (arg - z_new)
    return z_tilde, z_half, f_half, arg, z_new, g_new, F(z_new)


def _speg_trial(st, F, P, L, rho, sigma, r):
    c = 1.0 / (2.0 * L)
    alpha = r * c / (sigma + r * c)
    w = 1.0 - alpha
    z_tilde = w * st.z + alpha * st.u
    z_half = P(z_tilde - (w / L) * st.fz, 1.0 / L)
    f_half = F(z_half)
    arg = z_tilde - (1.0 / L) * f_half
    z_new = P(arg, 1.0 / L)
    return z_tilde, z_half, f_half, arg, z_new, L * (arg - z_new), F(z_new)


def _first_trial(state, policy):
    """Initial ``(L, rho, probing)`` of an outer step."""
    L = state.L * policy.L_shrink
    rho = state.rho
    if state.sigma > 0 and policy.rho_probe > 0:
        probe = min(rho + policy.rho_probe * (1.0 / (2.0 * L) + rho), policy.rho_max)
        if probe > rho:
            return L, probe, True
    return L, rho, False


def _search(state, policy, r, D, trial, check_rho, fixed_L=False, fixed_rho=False):
    _check_rD(r, D)
    st = state.inner
    L, rho, probing = _first_trial(state, policy)
    if fixed_L:
        L = state.L
    if fixed_rho:
        rho, probing = state.rho, False
    t_old = st.fz + st.g_tilde
    test_rho = check_rho and state.sigma > 0
    for attempt in range(policy.max_backtracks + 1):
        if not rho > -1.0 / (2.0 * L):
            raise LineSearchExhausted(f"rho = {rho} fell below -1/(2L) with L = {L}", state)
        z_tilde, z_half, f_half, arg, z_new, g_new, f_new = trial(st, L, rho, state.sigma)
        status = check_accept(st.z, z_new, z_half, t_old, f_new + g_new, f_new, f_half, L, rho, check_rho=test_rho)
        if status == "accepted":
            break
        if status == "reject_rho":
            if not probing:
                raise LineSearchExhausted(f"rho = {rho} rejected with no probe to roll back", state)
            rho, probing = state.rho, False
            continue
        if fixed_L:
            raise LineSearchExhausted(f"Lipschitz test failed with L fixed at {L}", state)
        L *= policy.L_growth
    else:
        raise LineSearchExhausted(f"no trial accepted within {policy.max_backtracks} backtracks", state)
    c = 1.0 / (2.0 * L) + rho
    u_new = st.u - (D / r) * c * (f_new + g_new)
    check_iterate(z_new, st, u_new)
    new_inner = replace(
        st, k=st.k + 1, z=z_new, u=u_new, z_tilde=z_tilde, z_half=z_half, fz=f_new, g_tilde=g_new, fhalf=f_half
    )
    return replace(
        state, inner=new_inner, L=L, rho=rho, sigma=state.sigma + c, backtracks=attempt,
        total_k=state.total_k + 1, resolvent_arg=arg,
    )


def sfbs_ls_step(state, problem, policy, r, D):
    """One accepted step of the line-search SFBS (SEG+ when ``G`` is absent)."""
    F, J = problem.f, problem.g

    def trial(st, L, rho, sigma):
        return _sfbs_trial(st, F, J, L, rho, sigma, r)

    return _search(state, policy, r, D, trial, check_rho=True)


def speg_ls_step(state, F, P, policy, r, D):
    """One accepted step of SPEG+ with Lipschitz backtracking (``rho`` fixed at 0)."""
    state = replace(state, rho=0.0, rho0=0.0)

    def trial(st, L, rho, sigma):
        return _speg_trial(st, F, P, L, 0.0, sigma, r)

    return _search(state, policy, r, D, trial, check_rho=False, fixed_rho=True)


def admm_accel_step(state, lasso, policy, r, D):
    """Line-search SFBS with ``F = 0`` and ``L_k = 1`` on the Douglas-Rachford resolvent.

    Only the ``rho`` test is active. ``state.resolvent_arg`` keeps the
    argument of the last sweep so that the primal pair can be recovered.
    """
    F, J = lasso.f, lasso.g

    def trial(st, L, rho, sigma):
        return _sfbs_trial(st, F, J, 1.0, rho, sigma, r)

    return _search(replace(state, L=1.0, L0=1.0), policy, r, D, trial, check_rho=True, fixed_L=True)


def admm_pair(state, lasso):
    """``(x_k, y_k)``: the least-squares and l1 halves of the last Douglas-Rachford sweep."""
    return lasso.g.split(state.resolvent_arg, 1.0)


def restart_policy(state):
    """Restart from the current iterate: ``z_0 = u_0 = z_k``, ``G~ = 0``, ``Sigma = 0``, hints reset."""
    st = state.inner
    inner_new = replace(st, k=0, u=st.z, z_tilde=st.z, z_half=st.z, g_tilde=np.zeros_like(st.z))
    return replace(
        state, inner=inner_new, L=state.L0, rho=state.rho0, sigma=0.0, restarts=state.restarts + 1,
        resolvent_arg=st.z,
    )


# --------------------------------------------------------------------------
# Line-search baselines: Lipschitz backtracking applied to projected EG / FEG
# --------------------------------------------------------------------------


def _baseline_search(state, policy, step):
    st = state.inner
    L = state.L * policy.L_shrink
    for attempt in range(policy.max_backtracks + 1):
        cand = step(st, L)
        status = check_accept(
            st.z, cand.z, cand.z_half, cand.fz, cand.fz, cand.fz, cand.fhalf, L, 0.0, check_rho=False
        )
        if status == "accepted":
            return replace(state, inner=cand, L=L, backtracks=attempt, total_k=state.total_k + 1)
        L *= policy.L_growth
    raise LineSearchExhausted(f"no trial accepted within {policy.max_backtracks} backtracks", state)


def eg_ls_step(state, F, policy):
    """Projected EG with step ``1/L_k`` and the Lipschitz acceptance test."""
    if not isinstance(state.inner, BaselineState):
        raise TypeError("eg_ls_step expects a line-search state wrapping a BaselineState")
    return _baseline_search(state, policy, lambda st, L: eg_step(st, F, 1.0 / L))


def feg_ls_step(state, F, policy, rho=0.0):
    """Projected FEG (``alpha_k = 1/(k+1)``) with the Lipschitz acceptance test."""
    if not isinstance(state.inner, BaselineState):
        raise TypeError("feg_ls_step expects a line-search state wrapping a BaselineState")
    return _baseline_search(
        state, policy, lambda st, L: feg_step(st, F, L, rho, 1.0 / (st.k + 1))
    )
