"""Experiment configuration, the solver loop, parameter sweeps and CSV output."""

import csv
import dataclasses
import math
import os
import time
from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Optional, Tuple

import numpy as np

from . import baselines as bl
from . import diagnostics as dg
from . import linesearch as ls
from . import symplectic as sy
from .exceptions import ConfigError, DivergenceError, InfeasibleError, InvariantViolation, LineSearchExhausted
from .operators import ResolventOracle, duality_gap
from .problems import PROBLEM_KINDS, ProblemSpec, game_solution
from .stochastic import NoiseSchedule, NoiseStream, sseg_init, sseg_step, validate_sseg

ALGOS = (
    "eg", "eg_plus", "eag", "feg", "sppa", "seg", "seg_plus", "sfbs", "speg_plus", "sfbs_ls", "speg_ls",
    "admm", "admm_accel", "sseg", "seg_vary", "seg_const", "eg_ls", "feg_ls",
)
LINESEARCH_ALGOS = ("sfbs_ls", "speg_ls", "admm_accel", "eg_ls", "feg_ls")
MONITORS = (
    "lyap_sfbs", "lyap_speg", "lyap_linesearch", "aux_g", "eg_descent", "rate_thm3_1", "rate_thm3_4",
    "rate_cor5_2", "summability", "small_o", "error_estimate", "step_floor", "scaled_residual",
    "linesearch_soundness",
)
CSV_HEADER = (
    "k", "res_sq", "dist_sq", "gap", "obj_gap", "split_res", "lyapunov", "L_k", "rho_k", "backtracks",
    "restarts", "time_ms",
)
DEFAULT_DENSE_UNTIL = 10000
DEFAULT_SPARSE_STRIDE = 10


@dataclass(frozen=True)
class RunConfig:
    algo: str = "sfbs"
    problem: str = "quadratic2d"
    m: int = 100
    n: int = 100
    mu: float = 0.1
    seed: int = 0
    r: float = 2.0
    D: Optional[float] = None
    L: Optional[float] = None
    rho: Optional[float] = None
    s: Optional[float] = None
    beta0: Optional[float] = None
    max_iters: int = 1000
    tol: float = 1e-6
    monitors: Tuple[str, ...] = ()
    out: Optional[str] = None
    plot: Optional[str] = None
    strict: bool = False
    stride: Optional[int] = None
    wall_seconds: Optional[float] = None
    timing: bool = False
    z0: Optional[Tuple[float, ...]] = None
    mixing: str = "analysis"
    noise: str = "decaying"
    eps: float = 1e-4
    E1: float = 1.0
    E2: float = 1.0
    ls_growth: float = 2.0
    ls_shrink: float = 1.0
    rho_probe: float = 0.1
    max_backtracks: int = 40
    restart: bool = True

    def problem_spec(self):
        return ProblemSpec(
            kind=self.problem, m=self.m, n=self.n, seed=self.seed, mu=self.mu,
            L=1.0 if self.L is None else self.L, rho=0.0 if self.rho is None else self.rho,
        )

    def policy(self):
        return ls.LineSearchPolicy(
            L_growth=self.ls_growth, L_shrink=self.ls_shrink, rho_probe=self.rho_probe,
            max_backtracks=self.max_backtracks, restart_enabled=self.restart,
        )


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(key, raw):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown configuration key {key!r}")
    default = _FIELD_TYPES[key].default
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none")):
        return None
    try:
        if key == "monitors":
            items = raw.split(",") if isinstance(raw, str) else list(raw)
            return tuple(x.strip() for x in items if x.strip())
        if key == "z0":
            items = raw.split(",") if isinstance(raw, str) else list(raw)
            return tuple(float(x) for x in items)
        if key in ("strict", "timing", "restart"):
            if isinstance(raw, bool):
                return raw
            return str(raw).strip().lower() in ("1", "true", "yes", "on")
        if key in ("m", "n", "seed", "max_iters", "stride", "max_backtracks"):
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if key in ("algo", "problem", "out", "plot", "mixing", "noise"):
            return str(raw)
        if isinstance(default, (int, float)) or default is None:
            return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse value {raw!r}") from None
    return raw


def parse_config(source=None, **overrides):
    """Build a validated :class:`RunConfig` from a ``key=value`` file and/or keyword overrides.

    Unknown keys are errors. ``SYMPLEX_SEED`` replaces the default seed when no
    seed is given explicitly.
    """
    values = {}
    if source is not None:
        with open(source) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
                key, raw = (part.strip() for part in line.split("=", 1))
                values[key] = _coerce(key, raw)
    for key, raw in overrides.items():
        if raw is not None:
            values[key] = _coerce(key, raw)
    if "seed" not in values and os.environ.get("SYMPLEX_SEED"):
        values["seed"] = _coerce("seed", os.environ["SYMPLEX_SEED"])
    values = {k: v for k, v in values.items() if v is not None}
    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


# --------------------------------------------------------------------------
# Algorithm adapters
# --------------------------------------------------------------------------


class _Adapter:
    """Uniform ``init / step / row`` interface over the different state types."""

    uses_u = True

    def __init__(self, cfg, problem):
        self.cfg = cfg
        self.problem = problem
        self.params = self.resolve_params()

    def resolve_params(self):
        return SimpleNamespace()

    def residual(self, state):
        return state.residual

    def vectors(self, state):
        fh = state.fhalf if getattr(state, "fhalf", None) is not None else state.fz
        return dict(
            z=state.z, u=getattr(state, "u", state.z), fz=state.fz, g_tilde=state.g_tilde,
            z_half=state.z_half, fhalf=fh,
        )

    def scalars(self, state):
        return {}

    def resolvent_arg(self, state):
        return None

    def initial_residual(self, state):
        """Norm of a genuine residual at ``z_0``, where ``g_tilde_0 = 0`` is only a convention.

        With a resolvent this is the forward-backward residual ``|z - J(z - sF(z))| / s``,
        which vanishes exactly at solutions.
        """
        J = getattr(self, "J", None) or self.problem.g
        if J is None:
            return _res_norm(self, state)
        z = state.z
        s = getattr(self.params, "s", None) or 1.0
        fz = self.problem.f(z)
        d = (z - J(z - s * fz, s)) / s
        return math.sqrt(float(d @ d))


def _hint_L(cfg, problem, default=None):
    if cfg.L is not None:
        return float(cfg.L)
    if problem.L is not None:
        return float(problem.L)
    if default is not None:
        return default
    raise ConfigError("L must be given for this problem (no Lipschitz metadata)")


def _hint_rho(cfg, problem):
    if cfg.rho is not None:
        return float(cfg.rho)
    return float(problem.rho or 0.0)


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _projection(problem):
    g = problem.g
    _require(g is not None and problem.name == "matrix_game", "this algorithm needs a projection-constrained problem")
    return g


def _unconstrained_or_projection(problem):
    _require(problem.name != "lasso", "this algorithm does not apply to the LASSO resolvent problem")
    return problem.g


class _Symplectic(_Adapter):
    def init(self, z0):
        return sy.symplectic_init(self.problem.f, z0, self.init_projection())

    def init_projection(self):
        return None


class _SFBS(_Symplectic):
    def resolve_params(self):
        cfg, P = self.cfg, self.problem
        L = _hint_L(cfg, P, default=1.0 if P.name == "lasso" else None)
        rho = _hint_rho(cfg, P)
        s = 1.0 / L if cfg.s is None else cfg.s
        theorem = "thm3_1" if s == 1.0 / L else "thm4_2"
        D = (cfg.r - 1.0) * (0.5 * s + rho) if cfg.D is None else cfg.D
        return sy.SymplecticConfig(r=cfg.r, D=D, L=L, rho=rho, s=s, theorem=theorem)

    def init_projection(self):
        return self.problem.g

    def step(self, state):
        return sy.sfbs_step(state, self.problem, self.params)

    def resolvent_arg(self, state):
        return None


class _SEGPlus(_SFBS):
    def resolve_params(self):
        _require(self.problem.g is None, "seg_plus needs an unconstrained problem (G absent)")
        return super().resolve_params()


class _SPEG(_Symplectic):
    def resolve_params(self):
        cfg, P = self.cfg, self.problem
        self.P = _projection(P)
        L = _hint_L(cfg, P)
        s = 1.0 / L if cfg.s is None else cfg.s
        D = 0.5 * (cfg.r - 1.0) * s if cfg.D is None else cfg.D
        return sy.SymplecticConfig(r=cfg.r, D=D, L=L, rho=0.0, s=s, theorem="thm3_4")

    def init_projection(self):
        return self.P

    def step(self, state):
        return sy.speg_step(state, self.problem.f, self.P, self.params)


class _SEG(_Symplectic):
    def resolve_params(self):
        cfg, P = self.cfg, self.problem
        _require(P.g is None, "seg needs an unconstrained problem")
        L = _hint_L(cfg, P)
        s = 1.0 / L if cfg.s is None else cfg.s
        D = 0.5 * (cfg.r - 1.0) * s if cfg.D is None else cfg.D
        return sy.SymplecticConfig(r=cfg.r, D=D, L=L, rho=0.0, s=s)

    def step(self, state):
        p = self.params
        return sy.seg_step(state, self.problem.f, p.r / (state.k + p.r), p.s, p.D / p.r)


class _SPPA(_Symplectic):
    def resolve_params(self):
        cfg, P = self.cfg, self.problem
        if P.g is not None:
            _require(P.name == "lasso", "sppa needs a resolvent problem (lasso) or a linear operator")
            self.J = P.g
        else:
            _require("M" in P.data, "sppa needs a resolvent problem (lasso) or a linear operator")
            M = np.asarray(P.data["M"])
            n = M.shape[0]
            self.J = ResolventOracle(lambda v, lam: np.linalg.solve(np.eye(n) + lam * M, v), name="linear")
        D = 0.5 * (cfg.r - 1.0) if cfg.D is None else cfg.D
        _require(cfg.r > 1, f"r must satisfy r > 1, got {cfg.r}")
        _require(0 < D < cfg.r - 1.0, f"D must satisfy 0<D<r-1 = {cfg.r - 1.0:.6g}, got {D}")
        return SimpleNamespace(r=cfg.r, D=D, L=1.0, rho=0.0, s=1.0)

    def init(self, z0):
        return sy.symplectic_init(None, z0)

    def step(self, state):
        return sy.sppa_step(state, self.J, self.params.r, self.params.D)

    def initial_residual(self, state):
        d = state.z - self.J(state.z, 1.0)
        return math.sqrt(float(d @ d))

    def resolvent_arg(self, state):
        return state.z_tilde


class _SEGVary(_Symplectic):
    def resolve_params(self):
        cfg, P = self.cfg, self.problem
        _require(P.g is None, f"{cfg.algo} needs an unconstrained problem")
        L = _hint_L(cfg, P)
        beta0 = 0.5 / L if cfg.beta0 is None else cfg.beta0
        D = 0.5 if cfg.D is None else cfg.D
        if cfg.algo == "seg_vary":
            sy.validate_seg_vary(beta0, cfg.r, D, L)
        else:
            _require(0 < beta0 < 1.0 / L, f"beta0 must lie in (0, 1/L), got {beta0}")
        _require(cfg.mixing in ("analysis", "printed"), "mixing must be 'analysis' or 'printed'")
        return SimpleNamespace(r=cfg.r, D=D, L=L, rho=0.0, s=beta0, beta0=beta0,
                               floor=sy.seg_vary_floor(beta0, cfg.r, D, L))

    def init(self, z0):
        return sy.symplectic_init(self.problem.f, z0, beta=self.params.beta0)

    def step(self, state):
        p = self.params
        if self.cfg.algo == "seg_vary":
            return sy.seg_vary_step(state, self.problem.f, p.r, p.D, p.L, self.cfg.mixing)
        return sy.seg_const_step(state, self.problem.f, p.r, p.beta0, p.L, self.cfg.mixing)

    def scalars(self, state):
        return {"beta": state.beta}


class _SSEG(_Adapter):
    def resolve_params(self):
        cfg, P = self.cfg, self.problem
        _require(P.g is None, "sseg needs an unconstrained problem")
        L = _hint_L(cfg, P)
        D = 0.5 if cfg.D is None else cfg.D
        validate_sseg(cfg.r, D)
        schedule = NoiseSchedule(kind=cfg.noise, E1=cfg.E1, E2=cfg.E2, eps=cfg.eps, r=cfg.r, base_seed=cfg.seed)
        self.stream = NoiseStream(schedule, seed=cfg.seed)
        return SimpleNamespace(r=cfg.r, D=D, L=L, rho=0.0, s=1.0 / L)

    def init(self, z0):
        return sseg_init(self.problem.f, z0, self.stream)

    def step(self, state):
        p = self.params
        return sseg_step(state, self.problem.f, p.L, p.r, p.D, self.stream)

    def vectors(self, state):
        zero = np.zeros_like(state.z)
        return dict(z=state.z, u=state.u, fz=state.fz, g_tilde=zero, z_half=state.z_half, fhalf=state.fz)


class _Baseline(_Adapter):
    uses_u = False

    def resolve_params(self):
        cfg, P = self.cfg, self.problem
        self.proj = _unconstrained_or_projection(P)
        L = _hint_L(cfg, P)
        rho = _hint_rho(cfg, P)
        return SimpleNamespace(r=cfg.r, D=cfg.D, L=L, rho=rho, s=cfg.s)

    def init(self, z0):
        return bl.baseline_init(self.problem.f, z0, self.proj)


class _EG(_Baseline):
    def resolve_params(self):
        p = super().resolve_params()
        default = 0.5 / p.L
        p.s = default if self.cfg.s is None else self.cfg.s
        _require(p.s > 0, "s must be positive")
        return p

    def step(self, state):
        if self.cfg.algo == "eg_plus":
            return bl.egplus_step(state, self.problem.f, self.params.s, 0.5)
        return bl.eg_step(state, self.problem.f, self.params.s)


class _EAG(_Baseline):
    def step(self, state):
        alpha, beta = bl.eag_defaults(state.k, self.params.L)
        return bl.eag_step(state, self.problem.f, alpha, beta)


class _FEG(_Baseline):
    def resolve_params(self):
        p = super().resolve_params()
        _require(1.0 / p.L + 2.0 * p.rho > 0, "FEG requires 1/L + 2 rho > 0")
        return p

    def step(self, state):
        return bl.feg_step(state, self.problem.f, self.params.L, self.params.rho, 1.0 / (state.k + 1))


class _ADMM(_Baseline):
    def resolve_params(self):
        _require(self.problem.name == "lasso", "admm needs a lasso problem")
        self.proj = None
        return SimpleNamespace(r=self.cfg.r, D=None, L=1.0, rho=0.0, s=1.0)

    def step(self, state):
        return bl.ppa_step(state, self.problem.g)

    def resolvent_arg(self, state):
        return state.z_half if state.k > 0 else None


class _LineSearch(_Adapter):
    def resolve_params(self):
        cfg, P = self.cfg, self.problem
        self.policy = cfg.policy()
        algo = cfg.algo
        if algo == "admm_accel":
            _require(P.name == "lasso", "admm_accel needs a lasso problem")
            L, rho = 1.0, _hint_rho(cfg, P)
        elif algo == "speg_ls":
            self.P = _projection(P)
            L, rho = _hint_L(cfg, P), 0.0
        elif algo == "sfbs_ls":
            L, rho = _hint_L(cfg, P, default=1.0 if P.name == "lasso" else None), _hint_rho(cfg, P)
        else:
            self.proj = _unconstrained_or_projection(P)
            L, rho = _hint_L(cfg, P), (_hint_rho(cfg, P) if algo == "feg_ls" else 0.0)
        D = 1.6 if cfg.D is None else cfg.D
        if algo in ("sfbs_ls", "speg_ls", "admm_accel"):
            ls._check_rD(cfg.r, D)
            _require(rho > -1.0 / (2.0 * L), f"rho must satisfy rho > -1/(2L) = {-0.5 / L:.6g}, got {rho}")
        return SimpleNamespace(r=cfg.r, D=D, L=L, rho=rho, s=1.0 / L)

    def init(self, z0):
        p, P = self.params, self.problem
        if self.cfg.algo in ("eg_ls", "feg_ls"):
            inner = bl.baseline_init(P.f, z0, self.proj)
        elif self.cfg.algo == "speg_ls":
            inner = sy.symplectic_init(P.f, z0, self.P)
        else:
            inner = sy.symplectic_init(P.f, z0, P.g if P.name == "matrix_game" else None)
        return ls.linesearch_init(inner, p.L, p.rho)

    def step(self, state):
        p, P, algo = self.params, self.problem, self.cfg.algo
        if algo == "sfbs_ls":
            return ls.sfbs_ls_step(state, P, self.policy, p.r, p.D)
        if algo == "speg_ls":
            return ls.speg_ls_step(state, P.f, self.P, self.policy, p.r, p.D)
        if algo == "admm_accel":
            return ls.admm_accel_step(state, P, self.policy, p.r, p.D)
        if algo == "eg_ls":
            return ls.eg_ls_step(state, P.f, self.policy)
        return ls.feg_ls_step(state, P.f, self.policy, p.rho)

    def residual(self, state):
        return state.inner.residual

    def vectors(self, state):
        return _Adapter.vectors(self, state.inner)

    def scalars(self, state):
        return {"L": state.L, "rho": state.rho, "sigma": state.sigma, "backtracks": state.backtracks,
                "restarts": state.restarts}

    def resolvent_arg(self, state):
        if self.cfg.algo == "admm_accel" and state.total_k > 0:
            return state.resolvent_arg
        return None


_ADAPTERS = {
    "eg": _EG, "eg_plus": _EG, "eag": _EAG, "feg": _FEG, "sppa": _SPPA, "seg": _SEG, "seg_plus": _SEGPlus,
    "sfbs": _SFBS, "speg_plus": _SPEG, "sfbs_ls": _LineSearch, "speg_ls": _LineSearch, "admm": _ADMM,
    "admm_accel": _LineSearch, "sseg": _SSEG, "seg_vary": _SEGVary, "seg_const": _SEGVary,
    "eg_ls": _LineSearch, "feg_ls": _LineSearch,
}


def make_adapter(cfg, problem=None):
    if cfg.algo not in ALGOS:
        raise ConfigError(f"algo: unknown algorithm {cfg.algo!r}; expected one of {ALGOS}")
    if problem is None:
        problem = cfg.problem_spec().build()
    return _ADAPTERS[cfg.algo](cfg, problem)


def validate_config(cfg):
    """Fail-closed validation; builds the problem to check algorithm compatibility."""
    if cfg.problem not in PROBLEM_KINDS:
        raise ConfigError(f"problem: unknown kind {cfg.problem!r}; expected one of {PROBLEM_KINDS}")
    if cfg.algo not in ALGOS:
        raise ConfigError(f"algo: unknown algorithm {cfg.algo!r}; expected one of {ALGOS}")
    for name in cfg.monitors:
        if name not in MONITORS:
            raise ConfigError(f"monitors: unknown monitor {name!r}; expected some of {MONITORS}")
    if cfg.max_iters < 0:
        raise ConfigError("max_iters must be nonnegative")
    if not cfg.tol >= 0:
        raise ConfigError("tol must be nonnegative")
    if cfg.stride is not None and cfg.stride < 1:
        raise ConfigError("stride must be a positive integer")
    if cfg.wall_seconds is not None and not cfg.wall_seconds > 0:
        raise ConfigError("wall_seconds must be positive")
    make_adapter(cfg)
    return cfg


# --------------------------------------------------------------------------
# Reference solutions and per-row metrics
# --------------------------------------------------------------------------


def reference_solution(problem):
    """``(z_star, label)``: known, exact LP equilibrium, or a long high-accuracy oracle run."""
    if problem.known_solution is not None:
        return np.asarray(problem.known_solution), "known"
    if problem.name == "matrix_game":
        cached = problem.data.get("_z_star")
        if cached is None:
            cached = game_solution(problem)
            problem.data["_z_star"] = cached
        return cached, "oracle (linear program)"
    if problem.name == "lasso":
        cached = problem.data.get("_z_star")
        if cached is None:
            # the sweep's fixed point is v* = x* + A^T(A x* - b) for the minimiser x*
            lasso = problem.data["lasso"]
            x = lasso.solution
            cached = problem.data["_z_star"] = x + lasso.A.T @ (lasso.A @ x - lasso.b)
        return cached, "oracle (proximal gradient minimiser)"
    return None, "unknown"


def default_z0(cfg, problem):
    if cfg.z0 is not None:
        z0 = np.asarray(cfg.z0, dtype=float)
        if z0.size != problem.dim:
            raise ConfigError(f"z0 has {z0.size} entries, expected {problem.dim}")
        return z0
    if problem.name == "quadratic2d":
        return np.array([1.0, 0.0])
    if problem.name == "matrix_game":
        m, n = problem.data["m"], problem.data["n"]
        return np.concatenate([np.full(m, 1.0 / m), np.full(n, 1.0 / n)])
    if problem.name == "lasso":
        return np.zeros(problem.dim)
    return np.random.default_rng([cfg.seed, 1]).standard_normal(problem.dim)


class _Metrics:
    def __init__(self, problem, z_star):
        self.problem = problem
        self.z_star = z_star
        self.lasso = problem.data.get("lasso")
        self._optimum = None

    def row(self, z, arg):
        out = {}
        P = self.problem
        if P.name == "matrix_game":
            m = P.data["m"]
            try:
                out["gap"] = duality_gap(z[:m], z[m:], P.data["A"])
            except InfeasibleError:
                pass
        elif self.lasso is not None and arg is not None:
            x, y = P.g.split(arg, 1.0)
            if self._optimum is None:
                self._optimum = self.lasso.optimum
            out["obj_gap"] = self.lasso.objective(y) - self._optimum
            out["split_res"] = float(np.linalg.norm(x - y))
        return out


# --------------------------------------------------------------------------
# Solver loop
# --------------------------------------------------------------------------


@dataclass
class RunResult:
    config: RunConfig
    trace: Optional[dg.Trace]
    summary: dict
    reports: list = field(default_factory=list)
    state: object = None

    @property
    def ok(self):
        return self.summary["status"] in ("converged", "max_iters", "wall_time") and all(
            r.passed for r in self.reports
        )


def _should_record(k, stride):
    if stride is None:
        return k <= DEFAULT_DENSE_UNTIL or k % DEFAULT_SPARSE_STRIDE == 0
    return k % stride == 0


def _res_norm(adapter, state):
    t = adapter.residual(state)
    return math.sqrt(float(t @ t))


def solve(cfg, problem=None, record=True, z_star=None):
    """Run the solver loop and return ``(state, trace_or_None, summary)`` without monitors."""
    adapter = make_adapter(cfg, problem)
    problem = adapter.problem
    z0 = default_z0(cfg, problem)
    state = adapter.init(z0)
    metrics = None
    builder = dg.TraceBuilder() if record else None
    timing = cfg.timing or cfg.wall_seconds is not None
    start = time.perf_counter()
    if record:
        if z_star is None:
            z_star, _ = reference_solution(problem)
        metrics = _Metrics(problem, z_star)

    def push(st, k):
        extra = dict(adapter.scalars(st))
        extra.update(metrics.row(adapter.vectors(st)["z"], adapter.resolvent_arg(st)))
        if timing:
            extra["time_ms"] = 1000.0 * (time.perf_counter() - start)
        builder.append(k, adapter.vectors(st), **extra)

    status, message = "max_iters", ""
    k = 0
    if record:
        push(state, 0)
    res = adapter.initial_residual(state)
    restarts = 0
    while True:
        if res <= cfg.tol:
            status = "converged"
            break
        if k >= cfg.max_iters:
            break
        if cfg.wall_seconds is not None and time.perf_counter() - start >= cfg.wall_seconds:
            status = "wall_time"
            break
        try:
            state = adapter.step(state)
        except LineSearchExhausted as exc:
            restartable = isinstance(state, ls.LineSearchState) and isinstance(state.inner, sy.SymplecticState)
            if cfg.restart and restartable and restarts < adapter.policy.max_restarts:
                if state.sigma == 0:
                    status, message = "exhausted", str(exc)
                    break
                if restarts > 0 and state.inner.k <= 1 and state.rho == state.rho0:
                    # rejected again straight after a restart: the initial hints themselves are infeasible
                    status = "exhausted"
                    message = f"{exc}; failed again right after a restart from the initial hints (L={state.L0}, rho={state.rho0})"
                    break
                state = ls.restart_policy(state)
                restarts += 1
                continue
            status, message = "exhausted", str(exc)
            break
        except (DivergenceError, InvariantViolation) as exc:
            status = "diverged" if isinstance(exc, DivergenceError) else "invariant_violation"
            message = str(exc)
            break
        k += 1
        res = _res_norm(adapter, state)
        if record and _should_record(k, cfg.stride):
            push(state, k)
    if record and builder.last_k != k:
        push(state, k)
    summary = {
        "algo": cfg.algo,
        "problem": problem.name,
        "seed": cfg.seed,
        "status": status,
        "iterations": k,
        "final_res": res,
        "restarts": restarts,
        "message": message,
    }
    trace = builder.build(meta={"algo": cfg.algo, "problem": problem.name}) if record else None
    return state, trace, summary, adapter


def run_monitors(trace, adapter, names, z_star):
    """Evaluate the named monitors on ``trace``; raise if one needs ``z_star`` and none exists."""
    p = adapter.params
    cfg = SimpleNamespace(r=p.r, D=p.D, L=p.L, rho=p.rho, s=getattr(p, "s", None))
    reports = []
    needs_star = {"lyap_sfbs", "lyap_speg", "lyap_linesearch", "aux_g", "eg_descent", "rate_thm3_1",
                  "rate_thm3_4", "rate_cor5_2", "summability"}
    for name in names:
        if name in needs_star and z_star is None:
            raise ConfigError(f"monitor {name} needs a reference solution, none available")
        if name == "lyap_sfbs":
            rep = dg.lyap_sfbs(trace, cfg, z_star)
        elif name == "lyap_speg":
            rep = dg.lyap_speg(trace, cfg, z_star)
        elif name == "lyap_linesearch":
            rep = dg.lyap_linesearch(trace, p.r, p.D, z_star)
        elif name == "aux_g":
            rep = dg.aux_g_trend(trace, cfg, z_star)
        elif name == "eg_descent":
            rep = dg.eg_descent_check(trace, p.s, p.L, z_star)
        elif name.startswith("rate_"):
            rep = dg.rate_bound_check(trace, cfg, z_star, name[len("rate_"):])
        elif name == "summability":
            rep = dg.summability_check(trace, cfg, z_star)
        elif name == "small_o":
            rep = dg.small_o_trend(trace)
        elif name == "error_estimate":
            rep = dg.error_estimate_check(trace, p.L, p.s)
        elif name == "step_floor":
            rep = dg.step_floor_check(trace, getattr(p, "floor", 0.0))
        elif name == "scaled_residual":
            rep = dg.scaled_residual_bound(trace, p.r)
        elif name == "linesearch_soundness":
            rep = dg.linesearch_soundness(trace, check_rho=adapter.cfg.algo in ("sfbs_ls", "admm_accel"))
        else:
            raise ConfigError(f"unknown monitor {name!r}")
        reports.append(rep)
    return reports


def run_experiment(cfg, problem=None):
    """Run, monitor and (if ``cfg.out`` is set) write the trace, monitor and summary files."""
    adapter = make_adapter(cfg, problem)
    problem = adapter.problem
    z_star, label = reference_solution(problem)
    state, trace, summary, adapter = solve(cfg, problem, record=True, z_star=z_star)
    reports = run_monitors(trace, adapter, cfg.monitors, z_star) if cfg.monitors else []
    summary["z_star"] = label
    summary["monitors_passed"] = int(all(r.passed for r in reports))
    result = RunResult(cfg, trace, summary, reports, state)
    if cfg.out:
        emit_csv(trace, cfg.out, _lyapunov_column(reports, len(trace)), z_star)
        _write_side_files(cfg.out, summary, reports)
    if cfg.plot:
        from .plotting import emit_svg_plot

        keep = trace.k > 0
        emit_svg_plot([(cfg.algo, trace.k[keep], trace.res_sq[keep])], cfg.plot, xlabel="iteration k",
                      ylabel="squared residual", logx=True, logy=True)
    return result


def _lyapunov_column(reports, n):
    for rep in reports:
        if rep.name.startswith("lyap") and len(rep.values) == n:
            return rep.values
    return None


def _write_side_files(out, summary, reports):
    base = out[:-4] if out.endswith(".csv") else out
    with open(base + ".summary.txt", "w") as fh:
        for key, value in summary.items():
            fh.write(f"{key}={value}\n")
        for rep in reports:
            fh.write(str(rep) + "\n")
    with open(base + ".monitors.csv", "w", newline="") as fh:
        cols = ["monitor", "passed", "inconclusive", "checked", "violations", "max_violation", "note"]
        writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for rep in reports:
            writer.writerow(rep.summary_row())


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------


def _cell(value):
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def emit_csv(trace, path, lyapunov=None, z_star=None):
    """Write the trace with the fixed column set; inapplicable cells are empty."""
    if trace is None or len(trace) == 0:
        raise ValueError("cannot write an empty trace")
    n = len(trace)
    res = trace.res_sq
    dist = trace.dist_sq(z_star) if z_star is not None else None
    lyap = np.asarray(lyapunov, dtype=float) if lyapunov is not None and len(lyapunov) == n else None
    s = trace.scalars
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc
    with fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for i in range(n):
            cells = [
                str(int(trace.k[i])),
                _cell(res[i]),
                _cell(dist[i] if dist is not None else None),
                _cell(s["gap"][i]),
                _cell(s["obj_gap"][i]),
                _cell(s["split_res"][i]),
                _cell(lyap[i] if lyap is not None else None),
                _cell(s["L"][i]),
                _cell(s["rho"][i]),
                "" if math.isnan(s["backtracks"][i]) else str(int(s["backtracks"][i])),
                "" if math.isnan(s["restarts"][i]) else str(int(s["restarts"][i])),
                _cell(s["time_ms"][i]),
            ]
            fh.write(",".join(cells) + "\n")


def read_csv(path):
    """Parse a trace or sweep CSV into a dict of arrays.

    Numeric columns become float arrays (empty cells are NaN); any column
    holding text, such as a sweep's status, is returned as a string array.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    out = {}
    for j, name in enumerate(header):
        cells = [row[j] for row in rows]
        try:
            out[name] = np.array([float(c) if c else np.nan for c in cells], dtype=float)
        except ValueError:
            out[name] = np.array(cells, dtype=str)
    return out


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------

SWEEPABLE = ("r", "D", "L", "rho", "s", "beta0", "mu", "tol", "eps", "E1", "E2")


def sweep_parameter(cfg, param, grid, out=None):
    """One lean run per grid value; returns ``(rows, argmin_value)``.

    Values that violate a constraint are recorded as ``skipped``. The argmin
    is taken over converged runs (first one on ties); ``None`` if none converged.
    """
    if param not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {param!r}; numeric parameters are {SWEEPABLE}")
    grid = list(grid)
    if not grid:
        raise ConfigError("sweep grid is empty")
    rows = []
    for value in grid:
        try:
            point = dataclasses.replace(cfg, **{param: float(value)})
            _, _, summary, _ = solve(point, record=False)
        except ConfigError as exc:
            rows.append({"param_value": float(value), "iterations_to_tol": None, "final_residual": None,
                         "status": "skipped", "message": str(exc)})
            continue
        rows.append({"param_value": float(value), "iterations_to_tol": summary["iterations"],
                     "final_residual": summary["final_res"], "status": summary["status"], "message": ""})
    done = [r for r in rows if r["status"] == "converged"]
    best = min(done, key=lambda r: r["iterations_to_tol"])["param_value"] if done else None
    if out:
        with open(out, "w", newline="") as fh:
            fh.write("param_value,iterations_to_tol,final_residual,status\n")
            for r in rows:
                fh.write(",".join([
                    repr(r["param_value"]),
                    "" if r["iterations_to_tol"] is None else str(r["iterations_to_tol"]),
                    _cell(r["final_residual"]),
                    r["status"],
                ]) + "\n")
    return rows, best
