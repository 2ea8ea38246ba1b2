"""Symplectic extragradient solvers for monotone and comonotone inclusions."""

from .baselines import BaselineState, baseline_init, eag_step, eg_step, egplus_step, feg_step, halpern_step
from .diagnostics import MonitorReport, Trace, TraceBuilder
from .estimators import InclusionSolver, MatrixGameSolver, SymplecticLasso
from .exceptions import (
    ConfigError,
    DivergenceError,
    InfeasibleError,
    InvariantViolation,
    LineSearchExhausted,
    SymplexError,
)
from .linesearch import (
    LineSearchPolicy,
    LineSearchState,
    admm_accel_step,
    check_accept,
    linesearch_init,
    restart_policy,
    sfbs_ls_step,
    speg_ls_step,
)
from .operators import (
    CompositeProblem,
    MapOracle,
    ResolventOracle,
    admm_resolvent,
    duality_gap,
    inner,
    project_product_simplex,
    project_simplex,
    prox_least_squares,
    soft_threshold,
)
from .problems import (
    ProblemSpec,
    make_comonotone_linear,
    make_lasso,
    make_matrix_game,
    make_quadratic2d,
    make_random_monotone,
)
from .runner import RunConfig, parse_config, run_experiment, sweep_parameter
from .stochastic import NoiseSchedule, NoiseStream, sseg_step
from .symplectic import (
    SymplecticConfig,
    SymplecticState,
    seg_const_step,
    seg_step,
    seg_vary_step,
    sfbs_step,
    speg_step,
    sppa_step,
    symplectic_init,
)

__version__ = "0.1.0"
