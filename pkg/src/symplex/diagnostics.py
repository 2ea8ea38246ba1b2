"""Traces and runtime monitors that evaluate Lyapunov functions and rate bounds.

A :class:`Trace` stores one row per recorded iteration: the iterate ``z``,
the auxiliary ``u``, ``F(z)``, the surrogate ``g_tilde``, the half step and
its operator value, and scalar bookkeeping. Monitors are pure functions of
``(trace, parameters, z_star)`` returning a :class:`MonitorReport`. Checks
that compare iteration ``k`` with ``k + 1`` only use consecutive recorded
rows, so decimated traces stay valid but are checked more sparsely.
"""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .exceptions import ConfigError
from .linesearch import acceptance_slack

VECTOR_FIELDS = ("z", "u", "fz", "g_tilde", "z_half", "fhalf")
SCALAR_FIELDS = (
    "k", "L", "rho", "sigma", "backtracks", "restarts", "beta", "time_ms", "gap", "obj_gap", "split_res",
)
_TINY = 1e-300


class Trace:
    """Column store of recorded iterations; arrays are read-only once built."""

    def __init__(self, vectors, scalars, meta=None):
        n = len(scalars["k"])
        self.vectors = {}
        for name, arr in vectors.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape[0] != n:
                raise ValueError(f"vector column {name} has {arr.shape[0]} rows, expected {n}")
            arr.setflags(write=False)
            self.vectors[name] = arr
        self.scalars = {}
        for name in SCALAR_FIELDS:
            col = np.asarray(scalars.get(name, np.full(n, np.nan)), dtype=float)
            col.setflags(write=False)
            self.scalars[name] = col
        k = self.scalars["k"]
        if n and np.any(np.diff(k) <= 0):
            raise ValueError("trace rows must have strictly increasing k")
        self.meta = dict(meta or {})

    @classmethod
    def from_columns(cls, meta=None, **columns):
        vectors = {k: v for k, v in columns.items() if k in VECTOR_FIELDS}
        scalars = {k: v for k, v in columns.items() if k in SCALAR_FIELDS}
        unknown = set(columns) - set(VECTOR_FIELDS) - set(SCALAR_FIELDS)
        if unknown:
            raise ValueError(f"unknown trace columns {sorted(unknown)}")
        return cls(vectors, scalars, meta)

    def __len__(self):
        return len(self.scalars["k"])

    def __getattr__(self, name):
        d = self.__dict__
        if name in d.get("vectors", {}):
            return d["vectors"][name]
        if name in d.get("scalars", {}):
            return d["scalars"][name]
        raise AttributeError(name)

    def has(self, name):
        return name in self.vectors

    def require(self, *names):
        missing = [n for n in names if n not in self.vectors]
        if missing:
            raise ConfigError(f"trace lacks required columns {missing}")

    @property
    def k(self):
        return self.scalars["k"]

    @property
    def tres(self):
        """Rows of ``F(z_k) + g_tilde_k``."""
        if "g_tilde" in self.vectors:
            return self.vectors["fz"] + self.vectors["g_tilde"]
        return self.vectors["fz"]

    @property
    def res_sq(self):
        t = self.tres
        return np.einsum("ij,ij->i", t, t)

    def dist_sq(self, z_star):
        d = self.vectors["z"] - np.asarray(z_star, dtype=float)
        return np.einsum("ij,ij->i", d, d)

    def consecutive(self):
        """Indices ``i`` such that rows ``i`` and ``i + 1`` are iterations ``k`` and ``k + 1``."""
        return np.nonzero(np.diff(self.k) == 1)[0]


class TraceBuilder:
    """Append-only accumulator producing a :class:`Trace`."""

    def __init__(self, vector_fields=VECTOR_FIELDS):
        self._vec = {name: [] for name in vector_fields}
        self._sca = {name: [] for name in SCALAR_FIELDS}

    def append(self, k, vectors, **scalars):
        for name, rows in self._vec.items():
            rows.append(np.array(vectors[name], dtype=float))
        for name, rows in self._sca.items():
            rows.append(float(k) if name == "k" else scalars.get(name, np.nan))

    @property
    def last_k(self):
        return int(self._sca["k"][-1]) if self._sca["k"] else None

    def __len__(self):
        return len(self._sca["k"])

    def build(self, meta=None):
        dim = None
        vectors = {}
        for name, rows in self._vec.items():
            if rows:
                vectors[name] = np.vstack(rows)
            else:
                vectors[name] = np.zeros((0, dim or 0))
        return Trace(vectors, {k: np.asarray(v, dtype=float) for k, v in self._sca.items()}, meta)


@dataclass
class MonitorReport:
    name: str
    values: np.ndarray
    violations: List[Tuple[int, float]] = field(default_factory=list)
    max_violation: float = 0.0
    tolerance: float = 0.0
    inconclusive: bool = False
    note: str = ""
    checked: int = 0

    @property
    def passed(self):
        return not self.inconclusive and self.max_violation <= self.tolerance

    def summary_row(self):
        return {
            "monitor": self.name,
            "passed": int(self.passed),
            "inconclusive": int(self.inconclusive),
            "checked": self.checked,
            "violations": len(self.violations),
            "max_violation": repr(float(self.max_violation)),
            "note": self.note,
        }

    def __str__(self):
        status = "INCONCLUSIVE" if self.inconclusive else ("PASS" if self.passed else "FAIL")
        text = f"{self.name}: {status} (checked {self.checked}, violations {len(self.violations)}, "
        text += f"max slack {self.max_violation:.3e}, tol {self.tolerance:.1e})"
        return text + (f" - {self.note}" if self.note else "")


def _report(name, values, slacks, ks, tol, note="", inconclusive=False):
    slacks = np.asarray(slacks, dtype=float)
    viol = [(int(k), float(s)) for k, s in zip(ks, slacks) if s > tol]
    worst = float(np.max(slacks)) if slacks.size else 0.0
    return MonitorReport(
        name, np.asarray(values, dtype=float), viol, max(worst, 0.0) if slacks.size else 0.0, tol,
        inconclusive, note, int(slacks.size),
    )


def _rows_dot(a, b):
    return np.einsum("ij,ij->i", a, b)


def _non_increase(name, values, trace, tol, mask=None):
    idx = trace.consecutive()
    if mask is not None:
        idx = idx[mask[idx]]
    scale = max(abs(values[0]), _TINY) if len(values) else 1.0
    slacks = (values[idx + 1] - values[idx]) / scale
    return _report(name, values, slacks, trace.k[idx + 1], tol)


# --------------------------------------------------------------------------
# Lyapunov functions
# --------------------------------------------------------------------------


def sfbs_energy(trace, r, D, s, rho, z_star):
    """``[D k^2 s/2 + rho D k (k - r)] |T~|^2 + D r k <T~, z - u> + (r^3 - r^2)/2 |u - z*|^2``."""
    trace.require("z", "u", "fz")
    k = trace.k
    t = trace.tres
    du = trace.u - np.asarray(z_star, dtype=float)
    coef = D * k * k * s / 2.0 + rho * D * k * (k - r)
    return (
        coef * _rows_dot(t, t)
        + D * r * k * _rows_dot(t, trace.z - trace.u)
        + 0.5 * (r**3 - r**2) * _rows_dot(du, du)
    )


def lyap_sfbs(trace, cfg, z_star, rtol=1e-12):
    """Non-increase of the SFBS energy (step ``cfg.s``)."""
    values = sfbs_energy(trace, cfg.r, cfg.D, cfg.s, cfg.rho, z_star)
    return _non_increase("lyap_sfbs", values, trace, rtol)


def lyap_speg(trace, cfg, z_star, rtol=1e-12):
    """Non-increase of the SPEG+ energy (the SFBS energy with ``rho = 0``)."""
    values = sfbs_energy(trace, cfg.r, cfg.D, cfg.s, 0.0, z_star)
    return _non_increase("lyap_speg", values, trace, rtol)


def linesearch_energy(trace, r, D, z_star):
    """Energy with ``Sigma_k`` in place of ``k / (2L)``; ``rho`` column holds ``rho_{k-1}``."""
    trace.require("z", "u", "fz")
    sig = trace.sigma
    rho_prev = np.nan_to_num(trace.rho)
    t = trace.tres
    du = trace.u - np.asarray(z_star, dtype=float)
    return (
        D * (sig * sig - r * rho_prev * sig) * _rows_dot(t, t)
        + D * r * sig * _rows_dot(t, trace.z - trace.u)
        + 0.5 * (r**3 - r**2) * _rows_dot(du, du)
    )


def comonotone_condition(trace, z_star, rtol=1e-12):
    """Per row: does ``<T~(z_k), z_k - z*> >= rho_{k-1} |T~(z_k)|^2`` hold?"""
    t = trace.tres
    dz = trace.z - np.asarray(z_star, dtype=float)
    lhs = _rows_dot(t, dz)
    rhs = np.nan_to_num(trace.rho) * _rows_dot(t, t)
    scale = np.sqrt(_rows_dot(t, t) * _rows_dot(dz, dz)) + np.abs(rhs)
    return lhs >= rhs - rtol * scale


def lyap_linesearch(trace, r, D, z_star, rtol=1e-12):
    """Non-increase of the line-search energy across steps where the pointwise condition held.

    Pairs that straddle a restart are skipped.
    """
    values = linesearch_energy(trace, r, D, z_star)
    cond = comonotone_condition(trace, z_star)
    idx = trace.consecutive()
    same_seg = trace.restarts[idx + 1] == trace.restarts[idx]
    keep = idx[same_seg & cond[idx + 1]]
    scale = max(abs(values[0]), _TINY)
    slacks = (values[keep + 1] - values[keep]) / scale
    skipped = int(same_seg.sum() - keep.size)
    note = f"{skipped} steps skipped where the pointwise condition failed" if skipped else ""
    return _report("lyap_linesearch", values, slacks, trace.k[keep + 1], rtol, note)


def aux_g_values(trace, r, D, s, rho, z_star):
    """Auxiliary function ``1/2|z-u|^2 + r/(2D) ((k+r)/k)^2 (s + 2rho - D/r) |u - z*|^2`` (NaN at k=0)."""
    k = trace.k
    du = trace.u - np.asarray(z_star, dtype=float)
    zu = trace.z - trace.u
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(k > 0, ((k + r) / np.where(k > 0, k, 1.0)) ** 2, np.nan)
    return 0.5 * _rows_dot(zu, zu) + (r / (2.0 * D)) * ratio * (s + 2.0 * rho - D / r) * _rows_dot(du, du)


def aux_phi_values(trace, i, r, D, s, rho):
    """Correction term ``phi(k)`` for consecutive row pairs ``(i, i+1)``.

    The cross terms are bounded with Young's inequality, which needs
    ``|rho|`` so the bound stays valid for negative ``rho``.
    """
    k = trace.k[i]
    t0 = trace.tres[i]
    t1 = trace.tres[i + 1]
    df = trace.fz[i + 1] - trace.fhalf[i + 1]
    df2 = _rows_dot(df, df)
    q = (k + r) / k
    mix = t0 - q[:, None] * t1
    mix2 = _rows_dot(mix, mix)
    t12 = _rows_dot(t1, t1)
    a = s + 2.0 * rho - D / r
    arho = abs(rho)
    return (
        (k + r) ** 4 * s * s / (2.0 * k * k * (2.0 * k + r)) * df2
        - q * q * a * (rho + D / (2.0 * r)) * t12
        + q * arho * s * (df2 + mix2)
        + q * a * arho * s * (mix2 + t12)
    )


def aux_g_trend(trace, cfg, z_star, rtol=1e-10, min_horizon=100):
    """``G(k) + sum_{i>=k} phi(i)`` non-increasing (tail truncated at the horizon), and
    decreasing decade tails of ``sum |z_k - u_k|^2 / k``.

    The truncated tail makes this a necessary condition only.
    """
    trace.require("z", "u", "fz", "fhalf")
    r, D, s, rho = cfg.r, cfg.D, cfg.s, cfg.rho
    G = aux_g_values(trace, r, D, s, rho, z_star)
    idx = trace.consecutive()
    idx = idx[trace.k[idx] >= 1]
    horizon = int(trace.k[-1]) if len(trace) else 0
    if horizon < min_horizon or idx.size == 0:
        return MonitorReport("aux_g_trend", G, tolerance=rtol, inconclusive=True,
                             note=f"horizon {horizon} < {min_horizon}")
    phi = aux_phi_values(trace, idx, r, D, s, rho)
    dG = G[idx + 1] - G[idx]
    scale = max(np.nanmax(np.abs(G)), _TINY)
    slacks = (dG - phi) / scale
    report = _report("aux_g_trend", G, slacks, trace.k[idx + 1], rtol)
    zu = trace.z - trace.u
    k = trace.k
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(k > 0, _rows_dot(zu, zu) / np.where(k > 0, k, 1.0), 0.0)
    notes = []
    for lo, mid, hi in ((10, 100, 1000), (100, 1000, 10000), (1000, 10000, 100000)):
        if horizon < hi:
            break
        a = terms[(k >= lo) & (k < mid)].sum()
        b = terms[(k >= mid) & (k < hi)].sum()
        notes.append(f"tail[{mid},{hi})={b:.3e} vs tail[{lo},{mid})={a:.3e}")
        if not b < a and a > 0:
            report.violations.append((hi, float(b - a)))
            report.max_violation = max(report.max_violation, np.inf)
    report.note = "; ".join(notes)
    return report


# --------------------------------------------------------------------------
# Descent and rate-bound checks
# --------------------------------------------------------------------------


def eg_descent_check(trace, s, L, z_star, atol=1e-12):
    """``|z_{k+1}-z*|^2 <= |z_k-z*|^2 - (1 - s^2 L^2) s^2 |F(z_k)|^2`` (+ tolerance)."""
    d = trace.dist_sq(z_star)
    f2 = _rows_dot(trace.fz, trace.fz)
    idx = trace.consecutive()
    rhs = d[idx] - (1.0 - s * s * L * L) * s * s * f2[idx]
    slacks = (d[idx + 1] - rhs) / np.maximum(1.0, d[idx])
    return _report("eg_descent", d, slacks, trace.k[idx + 1], atol)


def rate_constant(r, D, s, rho=0.0):
    """``r^2 (r-1)^2 / ((r-1)(s + 2 rho) D - D^2)``: bound on ``k^2 |T~|^2 / dist^2``; ``inf`` if vacuous."""
    den = (r - 1.0) * (s + 2.0 * rho) * D - D * D
    # at the boundary D = (r-1)(s+2rho) the denominator is zero up to rounding
    return np.inf if den <= 1e-12 * D * D else r * r * (r - 1.0) ** 2 / den


def rate_bound_check(trace, cfg, z_star, theorem="thm3_1", rtol=1e-10):
    """Check the printed last-iterate bound at every recorded ``k >= 1``.

    ``thm3_1``: ``k^2 |T~|^2 <= C dist0^2`` with :func:`rate_constant`.
    ``thm3_4``: the same with ``rho = 0`` plus ``<T~, z - z*> <= (r^2 - r)/(2 D k) dist0^2``.
    ``cor5_2``: ``|T~|^2 <= r^2 (r-1)^2 / ((2(r-1)D - D^2) Sigma_k^2) dist0^2`` on the prefix
    where the pointwise comonotone condition held at every step.
    """
    if z_star is None:
        raise ConfigError("rate_bound_check needs a reference solution")
    z_star = np.asarray(z_star, dtype=float)
    r, D = cfg.r, cfg.D
    d0 = float(np.sum((trace.z[0] - z_star) ** 2))
    res = trace.res_sq
    k = trace.k
    mask = k >= 1
    name = f"rate_{theorem}"
    if theorem in ("thm3_1", "thm3_4"):
        rho = cfg.rho if theorem == "thm3_1" else 0.0
        C = rate_constant(r, D, cfg.s, rho)
        bound = C * d0
        values = k * k * res
        if not np.isfinite(C):
            return MonitorReport(name, values, tolerance=rtol, note="bound is vacuous at this D (boundary)")
        slacks = (values[mask] - bound) / max(bound, _TINY)
        report = _report(name, values, slacks, k[mask], rtol)
        if theorem == "thm3_4":
            ip = _rows_dot(trace.tres, trace.z - z_star)
            ip_bound = (r * r - r) / (2.0 * D * k[mask]) * d0
            ip_slacks = (ip[mask] - ip_bound) / np.maximum(ip_bound, _TINY)
            extra = _report(name, ip, ip_slacks, k[mask], rtol)
            report.violations += extra.violations
            report.max_violation = max(report.max_violation, extra.max_violation)
            report.checked += extra.checked
        return report
    if theorem == "cor5_2":
        cond = comonotone_condition(trace, z_star)
        first_seg = trace.restarts == trace.restarts[0]
        ok = np.logical_and.accumulate(first_seg & (cond | (k == 0)))
        sel = mask & ok
        sig = trace.sigma
        den = 2.0 * (r - 1.0) * D - D * D
        with np.errstate(divide="ignore"):
            bound = r * r * (r - 1.0) ** 2 / (den * sig * sig) * d0
        slacks = (res[sel] - bound[sel]) / np.maximum(bound[sel], _TINY)
        note = "" if ok.all() else f"checked prefix up to k={int(k[ok][-1])}"
        return _report(name, res / np.where(np.isfinite(bound), bound, np.inf), slacks, k[sel], rtol, note)
    raise ConfigError(f"unknown theorem {theorem!r}")


def summability_check(trace, cfg, z_star, rtol=1e-10):
    """Partial sums of ``1/2 [(r-1)(s+2rho) - D] (2k+r+1) |T~(z_{k+1})|^2`` stay below ``(r^3-r^2)/(2D) dist0^2``."""
    r, D, s, rho = cfg.r, cfg.D, cfg.s, cfg.rho
    k = trace.k
    if len(trace) < 2 or not np.array_equal(k, np.arange(k[0], k[0] + len(k))):
        return MonitorReport("summability", np.zeros(len(trace)), tolerance=rtol, inconclusive=True,
                             note="needs every iteration recorded")
    d0 = float(np.sum((trace.z[0] - np.asarray(z_star)) ** 2))
    res = trace.res_sq
    terms = 0.5 * ((r - 1.0) * (s + 2.0 * rho) - D) * (2.0 * k[:-1] + r + 1.0) * res[1:]
    partial = np.cumsum(terms)
    bound = (r**3 - r**2) / (2.0 * D) * d0
    slacks = (partial - bound) / max(bound, _TINY)
    return _report("summability", partial, slacks, k[1:], rtol)


def small_o_trend(trace, k_min=1000, min_horizon=10000, threshold=-0.1, floor=1e-28):
    """Least-squares slope of ``log(k^2 |T~|^2)`` against ``log k`` over ``[k_min, horizon]``.

    Passes when the slope is below ``threshold``. Rows whose residual has
    reached ``floor`` times the initial residual are at rounding level and
    are excluded.
    """
    k = trace.k
    res = trace.res_sq
    horizon = int(k[-1]) if len(k) else 0
    values = k * k * res
    if horizon < min_horizon:
        return MonitorReport("small_o_trend", values, tolerance=threshold, inconclusive=True,
                             note=f"horizon {horizon} < {min_horizon}")
    sel = (k >= k_min) & (res > floor * max(res[0], _TINY))
    if sel.sum() < 10:
        return MonitorReport("small_o_trend", values, tolerance=threshold, inconclusive=True,
                             note="residual at rounding level over the window")
    slope = float(np.polyfit(np.log(k[sel]), np.log(values[sel]), 1)[0])
    report = MonitorReport("small_o_trend", values, tolerance=0.0, checked=int(sel.sum()),
                           note=f"slope {slope:.4f} (threshold {threshold})")
    report.max_violation = max(slope - threshold, 0.0)
    if slope >= threshold:
        report.violations.append((horizon, slope))
    return report


def error_estimate_constant(L, s, C1=None):
    """``C = L^2 s^2 C2 / (1 - L^2 s^2 C1)`` with ``C2 = C1/(C1-1)``; default ``C1`` halfway to ``1/(L s)^2``."""
    ls2 = (L * s) ** 2
    if not ls2 < 1:
        raise ConfigError("the error estimate needs s < 1/L")
    if C1 is None:
        C1 = 0.5 * (1.0 + 1.0 / ls2)
    if not (C1 > 1 and ls2 * C1 < 1):
        raise ConfigError(f"C1 must satisfy 1 < C1 < 1/(L s)^2, got {C1}")
    return ls2 * (C1 / (C1 - 1.0)) / (1.0 - ls2 * C1)


def error_estimate_check(trace, L, s, C1=None, rtol=1e-10):
    """``|F(z_{k+1}) - F(z_{k+1/2})|^2 <= C |T~(z_{k+1}) - T~(z_k)|^2`` along the trajectory."""
    C = error_estimate_constant(L, s, C1)
    idx = trace.consecutive()
    idx = idx[trace.k[idx] >= 1]
    t = trace.tres
    df = trace.fz[idx + 1] - trace.fhalf[idx + 1]
    dt = t[idx + 1] - t[idx]
    lhs = _rows_dot(df, df)
    rhs = C * _rows_dot(dt, dt)
    slacks = (lhs - rhs) / np.maximum(rhs, _TINY)
    slacks = np.where((lhs == 0) & (rhs == 0), 0.0, slacks)
    return _report("error_estimate", lhs, slacks, trace.k[idx + 1], rtol, f"C = {C:.6g}")


def step_floor_check(trace, floor, rtol=1e-12):
    """Step sizes non-increasing and never below ``floor``."""
    beta = trace.beta
    idx = trace.consecutive()
    inc = (beta[idx + 1] - beta[idx]) / max(beta[0], _TINY)
    low = (floor - beta) / max(beta[0], _TINY)
    slacks = np.concatenate([inc, low])
    ks = np.concatenate([trace.k[idx + 1], trace.k])
    return _report("step_floor", beta, slacks, ks, rtol, f"floor {floor:.6g}")


def scaled_residual_bound(trace, r, ref_k=10, factor=10.0, k_max=None):
    """``k(k + 2r - 2)|F(z_k)|^2`` stays within ``factor`` times its value at ``ref_k``."""
    k = trace.k
    f2 = _rows_dot(trace.fz, trace.fz)
    values = k * (k + 2.0 * r - 2.0) * f2
    at = np.nonzero(k == ref_k)[0]
    if at.size == 0:
        return MonitorReport("scaled_residual", values, inconclusive=True, note=f"k={ref_k} not recorded")
    ref = values[at[0]]
    sel = k >= ref_k
    if k_max is not None:
        sel &= k <= k_max
    slacks = values[sel] / max(ref, _TINY) - factor
    return _report("scaled_residual", values, slacks, k[sel], 0.0, f"reference {ref:.6g} at k={ref_k}")


def linesearch_soundness(trace, check_rho=True, rtol=1e-12):
    """Re-evaluate both acceptance conditions on every recorded accepted step.

    Row ``i + 1`` carries the ``(L, rho)`` accepted for the step from row ``i``.
    The ``rho`` test is only re-evaluated where it was applied (positive
    step-size sum). Also checks that ``rho`` never decreases between restarts.
    """
    trace.require("z", "fz", "z_half", "fhalf")
    idx = trace.consecutive()
    idx = idx[trace.restarts[idx + 1] == trace.restarts[idx]]
    t = trace.tres
    slacks, ks = [], []
    for i in idx:
        rs, ls = acceptance_slack(
            trace.z[i], trace.z[i + 1], trace.z_half[i + 1], t[i], t[i + 1], trace.fz[i + 1],
            trace.fhalf[i + 1], trace.L[i + 1], trace.rho[i + 1],
        )
        tested = check_rho and trace.sigma[i] > 0
        slacks.append(max(-rs if tested else 0.0, -ls))
        ks.append(trace.k[i + 1])
    rho = trace.rho
    pairs = idx[trace.k[idx] >= 1] if idx.size else idx
    drop = [max(rho[i] - rho[i + 1], 0.0) for i in pairs if np.isfinite(rho[i]) and trace.sigma[i] > 0]
    report = _report("linesearch_soundness", np.asarray(slacks), np.asarray(slacks), ks, rtol)
    if drop and max(drop) > 0:
        report.violations.append((-1, float(max(drop))))
        report.max_violation = max(report.max_violation, float(max(drop)) + rtol)
    return report
