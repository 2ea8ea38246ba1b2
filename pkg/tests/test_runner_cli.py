import hashlib
import time

import numpy as np
import pytest

from symplex import diagnostics as dg
from symplex.cli import main, parse_grid
from symplex.estimators import InclusionSolver, MatrixGameSolver, SymplecticLasso
from symplex.exceptions import ConfigError
from symplex.plotting import emit_svg_plot
from symplex.problems import make_quadratic2d
from symplex.runner import (
    ALGOS,
    CSV_HEADER,
    emit_csv,
    parse_config,
    read_csv,
    run_experiment,
    solve,
    sweep_parameter,
)

HEADER = "k,res_sq,dist_sq,gap,obj_gap,split_res,lyapunov,L_k,rho_k,backtracks,restarts,time_ms"


def test_parse_config_file_and_overrides(tmp_path, monkeypatch):
    monkeypatch.delenv("SYMPLEX_SEED", raising=False)
    path = tmp_path / "run.cfg"
    path.write_text("# matrix game preset\nalgo = speg_ls\nproblem = matrix_game\nD = 1.6\nr = 2\nm=10\nn=10\n")
    cfg = parse_config(path, seed=4)
    assert (cfg.algo, cfg.D, cfg.m, cfg.seed) == ("speg_ls", 1.6, 10, 4)
    path.write_text("algo = sfbs\ncolour = blue\n")
    with pytest.raises(ConfigError, match="colour"):
        parse_config(path)
    path.write_text("just words\n")
    with pytest.raises(ConfigError, match="key=value"):
        parse_config(path)


def test_parse_config_constraint_messages(monkeypatch):
    with pytest.raises(ConfigError, match=r"D must satisfy 0<D<=\(r-1\)\(1/L\+2rho\)"):
        parse_config(algo="sfbs", problem="quadratic2d", D=0.5)
    with pytest.raises(ConfigError, match="max_iters"):
        parse_config(max_iters="ten")
    with pytest.raises(ConfigError, match="algo"):
        parse_config(algo="adam")
    with pytest.raises(ConfigError, match="constrained"):
        parse_config(algo="speg_plus", problem="quadratic2d")
    with pytest.raises(ConfigError, match="monitors"):
        parse_config(monitors="lyap_everything")
    monkeypatch.setenv("SYMPLEX_SEED", "17")
    assert parse_config().seed == 17
    assert parse_config(seed=3).seed == 3


@pytest.mark.parametrize("algo", ALGOS)
def test_every_algorithm_runs(algo):
    problem = {"sppa": "lasso", "admm": "lasso", "admm_accel": "lasso", "speg_plus": "matrix_game",
               "speg_ls": "matrix_game", "eg_ls": "matrix_game", "feg_ls": "matrix_game"}.get(algo, "random_monotone")
    cfg = parse_config(algo=algo, problem=problem, m=8, n=10, max_iters=50, seed=1)
    res = run_experiment(cfg)
    assert res.summary["status"] in ("converged", "max_iters")
    assert res.trace.k[0] == 0 and res.trace.k[-1] == res.summary["iterations"]
    assert np.all(np.isfinite(res.trace.res_sq))


def test_quadratic_preset_reaches_tolerance():
    res = run_experiment(parse_config(algo="sfbs", problem="quadratic2d", D=1 / 6, max_iters=100000))
    assert res.summary["status"] == "converged"
    assert res.summary["final_res"] <= 1e-6


def test_zero_iteration_run_at_solution():
    res = run_experiment(parse_config(algo="sfbs", problem="quadratic2d", z0="0,0"))
    assert res.summary["iterations"] == 0 and res.summary["status"] == "converged"
    assert len(res.trace) == 1
    res = run_experiment(parse_config(algo="admm", problem="lasso", m=5, n=4, tol=1e-9, max_iters=5000))
    z = res.state.z
    again = run_experiment(parse_config(algo="admm", problem="lasso", m=5, n=4, tol=1e-6,
                                        z0=",".join(repr(float(x)) for x in z)))
    assert again.summary["iterations"] == 0


def test_divergence_recorded():
    res = run_experiment(parse_config(algo="eg", problem="random_monotone", n=4, s=5.0, max_iters=10000))
    assert res.summary["status"] == "diverged"
    assert "exceeded" in res.summary["message"] or "non-finite" in res.summary["message"]
    assert not res.ok


def test_decimation_keeps_first_and_last():
    cfg = parse_config(algo="sfbs", problem="random_monotone", n=4, max_iters=10537, tol=0)
    _, tr, summary, _ = solve(cfg)
    k = tr.k.astype(int)
    assert k[0] == 0 and k[-1] == 10537 == summary["iterations"]
    assert np.array_equal(k[:10001], np.arange(10001))
    assert np.all(k[10001:-1] % 10 == 0)
    cfg = parse_config(algo="sfbs", problem="random_monotone", n=4, max_iters=95, tol=0, stride=7)
    _, tr, _, _ = solve(cfg)
    assert tr.k[0] == 0 and tr.k[-1] == 95 and np.all(tr.k[1:-1] % 7 == 0)


def test_csv_contract_and_determinism(tmp_path):
    paths = []
    for i in range(2):
        out = tmp_path / f"t{i}.csv"
        cfg = parse_config(algo="sfbs_ls", problem="matrix_game", m=6, n=5, max_iters=200,
                           monitors="lyap_linesearch,linesearch_soundness", out=str(out))
        run_experiment(cfg)
        paths.append(out)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    text = paths[0].read_text().splitlines()
    assert text[0] == HEADER == ",".join(CSV_HEADER)
    data = read_csv(paths[0])
    assert np.all(np.isfinite(data["gap"])) and np.all(np.isnan(data["obj_gap"]))
    assert np.all(np.isfinite(data["lyapunov"][1:]))
    side = (tmp_path / "t0.monitors.csv").read_text().splitlines()
    assert side[0].startswith("monitor,passed") and len(side) == 3


def test_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(0)
    n = 50
    tr = dg.Trace.from_columns(k=np.arange(n), z=rng.normal(size=(n, 3)), fz=rng.normal(size=(n, 3)),
                               L=rng.random(n), backtracks=np.zeros(n))
    path = tmp_path / "r.csv"
    emit_csv(tr, path, lyapunov=rng.random(n), z_star=np.zeros(3))
    data = read_csv(path)
    np.testing.assert_array_equal(data["res_sq"], tr.res_sq)
    np.testing.assert_array_equal(data["L_k"], tr.L)
    np.testing.assert_array_equal(data["dist_sq"], tr.dist_sq(np.zeros(3)))
    assert np.all(np.isnan(data["rho_k"]))
    with pytest.raises(ValueError):
        emit_csv(dg.Trace.from_columns(k=[], z=np.zeros((0, 2))), path)
    with pytest.raises(OSError, match="nonexistent"):
        emit_csv(tr, tmp_path / "nonexistent" / "x.csv")


def test_csv_large_write_is_fast(tmp_path):
    n = 100000
    rng = np.random.default_rng(1)
    tr = dg.Trace.from_columns(k=np.arange(n), z=rng.normal(size=(n, 2)), fz=rng.normal(size=(n, 2)))
    start = time.perf_counter()
    emit_csv(tr, tmp_path / "big.csv")
    assert time.perf_counter() - start < 2.0


def test_sweep(tmp_path):
    base = parse_config(algo="sfbs", problem="quadratic2d", max_iters=100000)
    rows, best = sweep_parameter(base, "D", [1 / 6], out=tmp_path / "s.csv")
    single = run_experiment(parse_config(algo="sfbs", problem="quadratic2d", max_iters=100000, D=1 / 6))
    assert rows[0]["iterations_to_tol"] == single.summary["iterations"] and best == 1 / 6
    rows, best = sweep_parameter(base, "D", [0.1, 0.9, 0.16])
    assert [r["status"] for r in rows][1] == "skipped" and best == 0.16
    with pytest.raises(ConfigError, match="empty"):
        sweep_parameter(base, "D", [])
    with pytest.raises(ConfigError):
        sweep_parameter(base, "algo", [1.0])
    assert (tmp_path / "s.csv").read_text().startswith("param_value,iterations_to_tol,final_residual,status\n")


def test_parse_grid():
    assert parse_grid("0.02:0.32:0.02") == pytest.approx([0.02 * i for i in range(1, 17)])
    assert parse_grid("1,2.5") == [1.0, 2.5]
    assert parse_grid("") == []


def test_svg_plot(tmp_path):
    k = np.arange(1, 100)
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    traces = [("one", k, 1.0 / k**2), ("two", k, 1.0 / k)]
    emit_svg_plot(traces, a, xlabel="time", ylabel="gap", logx=True)
    emit_svg_plot(traces, b, xlabel="time", ylabel="gap", logx=True)
    text = a.read_text()
    assert text.startswith("<?xml") and "<svg" in text and "xlink:href=\"http" not in text
    assert hashlib.sha256(a.read_bytes()).hexdigest() == hashlib.sha256(b.read_bytes()).hexdigest()
    with pytest.raises(ValueError, match="row 3"):
        emit_svg_plot([("bad", k[:5], np.array([1.0, 2.0, 3.0, 0.0, 1.0]))], a)
    with pytest.raises(ValueError):
        emit_svg_plot([], a)
    with pytest.raises(ValueError, match="empty"):
        emit_svg_plot([("e", [], [])], a)


def test_cli_exit_codes(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["run", "--algo", "sfbs", "--problem", "quadratic2d", "--monitors", "lyap_sfbs,rate_thm3_1",
                 "--out", str(out), "--plot", str(tmp_path / "t.svg"), "--strict"]) == 0
    assert out.read_text().startswith(HEADER)
    # too short a horizon for the trend monitor: inconclusive counts as not passed
    assert main(["run", "--algo", "sfbs", "--problem", "quadratic2d", "--monitors", "small_o", "--strict"]) != 0
    assert main(["run", "--D", "5"]) == 2
    assert "D must satisfy" in capsys.readouterr().err
    sweep = tmp_path / "s.csv"
    assert main(["sweep", "--param", "D", "--grid", "0.14,0.16", "--max-iters", "100000", "--out", str(sweep),
                 "--plot", str(tmp_path / "s.svg")]) == 0
    assert main(["plot", str(sweep), "--x", "param_value", "--y", "iterations_to_tol", "--out",
                 str(tmp_path / "p.svg")]) == 0
    dump = tmp_path / "g.csv"
    assert main(["dump-problem", "--problem", "matrix_game", "--m", "3", "--n", "2", "--out", str(dump)]) == 0
    assert dump.read_text().startswith("# kind=matrix_game")


def test_estimators():
    from sklearn.base import clone
    from sklearn.linear_model import Lasso

    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(40, 15)), rng.normal(size=40)
    est = SymplecticLasso(alpha=0.5).fit(X, y)
    ref = Lasso(alpha=0.5 / 40, fit_intercept=False, tol=1e-12, max_iter=100000).fit(X, y)
    np.testing.assert_allclose(est.coef_, ref.coef_, atol=1e-6)
    assert est.predict(X).shape == (40,)
    assert clone(est).get_params() == est.get_params()
    game = MatrixGameSolver(max_iter=20000).fit(rng.normal(size=(5, 4)))
    assert game.gap_ < 1e-4
    sol = InclusionSolver(tol=1e-9, max_iter=200000).fit(make_quadratic2d(), z0=[1.0, 0.0])
    assert sol.residual_ <= 1e-9


def test_infeasible_hint_stops_instead_of_restarting_forever():
    # rho hint 0 lies above the index -1/3: every restart would repeat one untested step
    res = run_experiment(parse_config(algo="sfbs_ls", problem="quadratic2d", rho=0.0, L=3.0, ls_shrink=0.9,
                                      max_iters=1500))
    assert res.summary["status"] == "exhausted" and res.summary["restarts"] == 1
    assert "initial hints" in res.summary["message"]


def test_probe_restarts_on_matrix_game_are_rare():
    res = run_experiment(parse_config(algo="sfbs_ls", problem="matrix_game", m=15, n=12, seed=3, max_iters=1500,
                                      monitors="linesearch_soundness"))
    assert res.summary["status"] in ("converged", "max_iters") and res.summary["restarts"] < 50 and res.ok
