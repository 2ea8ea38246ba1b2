import math

import numpy as np
import pytest

from symplex.exceptions import ConfigError
from symplex.operators import duality_gap
from symplex.problems import (
    ProblemSpec,
    dump_problem,
    game_solution,
    lasso_admm,
    load_problem,
    make_comonotone_linear,
    make_lasso,
    make_matrix_game,
    make_quadratic2d,
    make_random_monotone,
)


def _pairs(rng, n, count=1000):
    for _ in range(count):
        yield rng.normal(size=n), rng.normal(size=n)


def test_quadratic2d_identities(rng):
    P = make_quadratic2d()
    np.testing.assert_array_equal(P.f(np.zeros(2)), [0.0, 0.0])
    x, y = 0.3, -1.1
    expected = [-x / 3 + 2 * math.sqrt(2) * y / 3, -2 * math.sqrt(2) * x / 3 - y / 3]
    np.testing.assert_allclose(P.f(np.array([x, y])), expected, atol=1e-15)
    for p, q in _pairs(rng, 2):
        d = P.f(p) - P.f(q)
        assert np.linalg.norm(d) == pytest.approx(np.linalg.norm(p - q), rel=1e-12)
        assert d @ (p - q) == pytest.approx(-(d @ d) / 3, rel=1e-10, abs=1e-14)
    assert (P.L, P.rho, P.g) == (1.0, -1.0 / 3.0, None)


def test_random_monotone(rng):
    P = make_random_monotone(8, 2.5, seed=3)
    for z, _ in _pairs(rng, 8, 100):
        assert abs(P.f(z) @ z) < 1e-12 * (z @ z)
        assert np.linalg.norm(P.f(z)) == pytest.approx(2.5 * np.linalg.norm(z), rel=1e-12)
    with pytest.raises(ConfigError):
        make_random_monotone(5)


def test_comonotone_linear_identities(rng):
    L, rho = 1.5, -0.3
    P = make_comonotone_linear(6, L, rho, seed=1)
    for p, q in _pairs(rng, 6):
        d = P.f(p) - P.f(q)
        assert abs(np.linalg.norm(d) - L * np.linalg.norm(p - q)) <= 1e-12 * np.linalg.norm(p - q) * 10
        assert abs(d @ (p - q) - rho * (d @ d)) <= 1e-12 * (d @ d) * 10
    with pytest.raises(ConfigError):
        make_comonotone_linear(4, 2.0, 0.6)


def test_comonotone_zero_rho_is_random_monotone():
    a = make_comonotone_linear(6, 1.0, 0.0, seed=4).data["M"]
    b = make_random_monotone(6, 1.0, seed=4).data["M"]
    np.testing.assert_allclose(a, b, atol=1e-15)


def test_comonotone_two_dim_is_quadratic_operator_up_to_basis():
    M = make_comonotone_linear(2, 1.0, -1.0 / 3.0, seed=0).data["M"]
    Q = make_quadratic2d().data["M"]
    # same trace and determinant: similar 2x2 normal matrices
    assert np.trace(M) == pytest.approx(np.trace(Q))
    assert np.linalg.det(M) == pytest.approx(np.linalg.det(Q))


def test_matrix_game(rng):
    P = make_matrix_game(6, 4, seed=0)
    for p, q in _pairs(rng, 10, 100):
        d = P.f(p) - P.f(q)
        assert abs(d @ (p - q)) < 1e-12
    sigma = np.linalg.norm(P.data["A"], 2)
    assert P.data["spectral_norm"] == pytest.approx(sigma, rel=1e-8)
    assert P.L == pytest.approx(1.01 * sigma, rel=1e-8)
    with pytest.raises(ConfigError):
        make_matrix_game(1, 3)


def test_identity_game_uniform_equilibrium():
    P = make_matrix_game(0, 0, A=np.eye(2))
    assert duality_gap([0.5, 0.5], [0.5, 0.5], P.data["A"]) == 0.0
    z = game_solution(P)
    np.testing.assert_allclose(z, [0.5, 0.5, 0.5, 0.5], atol=1e-9)


def test_game_solution_is_equilibrium():
    P = make_matrix_game(7, 5, seed=3)
    z = game_solution(P)
    assert duality_gap(z[:7], z[7:], P.data["A"]) < 1e-9


def test_lasso_large_mu(rng):
    P = make_lasso(10, 6, mu=1e6, seed=0)
    d = P.data["lasso"]
    np.testing.assert_array_equal(d.solution, np.zeros(6))
    assert d.optimum == pytest.approx(0.5 * float(P.data["b"] @ P.data["b"]))


def test_lasso_optimum_two_oracles():
    P = make_lasso(100, 200, 0.1, seed=7)
    d = P.data["lasso"]
    f_pg = d.optimum
    f_admm = d.objective(lasso_admm(P.data["A"], P.data["b"], 0.1))
    assert abs(f_pg - f_admm) <= 1e-8 * abs(f_pg)
    assert f_pg <= d.objective(np.zeros(200))


def test_spec_build_and_determinism():
    a = ProblemSpec("matrix_game", m=5, n=3, seed=11).build()
    b = ProblemSpec("matrix_game", m=5, n=3, seed=11).build()
    assert a.data["A"].tobytes() == b.data["A"].tobytes()
    with pytest.raises(ConfigError):
        ProblemSpec("nope").build()


@pytest.mark.parametrize("spec", [
    ProblemSpec("matrix_game", m=4, n=3, seed=2),
    ProblemSpec("lasso", m=5, n=7, seed=1, mu=0.3),
    ProblemSpec("comonotone_linear", n=4, seed=1, L=2.0, rho=-0.2),
])
def test_dump_load_roundtrip(tmp_path, spec):
    P = spec.build()
    path = tmp_path / "p.csv"
    dump_problem(P, path)
    Q = load_problem(path)
    z = np.random.default_rng(0).normal(size=P.dim)
    np.testing.assert_array_equal(P.f(z), Q.f(z))
    if P.g is not None:
        np.testing.assert_array_equal(P.g(z, 1.0), Q.g(z, 1.0))
    assert Q.name == P.name and Q.L == P.L
