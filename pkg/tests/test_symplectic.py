import math

import numpy as np
import pytest
from conftest import bilinear

from symplex.baselines import baseline_init, eag_step, eg_step
from symplex.exceptions import ConfigError, InvariantViolation
from symplex.operators import ResolventOracle, identity_resolvent, zero_map
from symplex.problems import make_matrix_game, make_quadratic2d, make_random_monotone
from symplex.symplectic import (
    SymplecticConfig,
    seg_const_coefficient,
    seg_const_step,
    seg_step,
    seg_vary_floor,
    seg_vary_step,
    sfbs_step,
    speg_step,
    sppa_step,
    symplectic_init,
    validate_seg_vary,
)

SQ2 = math.sqrt(2.0)


def test_init_invariants():
    st = symplectic_init(bilinear, [1.0, 2.0])
    np.testing.assert_array_equal(st.u, st.z)
    np.testing.assert_array_equal(st.g_tilde, [0.0, 0.0])
    assert st.k == 0


def test_sppa_scripted_step():
    half = ResolventOracle(lambda v, lam: v / 2)
    st = sppa_step(symplectic_init(None, [1.0]), half, 2.0, 0.5)
    assert st.z_tilde[0] == 1.0
    assert st.z[0] == 0.5
    assert st.u[0] == 0.875


def test_sppa_identity_freezes():
    st = symplectic_init(None, [0.3, -0.7])
    for _ in range(5):
        st = sppa_step(st, identity_resolvent(), 3.0, 1.0)
        np.testing.assert_array_equal(st.u, [0.3, -0.7])
        # the mixed point is a convex combination of equal vectors: equal up to rounding
        np.testing.assert_allclose(st.z, [0.3, -0.7], rtol=0, atol=1e-15)


def test_seg_reproduces_eg_with_zero_mixing():
    # alpha = 0 keeps z_tilde = z_k; the u sequence then never enters the iteration
    a = symplectic_init(bilinear, [1.0, 0.3])
    b = baseline_init(bilinear, [1.0, 0.3])
    for _ in range(30):
        a = seg_step(a, bilinear, 0.0, 0.8, 0.0)
        b = eg_step(b, bilinear, 0.8)
        assert a.z.tobytes() == b.z.tobytes()


def test_seg_reproduces_eag_when_u_is_frozen():
    a = symplectic_init(bilinear, [1.0, 0.3])
    b = baseline_init(bilinear, [1.0, 0.3])
    for k in range(30):
        alpha = 1.0 / (k + 2)
        a = seg_step(a, bilinear, alpha, 0.125, 0.0)
        b = eag_step(b, bilinear, alpha, 0.125)
        assert a.z.tobytes() == b.z.tobytes()


def test_seg_null_operator():
    F = zero_map(2)
    st = seg_step(symplectic_init(F, [1.0, 2.0]), F, 0.5, 1.0, 0.3)
    np.testing.assert_array_equal(st.z, st.z_tilde)
    np.testing.assert_array_equal(st.u, [1.0, 2.0])


def test_seg_two_evaluations_per_step():
    calls = []

    def F(z):
        calls.append(1)
        return bilinear(z)

    st = symplectic_init(F, [1.0, 0.0])
    calls.clear()
    for _ in range(10):
        st = seg_step(st, F, 0.5, 0.5, 0.1)
    assert len(calls) == 20


def test_sfbs_first_step_worked_example():
    P = make_quadratic2d()
    cfg = SymplecticConfig(r=2, D=1 / 6, L=1, rho=-1 / 3, theorem="thm3_1")
    st = sfbs_step(symplectic_init(P.f, [1.0, 0.0]), P, cfg)
    np.testing.assert_allclose(st.z_half, [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(st.z, [4 / 3, 2 * SQ2 / 3], atol=1e-15)
    np.testing.assert_allclose(st.fz, [4 / 9, -10 * SQ2 / 9], atol=1e-15)
    np.testing.assert_allclose(st.u, [26 / 27, 5 * SQ2 / 54], atol=1e-15)


def test_sfbs_large_r_mixing_limit():
    P = make_random_monotone(4, 1.0, 0)
    st = symplectic_init(P.f, np.ones(4))
    cfg = SymplecticConfig(r=2, D=0.5)
    for _ in range(3):
        st = sfbs_step(st, P, cfg)
    big = sfbs_step(st, P, SymplecticConfig(r=1e9, D=0.5))
    np.testing.assert_allclose(big.z_tilde, st.u, atol=1e-8)


def test_sfbs_surrogate_in_normal_cone(rng):
    P = make_matrix_game(4, 3, seed=1)
    cfg = SymplecticConfig(r=2, D=0.5 / P.L, L=P.L, theorem="thm3_1")
    st = symplectic_init(P.f, rng.normal(size=7), P.g)
    for _ in range(25):
        st = sfbs_step(st, P, cfg)
        for _ in range(20):
            c = np.concatenate([rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(3))])
            assert st.g_tilde @ (c - st.z) <= 1e-12


def test_config_validation_messages():
    with pytest.raises(ConfigError, match="D must satisfy"):
        SymplecticConfig(r=2, D=0.5, L=1, rho=-1 / 3, theorem="thm3_1")
    with pytest.raises(ConfigError, match="r must satisfy"):
        SymplecticConfig(r=1.0, D=0.1)
    with pytest.raises(ConfigError, match="s must satisfy"):
        SymplecticConfig(r=2, D=0.1, L=1, rho=-1 / 3, s=0.5, theorem="thm4_2")
    with pytest.raises(ConfigError):
        SymplecticConfig(r=2, D=0.1, rho=0.1, theorem="thm3_4")
    cfg = SymplecticConfig(r=2, D=1 / 3, L=1, rho=-1 / 3, theorem="thm3_1")
    assert cfg.d_star == pytest.approx(1 / 6)
    SymplecticConfig(r=2, D=0.5 * 0.9 - 1 / 3 + 0.1, L=1, rho=-1 / 3, s=0.9, theorem="thm4_2")


def test_speg_identity_projection_equals_seg_plus():
    P = make_random_monotone(6, 1.0, 4)
    cfg = SymplecticConfig(r=3, D=0.8, L=1.0, rho=0.0)
    a = symplectic_init(P.f, np.arange(6.0))
    b = symplectic_init(P.f, np.arange(6.0))
    ident = identity_resolvent()
    for _ in range(50):
        a = speg_step(a, P.f, ident, cfg)
        b = sfbs_step(b, P, cfg)
    np.testing.assert_allclose(a.z, b.z, atol=1e-14)
    np.testing.assert_allclose(a.g_tilde, 0.0, atol=1e-14)


def test_speg_first_half_step_is_projection():
    P = make_matrix_game(3, 3, seed=0)
    z0 = np.array([2.0, 0.0, 0.0, 1.0, 1.0, 0.0])
    st = symplectic_init(P.f, z0)
    new = speg_step(st, P.f, P.g, SymplecticConfig(r=2, D=0.5 / P.L, L=P.L, theorem="thm3_4"))
    np.testing.assert_allclose(new.z_half, [1, 0, 0, 0.5, 0.5, 0])


def test_speg_scripted_matrix_game_step():
    A = np.eye(2)
    P = make_matrix_game(0, 0, A=A)
    L = P.L
    s, r, D = 1.0 / L, 2.0, 0.5 / L
    z0 = np.array([0.9, 0.1, 0.2, 0.8])
    cfg = SymplecticConfig(r=r, D=D, L=L, theorem="thm3_4")
    st = symplectic_init(P.f, z0)
    st = speg_step(st, P.f, P.g, cfg)
    st = speg_step(st, P.f, P.g, cfg)

    # independent scripted evaluation of two steps
    def F(z):
        return np.array([z[2], z[3], -z[0], -z[1]])

    def proj(v):
        out = []
        for w in (v[:2], v[2:]):
            t = np.clip((w[0] - w[1] + 1) / 2, 0, 1)
            out += [t, 1 - t]
        return np.array(out)

    z, u, C = z0.copy(), z0.copy(), np.zeros(4)
    for k in range(2):
        zt = k / (k + r) * z + r / (k + r) * u
        zh = proj(zt - k / (k + r) * s * F(z))
        z1 = proj(zt - s * F(zh))
        C = (zt - z1) / s - F(zh)
        u = u - D / r * (F(z1) + C)
        z = z1
    np.testing.assert_allclose(st.z, z, atol=1e-15)
    np.testing.assert_allclose(st.u, u, atol=1e-15)
    np.testing.assert_allclose(st.g_tilde, C, atol=1e-14)


def test_seg_vary_beta_recursion_and_floor():
    P = make_random_monotone(4, 1.0, 0)
    st = symplectic_init(P.f, np.ones(4), beta=0.5)
    st1 = seg_vary_step(st, P.f, 2.0, 0.5, 1.0)
    assert st1.beta == pytest.approx(0.5 - 1.5 * 0.125 / (3 * 0.75), abs=1e-15)
    assert st1.beta == pytest.approx(5 / 12)
    assert seg_vary_floor(0.5, 2.0, 0.5, 1.0) == pytest.approx(0.125)
    with pytest.raises(ConfigError):
        validate_seg_vary(0.5, 2.0, 5.0, 1.0)
    with pytest.raises(InvariantViolation):
        seg_vary_step(symplectic_init(P.f, np.ones(4), beta=1.5), P.f, 2.0, 0.5, 1.0)


def test_seg_vary_zero_d_keeps_beta_and_u():
    P = make_random_monotone(4, 1.0, 0)
    st = symplectic_init(P.f, np.ones(4), beta=0.5)
    new = seg_vary_step(st, P.f, 2.0, 0.0, 1.0)
    np.testing.assert_array_equal(new.u, st.u)
    # D = 0 still shrinks beta through the (1 + D) factor; D = -1 is the value that freezes it
    assert new.beta < st.beta
    frozen = seg_vary_step(st, P.f, 2.0, -1.0, 1.0)
    assert frozen.beta == 0.5


def _coefficient_condition(k, r, beta, C, L=1.0):
    a0, a1 = 1.0 / (k + r), 1.0 / (k + r + 1)
    lhs = beta + 2 * C * a1
    rhs = beta * a1 * (1 - L * L * beta * beta - a0 * a0) / (a0 * (1 - a0) * (1 - L * L * beta * beta))
    return lhs, rhs


def test_seg_const_coefficient_satisfies_condition():
    for k in range(101):
        C = seg_const_coefficient(k, 2.0, 0.5, 1.0)
        lhs, rhs = _coefficient_condition(k, 2.0, 0.5, C)
        assert lhs == pytest.approx(rhs, rel=1e-13)


def test_seg_const_null_operator_and_scripted_step():
    F = zero_map(2)
    st = seg_const_step(symplectic_init(F, [1.0, 0.0]), F, 2.0, 0.5, 1.0)
    np.testing.assert_array_equal(st.z, [1.0, 0.0])
    st = seg_const_step(symplectic_init(bilinear, [1.0, 0.0]), bilinear, 2.0, 0.5, 1.0)
    # k = 0: z_tilde = ((r-1) z + u) / r = z0
    zt = np.array([1.0, 0.0])
    zh = zt - 0.5 * bilinear(zt)
    z1 = zt - 0.5 * bilinear(zh)
    u1 = zt + 0.125 / (2 * 1 * 0.75) * bilinear(z1)
    np.testing.assert_allclose(st.z, z1)
    np.testing.assert_allclose(st.u, u1)
