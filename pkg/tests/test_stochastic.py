import math

import numpy as np
import pytest

from symplex.exceptions import ConfigError
from symplex.problems import make_random_monotone
from symplex.stochastic import NoiseSchedule, NoiseStream, sigma_at, sseg_init, sseg_step, validate_sseg
from symplex.symplectic import SymplecticConfig, sfbs_step, symplectic_init


def test_sigma_values():
    zero = NoiseSchedule("zero")
    assert sigma_at(zero, 7) == 0.0 and sigma_at(zero, 7.5) == 0.0
    dec = NoiseSchedule("decaying", E1=1.0, E2=3.0, eps=0.01, r=2.0)
    assert sigma_at(dec, 5) ** 2 == pytest.approx(0.001)
    assert sigma_at(dec, 5) == pytest.approx(0.0316227766, rel=1e-9)
    assert sigma_at(dec, 5.5) ** 2 == pytest.approx(3.0 * 0.01 / (2.0 * 7.0))
    assert sigma_at(dec, 0) == sigma_at(dec, 1)
    const = NoiseSchedule("constant", E1=2.0, E2=1.0, eps=0.5)
    assert sigma_at(const, 100) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        sigma_at(dec, 0.25)


def test_schedule_validation():
    with pytest.raises(ConfigError):
        NoiseSchedule("pink")
    with pytest.raises(ConfigError):
        NoiseSchedule("decaying", eps=0.0)
    with pytest.raises(ConfigError):
        validate_sseg(1.5, 0.5)
    with pytest.raises(ConfigError):
        validate_sseg(2.0, 1.5)


def test_zero_draw_is_exact_zero():
    stream = NoiseStream(NoiseSchedule("zero"), seed=1)
    assert not np.any(stream.draw(3.5, 10))


def test_noise_mean_and_variance():
    sched = NoiseSchedule("constant", E1=1.0, E2=1.0, eps=0.04)
    stream = NoiseStream(sched, seed=3)
    dim = 5
    draws = np.array([stream.draw(k, dim) for k in range(10000)])
    sigma = sigma_at(sched, 1)
    per_coord = sigma / math.sqrt(dim)
    assert np.all(np.abs(draws.mean(axis=0)) <= 4 * per_coord / math.sqrt(10000))
    assert np.mean(np.sum(draws**2, axis=1)) == pytest.approx(sigma**2, rel=0.05)


def test_streams_independent_and_reproducible():
    sched = NoiseSchedule("constant", eps=1.0)
    a, b = NoiseStream(sched, seed=9), NoiseStream(sched, seed=9)
    xa = [a.draw(1, 4), a.draw(1.5, 4)]
    xb = [b.draw(1, 4), b.draw(1.5, 4)]
    np.testing.assert_array_equal(xa[0], xb[0])
    np.testing.assert_array_equal(xa[1], xb[1])
    assert not np.allclose(xa[0], xa[1])
    c = NoiseStream(sched, seed=10)
    assert not np.allclose(c.draw(1, 4), xa[0])


def test_zero_noise_matches_deterministic_seg_plus():
    P = make_random_monotone(10, 1.0, 2)
    z0 = np.linspace(-1, 1, 10)
    stream = NoiseStream(NoiseSchedule("zero"), seed=0)
    a = sseg_init(P.f, z0, stream)
    b = symplectic_init(P.f, z0)
    cfg = SymplecticConfig(r=2.0, D=0.5, L=1.0, rho=0.0)
    worst = 0.0
    for _ in range(2000):
        a = sseg_step(a, P.f, 1.0, 2.0, 0.5, stream)
        b = sfbs_step(b, P, cfg)
        worst = max(worst, np.max(np.abs(a.z - b.z)))
    assert worst <= 1e-12


def test_fixed_seed_bit_identical():
    P = make_random_monotone(6, 1.0, 0)
    outs = []
    for _ in range(2):
        stream = NoiseStream(NoiseSchedule("decaying", eps=1e-2), seed=42)
        st = sseg_init(P.f, np.ones(6), stream)
        for _ in range(200):
            st = sseg_step(st, P.f, 1.0, 2.0, 0.5, stream)
        outs.append(st.z.tobytes())
    assert outs[0] == outs[1]
