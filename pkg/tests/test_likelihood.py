import math

import numpy as np
import pytest

from spikectl import prior as P
from spikectl.likelihood import PathRecord, log_weight, log_weights, posterior_from_path
from spikectl.rng import PathStreams


def test_trivial_weight():
    assert log_weight(PathRecord(0.0, 1.0, (), (), 1.0), 1.0) == 0.0


def test_hand_value():
    # two spikes with g = 2 and 0.5, integral 3, horizon 2, lambda = 1.5
    p = PathRecord(0.0, 2.0, (0.5, 1.2), (2.0, 0.5), 3.0)
    expect = 2 * math.log(1.5) + math.log(2.0) + math.log(0.5) + 2.0 - 1.5 * 3.0
    assert log_weight(p, 1.5) == pytest.approx(expect, abs=1e-14)
    assert log_weight(p, 0.0) == -math.inf


def test_empty_path_keeps_prior(fig1_prior):
    w = posterior_from_path(fig1_prior, PathRecord(0.3, 0.3))
    np.testing.assert_allclose(w, fig1_prior.weights, rtol=1e-14)


def test_one_jump_pins_two_point(two_point):
    w = posterior_from_path(two_point, PathRecord(0.0, 1.0, (0.4,), (1.0,), 1.0))
    np.testing.assert_array_equal(w, [0.0, 1.0])


@pytest.mark.parametrize("bad", [
    dict(t0=0, t1=1, jump_times=(0.5, 0.4), g_at_jumps=(1, 1)),
    dict(t0=0, t1=1, jump_times=(0.5,), g_at_jumps=()),
    dict(t0=0, t1=1, jump_times=(1.5,), g_at_jumps=(1,)),
    dict(t0=1, t1=0),
    dict(t0=0, t1=1, integral_g=-1.0),
])
def test_path_validation(bad):
    with pytest.raises(ValueError):
        PathRecord(**bad)


def test_factorization():
    p = PathRecord(0.0, 3.0, (0.4, 1.1, 2.5), (0.7, 1.3, 2.0), 4.2)
    left, right = p.split(1.5, 1.9)
    for lam in (0.3, 1.0, 2.2):
        assert log_weight(p, lam) == pytest.approx(log_weight(left, lam) + log_weight(right, lam),
                                                   abs=1e-12)


def test_bayes_equivalence_const_unit(fig1_prior):
    p = PathRecord(0.0, 2.0, (0.3, 0.9, 1.7), (1.0, 1.0, 1.0), 2.0)
    np.testing.assert_allclose(posterior_from_path(fig1_prior, p),
                               P.posterior_weights(fig1_prior, 3, 2.0), rtol=1e-12, atol=0)


def test_unit_mean_quick():
    # 2e4 rate-1 paths: exact Poisson counts from the counter RNG
    m = 20_000
    s = PathStreams(11)
    ids = np.arange(m)
    for lam in (0.5, 2.0):
        t = np.zeros(m)
        k = np.zeros(m, dtype=int)
        ctr = 0
        alive = np.ones(m, dtype=bool)
        while alive.any():
            t = t + s.exponential(ids, np.full(m, ctr, dtype=np.uint64))
            ctr += 1
            alive &= t <= 1.0
            k += alive
        lw = log_weights(PathRecord(0.0, 1.0, (), (), 1.0), np.array([lam]))[0] + k * math.log(lam)
        L = np.exp(lw)
        se = L.std(ddof=1) / math.sqrt(m)
        assert abs(L.mean() - 1) < 4 * se
