import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spikectl import prior as P
from spikectl.prior import DegeneratePosteriorError, make_atomic_prior, uniform_prior

from oracles import moments_direct


def test_fig1_prior_moments(fig1_prior):
    assert fig1_prior.mean == pytest.approx(0.5, abs=1e-15)
    assert fig1_prior.variance == pytest.approx(0.075, abs=1e-15)
    assert P.xi(fig1_prior, 0, 0) == pytest.approx(0.5, abs=1e-15)
    assert P.psi(fig1_prior, 0, 0) == pytest.approx(0.075, abs=1e-15)


def test_fig1_weights_after_one_jump(fig1_prior):
    # m(1, 0) is proportional to lambda * mu: (0, .25*.2, .5*.4, .75*.2, .1) / 0.5
    w = P.posterior_weights(fig1_prior, 1, 0.0)
    np.testing.assert_allclose(w, [0, 0.1, 0.4, 0.3, 0.2], atol=1e-15)
    assert w[0] == 0.0


def test_two_point_values(two_point):
    assert P.phi(two_point, 0, 0) == 1.0
    assert P.log_phi(two_point, 1, 0) == pytest.approx(math.log(0.5), abs=1e-15)
    assert P.log_phi(two_point, 0, math.log(2)) == pytest.approx(math.log(0.75), abs=1e-15)
    assert P.psi(two_point, 0, 0) == pytest.approx(0.25, abs=1e-15)
    # a single jump rules out lambda = 0
    assert P.psi(two_point, 1, 0.3) == 0.0
    assert P.xi(two_point, 3, 2.0) == 1.0


def test_uniform_quadrature_moments():
    pr = uniform_prior(0.0, 2.0, 64)
    assert pr.mean == pytest.approx(1.0, abs=1e-14)
    assert pr.variance == pytest.approx(1 / 3, abs=1e-14)
    # Gamma-like posterior for n=2, z=1 on [0, 2]: compare with scipy quad
    from scipy.integrate import quad
    num = quad(lambda l: l ** 3 * math.exp(-l), 0, 2)[0]
    den = quad(lambda l: l ** 2 * math.exp(-l), 0, 2)[0]
    assert P.xi(pr, 2, 1.0) == pytest.approx(num / den, rel=1e-12)


def test_normalization(any_prior):
    assert P.phi(any_prior, 0, 0) == 1.0


def test_moments_match_direct_sum(any_prior):
    lam, w = any_prior.lambdas, any_prior.weights
    for n in (0, 1, 4, 10):
        for z in (0.0, 0.7, 3.0):
            m, v, _ = moments_direct(lam, w, n, z)
            assert P.xi(any_prior, n, z) == pytest.approx(m, rel=1e-12, abs=1e-15)
            assert P.psi(any_prior, n, z) == pytest.approx(v, rel=1e-9, abs=1e-15)


def test_dz_psi_is_minus_third_central_moment(any_prior):
    lam, w = any_prior.lambdas, any_prior.weights
    for n in (0, 2, 7):
        for z in (0.0, 1.3, 4.0):
            _, _, k3 = moments_direct(lam, w, n, z)
            assert P.dz_psi(any_prior, n, z) == pytest.approx(-k3, rel=1e-8, abs=1e-14)


def test_dz_psi_finite_difference_examples(two_point, unif_prior):
    h = 1e-5
    for pr in (two_point, unif_prior):
        z = 0.5 if pr is unif_prior else 0.0
        zl = max(z - h, 0.0)
        fd = (P.psi(pr, 0, z + h) - P.psi(pr, 0, zl)) / (z + h - zl)
        assert P.dz_psi(pr, 0, z) == pytest.approx(fd, abs=1e-6)


def test_dirac_zero_variance(dirac):
    for n in (0, 3):
        for z in (0.0, 2.5):
            assert P.psi(dirac, n, z) == 0.0
            assert P.dz_psi(dirac, n, z) == 0.0
            assert P.xi(dirac, n, z) == 1.0


def test_jump_gain_identity(any_prior):
    n = np.arange(0, 10)[:, None]
    z = np.linspace(0, 5, 11)[None, :]
    x0, x1, s = P.xi(any_prior, n, z), P.xi(any_prior, n + 1, z), P.psi(any_prior, n, z)
    np.testing.assert_allclose(x1 - x0, s / x0, rtol=1e-10, atol=1e-14)


def test_large_n_is_finite(unif_prior):
    v = P.psi(unif_prior, 400, 0.1)
    assert np.isfinite(v) and v >= 0
    assert np.isfinite(P.log_phi(unif_prior, 400, 0.1))


def test_broadcasting(fig1_prior):
    n = np.array([0, 1, 2])[:, None]
    z = np.array([0.0, 1.0])[None, :]
    assert np.shape(P.psi(fig1_prior, n, z)) == (3, 2)
    assert np.shape(P.posterior_weights(fig1_prior, n, z)) == (3, 2, 5)


def test_zero_atom_degenerate_posterior():
    pr = make_atomic_prior([(0, 1.0)])
    with pytest.raises(DegeneratePosteriorError):
        P.posterior_weights(pr, 1, 0.0)


@pytest.mark.parametrize("atoms", [[], [(-1, 1)], [(1, 0)], [(1, -0.5), (2, 1.5)]])
def test_invalid_priors(atoms):
    with pytest.raises(ValueError):
        make_atomic_prior(atoms)


def test_duplicate_atoms_merge():
    pr = make_atomic_prior([(1, 1), (1, 1), (2, 2)])
    np.testing.assert_array_equal(pr.lambdas, [1.0, 2.0])
    np.testing.assert_allclose(pr.weights, [0.5, 0.5])


atoms_strategy = st.lists(
    st.tuples(st.floats(0, 3, allow_nan=False), st.floats(0.01, 5, allow_nan=False)),
    min_size=1, max_size=6,
)


@settings(max_examples=60, deadline=None)
@given(atoms=atoms_strategy, n=st.integers(0, 30), z=st.floats(0, 20))
def test_bounds_property(atoms, n, z):
    pr = make_atomic_prior(atoms)
    lm = pr.lambda_max
    try:
        s = P.psi(pr, n, z)
        d = P.dz_psi(pr, n, z)
        m = P.xi(pr, n, z)
    except DegeneratePosteriorError:
        assert n >= 1 and pr.lambdas.max() == 0
        return
    assert -1e-15 <= s <= lm ** 2 / 4 + 1e-12
    assert abs(d) <= lm ** 3 / 2 + 1e-12
    assert pr.lambdas.min() - 1e-12 <= m <= lm + 1e-12
    w = P.posterior_weights(pr, n, z)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
