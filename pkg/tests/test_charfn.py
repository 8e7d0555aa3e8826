import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from singwish.charfn import (
    CfIntegrand,
    CfQuadratureConfig,
    adaptive_simpson,
    cf_product,
    cf_product_direct,
    cf_product_result,
    chi2_logpdf,
    chi2_tail_bounds,
    empirical_cf,
)
from singwish.errors import DomainError, EmptySample, QuadratureNonConvergence
from singwish.spectral import pseudo_inverse_quadratic

from conftest import random_gaussian

TOL = CfQuadratureConfig().rel_tol


def test_chi2_logpdf_closed_form():
    assert chi2_logpdf(2.0, 2) == pytest.approx(-1.0 - np.log(2.0), rel=1e-15)
    grid = np.linspace(0.5, 6.0, 1101)
    assert grid[np.argmax(chi2_logpdf(grid, 4))] == pytest.approx(2.0)
    with pytest.raises(DomainError):
        chi2_logpdf(0.0, 3)


@pytest.mark.parametrize("n", [1, 2, 5, 50, 500])
def test_chi2_normalisation(n):
    f = lambda z: np.exp(chi2_logpdf(z, n))
    cut = n + 40 * np.sqrt(2 * n) + 40
    body, _ = integrate.quad(f, 0, cut, points=[n - 2] if n > 2 else None, epsabs=1e-13, epsrel=1e-13, limit=400)
    tail, _ = integrate.quad(f, cut, np.inf, epsabs=1e-14, limit=200)
    total = body + tail
    assert abs(total - 1) <= 1e-10


@pytest.mark.parametrize("n", [1, 4, 500])
def test_tail_bounds(n):
    from scipy.special import gammainc, gammaincc

    lo, hi = chi2_tail_bounds(n, 1e-12)
    assert 0 <= lo < n < hi
    assert gammainc(n / 2, lo / 2) == pytest.approx(5e-13, rel=1e-6)
    assert gammaincc(n / 2, hi / 2) == pytest.approx(5e-13, rel=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        CfQuadratureConfig(rel_tol=0.1)
    with pytest.raises(ValueError):
        CfQuadratureConfig(tail_mass=1e-3)


def test_phi_at_zero_is_exactly_one(gen):
    g = random_gaussian(gen, 4, 2)
    assert cf_product(np.zeros(4), g, 6) == 1 + 0j
    null = np.linalg.svd(g.sigma.eigenvectors.T)[2][-1]
    assert cf_product(null, g, 6) == 1 + 0j


def test_normalised_integrand_matches_direct_formula(gen):
    g = random_gaussian(gen, 3, 2)
    u = gen.uniform(-0.5, 0.5, 3)
    zeta = np.array([0.3, 1.0, 4.0, 9.0])
    np.testing.assert_allclose(CfIntegrand(u, g, 4)(zeta), cf_product_direct(u, g, 4, zeta), rtol=1e-9)


def test_quadrature_matches_scipy_on_direct_formula(gen):
    g = random_gaussian(gen, 3, 2)
    u = gen.uniform(-0.5, 0.5, 3)
    n = 4
    re = integrate.quad(lambda z: cf_product_direct(u, g, n, z)[0].real, 0, np.inf, epsabs=1e-12, limit=400)[0]
    im = integrate.quad(lambda z: cf_product_direct(u, g, n, z)[0].imag, 0, np.inf, epsabs=1e-12, limit=400)[0]
    assert abs(cf_product(u, g, n) - complex(re, im)) <= 1e-8


def test_prefactor_pseudo_inverse_identity(gen):
    g = random_gaussian(gen, 5, 3)
    R, lam = g.sigma.eigenvectors, g.sigma.eigenvalues
    explicit = g.mu @ R @ np.diag(1 / lam) @ R.T @ g.mu
    assert pseudo_inverse_quadratic(g.sigma, g.mu) == pytest.approx(explicit, rel=1e-12)
    assert pseudo_inverse_quadratic(g.sigma, g.mu) == pytest.approx(g.mu @ np.linalg.pinv(g.sigma.matrix()) @ g.mu, rel=1e-8)


def test_zeta_coefficient_is_psd():
    gen = np.random.default_rng(0)
    for _ in range(100):
        k = int(gen.integers(2, 9))
        g = random_gaussian(gen, k, int(gen.integers(1, k + 1)))
        lam = g.sigma.eigenvalues
        v = gen.standard_normal(k) @ g.sigma.eigenvectors
        C = np.diag(lam) * np.sum(lam * v * v) - np.outer(lam * v, lam * v)
        assert np.linalg.eigvalsh(C)[0] >= -1e-10 * max(1.0, np.abs(C).max())


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 40), scale=st.floats(0.05, 3.0))
def test_conjugate_symmetry_and_modulus(seed, n, scale):
    gen = np.random.default_rng(seed)
    g = random_gaussian(gen, 4, 2, kappa=float(gen.uniform(0.1, 2.0)))
    u = scale * gen.standard_normal(4) / 2
    a, b = cf_product(u, g, n), cf_product(-u, g, n)
    assert abs(a - np.conj(b)) <= 10 * TOL
    assert abs(a) <= 1 + 10 * TOL


def test_zero_mean_is_real(gen):
    g = random_gaussian(gen, 5, 3, zero_mean=True)
    for _ in range(5):
        assert abs(cf_product(gen.uniform(-1, 1, 5), g, 7).imag) <= 10 * TOL


def test_large_n_does_not_underflow(gen):
    g = random_gaussian(gen, 10, 5, kappa=1 / 500)
    res = cf_product_result(gen.uniform(-1, 1, 10) / 50, g, 500)
    assert np.isfinite(res.value) and abs(res.value) <= 1 + 10 * TOL
    assert res.interval[0] > 0


def test_subdivision_budget_is_enforced():
    with pytest.raises(QuadratureNonConvergence):
        adaptive_simpson(lambda x: np.exp(1j * 200 * x), 0.0, 10.0, 1e-12, max_subdivisions=5, panels=2)


def test_adaptive_simpson_polynomial_exact():
    val, err, _ = adaptive_simpson(lambda x: x**3 + 0j, 0.0, 2.0, 1e-12, 100)
    assert val == pytest.approx(4.0, abs=1e-13)


def test_empirical_cf_examples(gen):
    x = gen.standard_normal((100, 3))
    assert empirical_cf(x, np.zeros(3)) == 1 + 0j
    u = np.array([1.0, 0.0, 0.0])
    single = np.array([[np.pi, 5.0, -2.0]])
    assert abs(empirical_cf(single, u) - (-1 + 0j)) <= 1e-12
    assert abs(empirical_cf(x, gen.standard_normal(3))) <= 1.0
    with pytest.raises(EmptySample):
        empirical_cf(np.empty((0, 3)), u)


def test_matches_empirical_small_instance():
    from singwish.charfn import sample_az_naive
    from singwish.rng import RngStream

    gen = np.random.default_rng(3)
    g = random_gaussian(gen, 3, 2)
    samples = sample_az_naive(g, 4, RngStream(5), 200_000)
    for _ in range(3):
        u = gen.uniform(-1, 1, 3)
        u *= gen.uniform(0, 1) / np.linalg.norm(u)
        assert abs(cf_product(u, g, 4) - empirical_cf(samples, u)) <= 3 / np.sqrt(len(samples)) * 2.5
