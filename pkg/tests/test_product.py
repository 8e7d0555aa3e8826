import numpy as np
import pytest
from scipy import stats

from singwish.errors import DegenerateDirection, DimensionGuard, SpecViolation, ZeroProjection
from singwish.product import (
    ClampStats,
    ProductSpec,
    ProjectionCache,
    sample_product,
    sample_product_naive,
    sample_product_scalar_stochrep,
    sample_product_vector_stochrep,
)
from singwish.rng import RngStream
from singwish.samplers import GaussianSpec, sample_chi2
from singwish.spectral import spectral_decompose

from conftest import random_gaussian

KS_CRIT = 1.63


def ks2(a, b):
    return stats.ks_2samp(a, b).statistic


def test_rank_one_collapse():
    sig = spectral_decompose(np.diag([1.0, 0.0]))
    spec = ProductSpec(GaussianSpec(np.zeros(2), 1.0, sig), 7, np.array([1.0, 0.0]))
    rng = RngStream(31)
    x = sample_product_scalar_stochrep(spec, rng, size=1000)
    zeta = sample_chi2(7, rng.child("zeta"), size=1000)
    z1 = rng.child("z").generator().standard_normal((1000, 1))[:, 0]
    np.testing.assert_allclose(x, zeta * z1, rtol=1e-14, atol=0)


def test_naive_degenerate_law_matches_collapse():
    sig = spectral_decompose(np.diag([1.0, 0.0]))
    spec = ProductSpec(GaussianSpec(np.zeros(2), 1.0, sig), 5, np.array([1.0, 0.0]))
    a = sample_product_naive(spec, RngStream(1), size=50_000)
    b = sample_product_scalar_stochrep(spec, RngStream(2), size=50_000)
    assert ks2(a, b) <= KS_CRIT * np.sqrt(2 / 50_000)


@pytest.fixture
def scalar_instance(gen):
    g = random_gaussian(gen, 6, 3)
    return ProductSpec(g, 10, gen.uniform(-1, 1, 6))


def test_scalar_mean_and_naive_oracle(scalar_instance):
    N = 200_000
    x = sample_product_scalar_stochrep(scalar_instance, RngStream(3), size=N)
    y = sample_product_naive(scalar_instance, RngStream(4), size=N)
    target = scalar_instance.mean()
    assert abs(x.mean() - target) <= 4 * x.std() / np.sqrt(N)
    assert abs(y.mean() - target) <= 4 * y.std() / np.sqrt(N)
    assert ks2(x, y) <= KS_CRIT * np.sqrt(2 / N)


def test_vector_path_reduces_to_scalar_path(scalar_instance):
    vec = ProductSpec(scalar_instance.gaussian, scalar_instance.n, scalar_instance.projection[None, :])
    rng = RngStream(77)
    x = sample_product_scalar_stochrep(scalar_instance, rng, size=5000)
    y = sample_product_vector_stochrep(vec, rng, size=5000)[:, 0]
    np.testing.assert_allclose(y, x, rtol=1e-9, atol=1e-9 * np.abs(x).max())


def test_vector_scalar_ks(scalar_instance):
    vec = ProductSpec(scalar_instance.gaussian, scalar_instance.n, scalar_instance.projection[None, :])
    N = 100_000
    x = sample_product_scalar_stochrep(scalar_instance, RngStream(5), size=N)
    y = sample_product_vector_stochrep(vec, RngStream(6), size=N)[:, 0]
    assert ks2(x, y) <= KS_CRIT * np.sqrt(2 / N)


def test_vector_mean(gen):
    g = random_gaussian(gen, 8, 4)
    spec = ProductSpec(g, 12, gen.uniform(-1, 1, (2, 8)))
    N = 100_000
    x = sample_product_vector_stochrep(spec, RngStream(8), size=N)
    se = x.std(axis=0) / np.sqrt(N)
    assert np.all(np.abs(x.mean(axis=0) - spec.mean()) <= 4 * se)


def test_projection_cache_orthonormal_rows(gen):
    for _ in range(50):
        k = int(gen.integers(3, 12))
        r = int(gen.integers(2, k))
        p = int(gen.integers(1, r))
        g = random_gaussian(gen, k, r)
        cache = ProjectionCache.build(gen.standard_normal((p, k)), g.sigma)
        assert np.abs(cache.P @ cache.P.T - np.eye(p)).max() <= 1e-8


@pytest.mark.parametrize(
    "k,r,p,n,seed",
    [(5, 3, 1, 4, 0), (7, 4, 2, 9, 1), (10, 5, 3, 20, 2), (9, 5, 2, 5, 3)],
)
def test_distributional_equivalence(k, r, p, n, seed):
    gen = np.random.default_rng(seed)
    g = random_gaussian(gen, k, r, kappa=float(gen.uniform(0.3, 2.0)))
    spec = ProductSpec(g, n, gen.uniform(-1, 1, (p, k)))
    N = 40_000
    a = sample_product_naive(spec, RngStream(seed, 1), size=N)
    b = sample_product_vector_stochrep(spec, RngStream(seed, 2), size=N)
    crit = KS_CRIT * np.sqrt(2 / N)
    for j in range(p):
        assert ks2(a[:, j], b[:, j]) <= crit
        se = np.sqrt((a[:, j].var() + b[:, j].var()) / N)
        assert abs(a[:, j].mean() - b[:, j].mean()) <= 4 * se


def test_clamp_rate_well_conditioned(gen):
    g = random_gaussian(gen, 10, 5)
    st = ClampStats()
    sample_product_scalar_stochrep(ProductSpec(g, 10, gen.uniform(-1, 1, 10)), RngStream(9), size=1_000_000, stats=st)
    assert st.draws == 1_000_000
    assert st.rate < 1e-3
    st = ClampStats()
    sample_product_vector_stochrep(ProductSpec(g, 10, gen.uniform(-1, 1, (2, 10))), RngStream(9), size=200_000, stats=st)
    assert st.rate < 1e-3


def test_spec_validation(gen):
    g = random_gaussian(gen, 6, 3)
    with pytest.raises(SpecViolation):
        ProductSpec(g, 10, gen.uniform(-1, 1, (3, 6)))  # p = r
    with pytest.raises(SpecViolation):
        ProductSpec(g, 2, gen.uniform(-1, 1, (2, 6)))  # r > n
    row = gen.uniform(-1, 1, 6)
    with pytest.raises(SpecViolation):
        ProductSpec(g, 10, np.vstack([row, 2 * row]))
    null = np.linalg.svd(g.sigma.eigenvectors.T)[2][3:5]
    with pytest.raises(ZeroProjection):
        ProductSpec(g, 10, null)
    with pytest.raises(DegenerateDirection):
        ProductSpec(g, 10, null[0])
    with pytest.raises(ValueError):
        ProductSpec(g, 0, row)


def test_naive_dimension_guard(gen):
    g = random_gaussian(gen, 6, 3)
    spec = ProductSpec(g, 10, gen.uniform(-1, 1, 6))
    with pytest.raises(DimensionGuard):
        sample_product_naive(spec, RngStream(1), max_k=5)


def test_dispatch_and_determinism(scalar_instance):
    a = sample_product(scalar_instance, RngStream(4), size=10)
    b = sample_product(scalar_instance, RngStream(4), size=10)
    np.testing.assert_array_equal(a, b)
    assert isinstance(sample_product(scalar_instance, RngStream(4), method="naive"), float)
    with pytest.raises(ValueError):
        sample_product(scalar_instance, RngStream(4), method="bogus")


def test_single_draw_is_batch_prefix(scalar_instance, gen):
    x = sample_product_scalar_stochrep(scalar_instance, RngStream(2), size=100)
    assert sample_product_scalar_stochrep(scalar_instance, RngStream(2)) == pytest.approx(x[0], rel=1e-13)
    vec = ProductSpec(scalar_instance.gaussian, 10, gen.uniform(-1, 1, (2, 6)))
    y = sample_product_vector_stochrep(vec, RngStream(2), size=100)
    np.testing.assert_allclose(sample_product_vector_stochrep(vec, RngStream(2)), y[0], rtol=1e-13)
