import numpy as np
import pytest
from scipy import stats

from singwish.errors import ConfigError, DegenerateSample, EmptySample
from singwish.harness import (
    ExperimentConfig,
    generate_population,
    generate_projection,
    kde_epanechnikov,
    ks_statistic,
    normal_pdf,
    resolve_rank,
    run_experiment,
    run_replications,
    silverman_bandwidth,
    time_per_draw,
    _population_and_spec,
)
from singwish.product import ProductSpec
from singwish.rng import RngStream


def test_population_shape_and_ranges():
    pop = generate_population(40, 15, RngStream(1))
    np.testing.assert_array_equal(pop.m, np.full(40, 1 / 40))
    assert np.all((pop.sigma.eigenvalues > 0) & (pop.sigma.eigenvalues < 1))
    assert np.all(np.abs(pop.mu) <= 1)
    R = pop.sigma.eigenvectors
    assert R.shape == (40, 15)
    assert np.abs(R.T @ R - np.eye(15)).max() <= 1e-10
    with pytest.raises(ConfigError):
        generate_population(5, 5, RngStream(1))


def test_population_is_deterministic():
    a = generate_population(20, 7, RngStream(3))
    b = generate_population(20, 7, RngStream(3))
    np.testing.assert_array_equal(a.mu, b.mu)
    np.testing.assert_array_equal(a.sigma.eigenvectors, b.sigma.eigenvectors)


def test_haar_frame_is_rotation_invariant_in_law():
    # the first coordinate of a Haar-distributed unit vector in R^k has E[x^2] = 1/k
    k = 6
    first = np.array([generate_population(k, 1, RngStream(9, i)).sigma.eigenvectors[0, 0] for i in range(4000)])
    assert abs(np.mean(first**2) - 1 / k) <= 4 * np.std(first**2) / np.sqrt(first.size)


def test_projection_generator():
    M = generate_projection(10, 3, RngStream(2))
    np.testing.assert_array_equal(M[0], np.full(10, 0.1))
    assert np.all(np.abs(M[1:]) <= 0.1)
    assert generate_projection(10, 1, RngStream(2)).shape == (1, 10)


def test_config_invariants():
    assert resolve_rank(0.5, 5) == 3
    cfg = ExperimentConfig(n=500, k=750, c=0.5, master_seed=1)
    assert cfg.r == 250 and cfg.resolved_kappa == 1 / 500
    assert ExperimentConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
    with pytest.raises(ConfigError, match="r = round"):
        ExperimentConfig(n=500, k=200, c=0.5, master_seed=1)
    with pytest.raises(ConfigError):
        ExperimentConfig(n=10, k=20, c=0.5, master_seed=1, n_reps=50)
    with pytest.raises(ConfigError):
        ExperimentConfig(n=10, k=20, c=0.5, master_seed=1, method="other")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"n": 10, "k": 20, "c": 0.5, "master_seed": 1, "bogus": 1})


def test_kde_kernel_examples():
    est = kde_epanechnikov([0.0, 0.0], [0.0, 1.5, -1.5], bandwidth=1.0)
    np.testing.assert_allclose(est.density, [0.75, 0.0, 0.0])
    u = np.linspace(-1, 1, 100_000)
    assert abs(np.trapezoid(0.75 * (1 - u * u), u) - 1) <= 1e-8


def test_kde_matches_direct_sum(gen):
    x = gen.standard_normal(500)
    grid = np.linspace(-3, 3, 61)
    est = kde_epanechnikov(x, grid, bandwidth=0.4)
    u = (grid[:, None] - x[None, :]) / 0.4
    direct = np.sum(np.where(np.abs(u) <= 1, 0.75 * (1 - u * u), 0.0), axis=1) / (500 * 0.4)
    np.testing.assert_allclose(est.density, direct, atol=1e-12)


def test_kde_consistency_large_sample(gen):
    x = gen.standard_normal(100_000)
    est = kde_epanechnikov(x, np.linspace(-4, 4, 401))
    assert np.max(np.abs(est.density - normal_pdf(est.grid))) <= 0.02
    assert abs(est.mass() - 1) <= 0.05


def test_silverman_rule(gen):
    x = gen.standard_normal(1000)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    assert silverman_bandwidth(x) == pytest.approx(0.9 * min(x.std(ddof=1), iqr / 1.34) * 1000 ** -0.2)
    with pytest.raises(DegenerateSample):
        kde_epanechnikov([1.0, 1.0, 1.0], [0.0])


def test_ks_examples(gen):
    assert ks_statistic([0.0], "std_normal") == pytest.approx(0.5)
    assert ks_statistic([2 * np.log(2)], "chi2(2)") == pytest.approx(0.5)
    x = gen.standard_normal(100_000)
    assert ks_statistic(x) <= 3 * 1.95 / np.sqrt(x.size)
    assert ks_statistic(x) == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-12)
    y = gen.chisquare(7, 1000)
    assert ks_statistic(y, "chi2(7)") == pytest.approx(stats.kstest(y, "chi2", args=(7,)).statistic, abs=1e-10)
    with pytest.raises(EmptySample):
        ks_statistic([])
    with pytest.raises(ValueError):
        ks_statistic([1.0], "gamma(2)")


def test_replications_are_index_addressed():
    cfg = ExperimentConfig(n=30, k=20, c=0.5, master_seed=4, n_reps=200)
    root, _, spec = _population_and_spec(cfg)
    one, _ = run_replications(spec, root, 200, workers=1)
    many, _ = run_replications(spec, root, 200, workers=3)
    np.testing.assert_array_equal(one, many)
    # each replication depends only on its index
    from singwish.product import sample_product

    assert sample_product(spec, root.child("replication", 137)) == one[137]


def test_run_experiment_determinism_and_summary():
    cfg = ExperimentConfig(n=40, k=30, c=0.5, master_seed=11, n_reps=500)
    a = run_experiment(cfg, workers=1)
    b = run_experiment(cfg, workers=2)
    np.testing.assert_array_equal(a.standardized_samples, b.standardized_samples)
    assert a.summary() == b.summary()
    assert 0 <= a.ks_vs_normal <= 1
    assert "timing" not in a.summary() and set(a.summary(include_timing=True)["timing"]) >= {"sampling"}


def test_naive_and_stochrep_experiments_agree():
    # k = 12 rather than 10: r = round(0.5 * 20) = 10 must stay below k
    kw = dict(n=20, k=12, c=0.5, n_reps=10_000)
    a = run_experiment(ExperimentConfig(master_seed=5, method="stochrep", **kw))
    b = run_experiment(ExperimentConfig(master_seed=5, method="naive", **kw))
    assert stats.ks_2samp(a.standardized_samples, b.standardized_samples).statistic <= 1.63 * np.sqrt(2 / 10_000)


@pytest.mark.slow
@pytest.mark.parametrize("c", [0.1, 0.5, 0.8, 0.95])
def test_large_regimes_run_cleanly(c):
    res = run_experiment(ExperimentConfig(n=500, k=750, c=c, master_seed=7, n_reps=2000))
    assert res.clamp.draws == 2000
    assert res.clamp.rate < 1e-3
    assert abs(res.kde.mass() - 1) <= 0.05


def test_stochrep_cost_independent_of_n():
    pop = generate_population(300, 100, RngStream(1))
    from singwish.samplers import GaussianSpec

    def spec(n):
        return ProductSpec(GaussianSpec(pop.mu, 1 / n, pop.sigma), n, pop.m)

    t500 = time_per_draw(spec(500), "stochrep", 2000, repeats=5)
    t1000 = time_per_draw(spec(1000), "stochrep", 2000, repeats=5)
    assert abs(t1000 - t500) / t500 < 0.2
