"""Monte Carlo study of the normal approximation, and the sampler benchmark."""

from __future__ import annotations

import math
import re
import time
import tracemalloc
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, NamedTuple

import numpy as np
from scipy.special import gammainc, ndtr

from .asymptotics import AsymptoticParams, sigma2, standardize_scalar
from .errors import ConfigError, DegenerateSample, EmptySample
from .product import ClampStats, ProductSpec, sample_product
from .rng import RngLike, RngStream, as_generator
from .samplers import GaussianSpec
from .spectral import SpectralCovariance

EIGENVALUE_FLOOR = 1e-12


class Population(NamedTuple):
    mu: np.ndarray
    sigma: SpectralCovariance
    m: np.ndarray


def haar_eigenvectors(k: int, r: int, gen: np.random.Generator) -> np.ndarray:
    """Top-r eigenvectors of ``G G^T`` with G a k x k standard normal matrix."""
    G = gen.standard_normal((k, k))
    _, vec = np.linalg.eigh(G @ G.T)
    return vec[:, ::-1][:, :r]


def generate_population(k: int, r: int, rng: RngLike) -> Population:
    """Random instance: Haar eigenvectors, uniform(0, 1) eigenvalues, uniform(-1, 1) mean, m = 1/k."""
    if not 1 <= r < k:
        raise ConfigError(f"need 1 <= r < k, got r={r}, k={k}")
    gen = as_generator(rng)
    vec = haar_eigenvectors(k, r, gen)
    lam = gen.uniform(0.0, 1.0, r)
    while np.any(lam < EIGENVALUE_FLOOR):
        low = lam < EIGENVALUE_FLOOR
        lam[low] = gen.uniform(0.0, 1.0, int(low.sum()))
    mu = gen.uniform(-1.0, 1.0, k)
    return Population(mu, SpectralCovariance(lam, vec), np.full(k, 1.0 / k))


def generate_projection(k: int, p: int, rng: RngLike) -> np.ndarray:
    """p x k matrix: first row ``1/k``, further rows iid uniform(-1, 1) / k."""
    M = np.empty((p, k))
    M[0] = 1.0 / k
    if p > 1:
        M[1:] = as_generator(rng).uniform(-1.0, 1.0, (p - 1, k)) / k
    return M


def resolve_rank(c: float, n: int) -> int:
    """``round(c n)`` with halves rounded up."""
    return int(math.floor(c * n + 0.5))


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    k: int
    c: float
    master_seed: int
    kappa: float | None = None
    n_reps: int = 10_000
    kde_grid: tuple[float, float, int] = (-4.0, 4.0, 401)
    method: str = "stochrep"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"n must be positive, got {self.n}")
        if not self.c > 0:
            raise ConfigError(f"c must be positive, got {self.c}")
        r = self.r
        if not 1 <= r < self.k:
            raise ConfigError(f"r = round(c*n) = {r} violates 1 <= r < k with k = {self.k}")
        if self.n_reps < 100:
            raise ConfigError(f"n_reps must be at least 100, got {self.n_reps}")
        if self.method not in ("stochrep", "naive"):
            raise ConfigError(f"method must be 'stochrep' or 'naive', got {self.method!r}")
        if self.kappa is not None and not self.kappa > 0:
            raise ConfigError(f"kappa must be positive, got {self.kappa}")
        lo, hi, points = self.kde_grid
        if not (hi > lo and int(points) >= 2):
            raise ConfigError(f"bad KDE grid {self.kde_grid}")
        object.__setattr__(self, "kde_grid", (float(lo), float(hi), int(points)))

    @property
    def r(self) -> int:
        return resolve_rank(self.c, self.n)

    @property
    def resolved_kappa(self) -> float:
        return 1.0 / self.n if self.kappa is None else float(self.kappa)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kde_grid"] = list(self.kde_grid)
        d["r"] = self.r
        d["kappa"] = self.resolved_kappa
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names - {"r"}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = {k: v for k, v in data.items() if k in names}
        if "kde_grid" in kwargs:
            kwargs["kde_grid"] = tuple(kwargs["kde_grid"])
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class KdeEstimate:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def mass(self) -> float:
        return float(np.trapezoid(self.density, self.grid))


@dataclass(eq=False)
class ExperimentResult:
    config: ExperimentConfig
    samples: np.ndarray
    standardized_samples: np.ndarray
    kde: KdeEstimate
    ks_vs_normal: float
    sup_density_gap: float
    sigma2: float
    clamp: ClampStats
    timing: dict = field(default_factory=dict)

    def summary(self, include_timing: bool = False) -> dict:
        out = {
            "config": self.config.to_dict(),
            "ks_vs_normal": self.ks_vs_normal,
            "sup_density_gap": self.sup_density_gap,
            "sigma2": self.sigma2,
            "bandwidth": self.kde.bandwidth,
            "kde_mass": self.kde.mass(),
            "clamp_events": self.clamp.clamps,
            "clamp_rate": self.clamp.rate,
            "standardized_mean": float(np.mean(self.standardized_samples)),
            "standardized_sd": float(np.std(self.standardized_samples, ddof=1)),
        }
        if include_timing:
            out["timing"] = dict(self.timing)
        return out


def silverman_bandwidth(x) -> float:
    """``0.9 * min(sd, IQR / 1.34) * N^{-1/5}``; falls back to sd when the IQR is 0."""
    x = np.asarray(x, dtype=float)
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    if not spread > 0:
        raise DegenerateSample("sample has zero spread; bandwidth undefined")
    return 0.9 * spread * x.size ** (-0.2)


def kde_epanechnikov(samples, grid, bandwidth: float | None = None) -> KdeEstimate:
    """Epanechnikov kernel density estimate on a grid.

    Sums run over the sorted sample with prefix sums of 1, x and x^2, so the
    cost is O((N + G) log N) rather than O(N G).
    """
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    if x.size < 2:
        raise DegenerateSample("KDE needs at least two samples")
    grid = np.asarray(grid, dtype=float)
    if bandwidth is None:
        h = silverman_bandwidth(x)
    else:
        h = float(bandwidth)
        if not h > 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    s1 = np.concatenate([[0.0], np.cumsum(x)])
    s2 = np.concatenate([[0.0], np.cumsum(x * x)])
    lo = np.searchsorted(x, grid - h, side="left")
    hi = np.searchsorted(x, grid + h, side="right")
    cnt = hi - lo
    sum1 = s1[hi] - s1[lo]
    sum2 = s2[hi] - s2[lo]
    sq = cnt * grid**2 - 2.0 * grid * sum1 + sum2
    dens = 0.75 * (cnt - sq / (h * h)) / (x.size * h)
    return KdeEstimate(grid, np.clip(dens, 0.0, None), h)


def _resolve_cdf(cdf) -> Callable:
    if callable(cdf):
        return cdf
    if cdf in ("std_normal", "norm", "normal"):
        return ndtr
    m = re.fullmatch(r"\s*chi2\(\s*(\d+)\s*\)\s*", str(cdf))
    if m:
        dof = int(m.group(1))
        return lambda x: gammainc(0.5 * dof, 0.5 * np.clip(x, 0.0, None))
    raise ValueError(f"unknown reference distribution {cdf!r}")


def ks_statistic(samples, cdf="std_normal") -> float:
    """Two-sided one-sample Kolmogorov-Smirnov distance to ``cdf``.

    ``cdf`` is ``"std_normal"``, ``"chi2(n)"`` or a vectorised callable.
    """
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    if x.size == 0:
        raise EmptySample("KS statistic needs at least one sample")
    F = _resolve_cdf(cdf)(x)
    N = x.size
    i = np.arange(1, N + 1)
    return float(max(np.max(i / N - F), np.max(F - (i - 1) / N)))


def normal_pdf(x):
    return np.exp(-0.5 * np.asarray(x, dtype=float) ** 2) / math.sqrt(2.0 * math.pi)


def _population_and_spec(cfg: ExperimentConfig):
    root = RngStream(cfg.master_seed)
    pop = generate_population(cfg.k, cfg.r, root.child("population"))
    gauss = GaussianSpec(pop.mu, cfg.resolved_kappa, pop.sigma)
    return root, pop, ProductSpec(gauss, cfg.n, pop.m)


def run_replications(spec: ProductSpec, root: RngStream, n_reps: int, method: str = "stochrep", workers: int = 1):
    """One draw per replication index, each from its own substream.

    Blocks of indices go to a thread pool and are reassembled by index, so the
    output does not depend on ``workers``.
    """
    stats_per_block = []

    def run_block(indices):
        stats = ClampStats()
        out = np.array([
            sample_product(spec, root.child("replication", int(i)), method=method, stats=stats)
            for i in indices
        ])
        stats_per_block.append(stats)
        return out

    blocks = np.array_split(np.arange(n_reps), max(1, min(n_reps, 4 * max(1, workers))))
    if workers <= 1:
        parts = [run_block(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_block, blocks))
    total = ClampStats(sum(s.draws for s in stats_per_block), sum(s.clamps for s in stats_per_block))
    return np.concatenate(parts), total


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    timing = {}
    t0 = time.perf_counter()
    root, pop, spec = _population_and_spec(cfg)
    params = AsymptoticParams.from_ratio(cfg.r, cfg.n, cfg.resolved_kappa)
    timing["population"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    raw, clamp = run_replications(spec, root, cfg.n_reps, cfg.method, workers)
    std = standardize_scalar(raw, pop.m, spec.gaussian, cfg.n, params)
    timing["sampling"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    lo, hi, points = cfg.kde_grid
    kde = kde_epanechnikov(std, np.linspace(lo, hi, points))
    timing["kde"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ks = ks_statistic(std, "std_normal")
    gap = float(np.max(np.abs(kde.density - normal_pdf(kde.grid))))
    timing["statistics"] = time.perf_counter() - t0

    return ExperimentResult(
        config=cfg,
        samples=raw,
        standardized_samples=std,
        kde=kde,
        ks_vs_normal=ks,
        sup_density_gap=gap,
        sigma2=sigma2(pop.m, spec.gaussian, params),
        clamp=clamp,
        timing=timing,
    )


def time_per_draw(spec: ProductSpec, method: str, n_draws: int, seed: int = 0, repeats: int = 3) -> float:
    """Best-of-``repeats`` wall-clock seconds per draw for a batch of ``n_draws``."""
    best = math.inf
    for rep in range(repeats):
        stream = RngStream(seed).child(f"benchmark-{method}", rep)
        t0 = time.perf_counter()
        sample_product(spec, stream, size=n_draws, method=method)
        best = min(best, time.perf_counter() - t0)
    return best / n_draws


def peak_bytes_one_draw(spec: ProductSpec, method: str, seed: int = 0) -> int:
    """Peak traced heap growth while producing a single draw."""
    if not spec.is_scalar:
        spec.projection_cache()
    stream = RngStream(seed).child(f"memory-{method}")
    tracemalloc.start()
    try:
        tracemalloc.reset_peak()
        base, _ = tracemalloc.get_traced_memory()
        sample_product(spec, stream, method=method)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    return int(peak - base)


def benchmark(cfg: ExperimentConfig, n_draws: int = 100, repeats: int = 3) -> dict:
    """Naive versus stochastic-representation cost at the config's (n, k, r)."""
    _, _, spec = _population_and_spec(cfg)
    per_naive = time_per_draw(spec, "naive", n_draws, cfg.master_seed, repeats)
    per_stoch = time_per_draw(spec, "stochrep", n_draws, cfg.master_seed, repeats)
    return {
        "config": {"n": cfg.n, "k": cfg.k, "r": cfg.r, "kappa": cfg.resolved_kappa,
                   "master_seed": cfg.master_seed, "n_draws": n_draws, "repeats": repeats},
        "kxk_bytes": cfg.k * cfg.k * 8,
        "naive": {"seconds_per_draw": per_naive, "peak_bytes": peak_bytes_one_draw(spec, "naive", cfg.master_seed)},
        "stochrep": {"seconds_per_draw": per_stoch, "peak_bytes": peak_bytes_one_draw(spec, "stochrep", cfg.master_seed)},
        "speedup": per_naive / per_stoch,
    }
