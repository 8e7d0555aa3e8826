"""Samplers for ``M A z`` and ``m^T A z`` with A singular Wishart and z singular normal.

The stochastic-representation samplers never build A: each draw costs one
chi-square variate, one singular normal vector and one small Gaussian
vector. ``sample_product_naive`` materialises A and is kept as the
brute-force oracle.

Draws are taken from three substreams tagged ``zeta``, ``z`` and ``z0`` (in
that order), so the scalar path and the vector path with ``M = m^T`` see the
same ingredients for the same ``RngStream``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDirection,
    DimensionGuard,
    NumericalBreakdown,
    SpecViolation,
    ZeroProjection,
)
from .rng import RngLike, substreams
from .samplers import (
    GaussianSpec,
    WishartSpec,
    sample_chi2,
    sample_singular_normal,
    sample_singular_wishart,
    sample_standard_normal,
)
from .spectral import sym_pd_powers

CLAMP_WINDOW = 1e-9
RANK_RTOL = 1e-10
NAIVE_MAX_K = 2000
# Rows of k-dimensional scratch per stochastic-representation chunk.
_CHUNK_DOUBLES = 1 << 18


@dataclass
class ClampStats:
    """Caller-owned counter of clamped negative rounding residues."""

    draws: int = 0
    clamps: int = 0

    @property
    def rate(self) -> float:
        return self.clamps / self.draws if self.draws else 0.0


@dataclass(frozen=True, eq=False)
class ProductSpec:
    """A problem instance: the law of z, Wishart degrees of freedom n, and M or m.

    A 1-D ``projection`` selects the scalar case ``m^T A z``; a 2-D one the
    vector case ``M A z``.
    """

    gaussian: GaussianSpec
    n: int
    projection: np.ndarray
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        proj = np.array(self.projection, dtype=float)
        proj.setflags(write=False)
        object.__setattr__(self, "projection", proj)
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"degrees of freedom must be a positive integer, got {self.n}")
        sig = self.gaussian.sigma
        if proj.ndim == 1:
            if proj.size != sig.k:
                raise ValueError(f"m has length {proj.size}, expected {sig.k}")
            msm = float(sig.quadratic(proj))
            if msm <= 1e-12 * sig.lambda_max * float(proj @ proj):
                raise DegenerateDirection(f"m^T Sigma m = {msm:.3g} must be positive")
        elif proj.ndim == 2:
            p, k = proj.shape
            if k != sig.k:
                raise ValueError(f"M has {k} columns, expected {sig.k}")
            sv = np.linalg.svd(proj, compute_uv=False)
            if sv.size < p or sv[-1] <= RANK_RTOL * sv[0]:
                raise SpecViolation(f"M must have full row rank {p}")
            if not p < sig.r:
                raise SpecViolation(f"vector case needs p < r, got p={p}, r={sig.r}")
            if not sig.r <= self.n:
                raise SpecViolation(f"vector case needs r <= n, got r={sig.r}, n={self.n}")
            mrl = (proj @ sig.eigenvectors) * sig.eigenvalues
            if np.abs(mrl).max() <= 1e-12 * sig.lambda_max * np.abs(proj).max():
                raise ZeroProjection("M Sigma vanishes")
        else:
            raise ValueError("projection must be a vector m or a matrix M")

    @property
    def is_scalar(self) -> bool:
        return self.projection.ndim == 1

    @property
    def p(self) -> int:
        return 1 if self.is_scalar else self.projection.shape[0]

    @property
    def wishart(self) -> WishartSpec:
        return WishartSpec(self.n, self.gaussian.sigma)

    @property
    def matrix(self) -> np.ndarray:
        """M, with m promoted to a 1 x k row."""
        return np.atleast_2d(self.projection)

    def mean(self) -> np.ndarray | float:
        """``E[M A z] = n M Sigma mu``."""
        sig = self.gaussian.sigma
        m = self.n * (self.matrix @ sig.apply(self.gaussian.mu))
        return float(m[0]) if self.is_scalar else m

    def projection_cache(self) -> "ProjectionCache":
        if "projection" not in self._cache:
            self._cache["projection"] = ProjectionCache.build(self.matrix, self.gaussian.sigma)
        return self._cache["projection"]


@dataclass(frozen=True, eq=False)
class ProjectionCache:
    """Per-spec constants of the vector representation.

    ``P = (M Sigma M^T)^{-1/2} M Sigma^{1/2}`` has orthonormal rows;
    ``Q = P^T P`` is never formed.
    """

    P: np.ndarray
    half: np.ndarray
    msigma: np.ndarray
    msigma_half: np.ndarray

    @classmethod
    def build(cls, M, sigma) -> "ProjectionCache":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        R, lam = sigma.eigenvectors, sigma.eigenvalues
        MR = M @ R
        H = (MR * lam) @ MR.T
        half, inv_half = sym_pd_powers(H)
        msigma_half = (MR * np.sqrt(lam)) @ R.T
        P = inv_half @ msigma_half
        err = np.abs(P @ P.T - np.eye(M.shape[0])).max()
        if err > 1e-8:
            raise SpecViolation(f"P P^T deviates from the identity by {err:.3g}")
        return cls(P=P, half=half, msigma=(MR * lam) @ R.T, msigma_half=msigma_half)


def _clamp(values, scale, what, stats):
    """Zero out tiny negative rounding residues; anything more negative is a bug."""
    bad = values < -CLAMP_WINDOW * scale
    if np.any(bad):
        worst = float(np.min(values[bad] / np.maximum(scale[bad], np.finfo(float).tiny)))
        raise NumericalBreakdown(f"{what} is negative beyond the clamp window (relative {worst:.3g})")
    neg = values < 0
    if stats is not None:
        stats.draws += values.size
        stats.clamps += int(np.count_nonzero(neg))
    return np.where(neg, 0.0, values)


def _chunk_rows(k: int, total: int) -> int:
    return max(1, min(total, _CHUNK_DOUBLES // max(k, 1)))


def sample_product_scalar_stochrep(spec: ProductSpec, rng: RngLike, size=None, stats: ClampStats | None = None):
    """``zeta m^T Sigma z + sqrt(zeta) [z^T Sigma z m^T Sigma m - (m^T Sigma z)^2]^{1/2} z0``."""
    if not spec.is_scalar:
        raise SpecViolation("scalar sampler needs a vector m")
    g_zeta, g_z, g_z0 = substreams(rng, "zeta", "z", "z0")
    sig = spec.gaussian.sigma
    m = spec.projection
    msm = float(sig.quadratic(m))
    m_sigma = sig.apply(m)
    total = 1 if size is None else int(size)
    out = np.empty(total)
    step = _chunk_rows(sig.k, total)
    for start in range(0, total, step):
        b = min(step, total - start)
        zeta = sample_chi2(spec.n, g_zeta, size=b)
        z = sample_singular_normal(spec.gaussian, g_z, size=b)
        z0 = g_z0.standard_normal(b)
        a = z @ m_sigma
        zsz = sig.quadratic(z)
        bracket = _clamp(zsz * msm - a * a, zsz * msm, "z'Sz m'Sm - (m'Sz)^2", stats)
        out[start:start + b] = zeta * a + np.sqrt(zeta * bracket) * z0
    return float(out[0]) if size is None else out


def sample_product_vector_stochrep(spec: ProductSpec, rng: RngLike, size=None, stats: ClampStats | None = None):
    """Vector representation of ``M A z``.

    With ``t = Sigma^{1/2} z`` and ``s = P t`` a draw is
    ``zeta M Sigma^{1/2} t + sqrt(zeta) H^{1/2} B z0`` where
    ``H = M Sigma M^T`` and ``B = |t| I - s s^T / (|t| + sqrt(t't - s's))``.
    B is the symmetric root of ``t't I - s s^T``.
    """
    g_zeta, g_z, g_z0 = substreams(rng, "zeta", "z", "z0")
    cache = spec.projection_cache()
    sig = spec.gaussian.sigma
    p = spec.p
    total = 1 if size is None else int(size)
    out = np.empty((total, p))
    step = _chunk_rows(sig.k, total)
    for start in range(0, total, step):
        b = min(step, total - start)
        zeta = sample_chi2(spec.n, g_zeta, size=b)
        z = sample_singular_normal(spec.gaussian, g_z, size=b)
        z0 = sample_standard_normal(p, g_z0, size=b)
        t = sig.apply(z, power=0.5)
        tt = np.einsum("ij,ij->i", t, t)
        s = t @ cache.P.T
        ss = np.einsum("ij,ij->i", s, s)
        rest = _clamp(tt - ss, tt, "t'(I - Q)t", stats)
        norm_t = np.sqrt(tt)
        coef = 1.0 / np.maximum(norm_t + np.sqrt(rest), np.finfo(float).tiny)
        # B z0 = |t| z0 - coef * s (s'z0)
        bz0 = norm_t[:, None] * z0 - (coef * np.einsum("ij,ij->i", s, z0))[:, None] * s
        mean_part = t @ cache.msigma_half.T
        out[start:start + b] = zeta[:, None] * mean_part + np.sqrt(zeta)[:, None] * (bz0 @ cache.half.T)
    return out[0] if size is None else out


def sample_product_stochrep(spec: ProductSpec, rng: RngLike, size=None, stats: ClampStats | None = None):
    if spec.is_scalar:
        return sample_product_scalar_stochrep(spec, rng, size, stats)
    return sample_product_vector_stochrep(spec, rng, size, stats)


def sample_product_naive(spec: ProductSpec, rng: RngLike, size=None, max_k: int = NAIVE_MAX_K):
    """Brute force: draw A and an independent z, return ``M A z`` (``m^T A z``)."""
    k = spec.gaussian.k
    if k > max_k:
        raise DimensionGuard(f"naive sampler refuses k={k} > {max_k}")
    g_a, g_z = substreams(rng, "wishart", "z")
    total = 1 if size is None else int(size)
    M = spec.matrix
    out = np.empty((total, spec.p))
    per_draw = k * k + k * spec.n
    step = max(1, min(total, (1 << 20) // per_draw))
    for start in range(0, total, step):
        b = min(step, total - start)
        A = sample_singular_wishart(spec.wishart, g_a, size=b)
        z = sample_singular_normal(spec.gaussian, g_z, size=b)
        out[start:start + b] = np.einsum("ij,bjk,bk->bi", M, A, z, optimize=True)
    if spec.is_scalar:
        return float(out[0, 0]) if size is None else out[:, 0]
    return out[0] if size is None else out


def sample_product(spec: ProductSpec, rng: RngLike, size=None, method: str = "stochrep", stats=None):
    if method == "stochrep":
        return sample_product_stochrep(spec, rng, size, stats)
    if method == "naive":
        return sample_product_naive(spec, rng, size)
    raise ValueError(f"unknown method {method!r}; expected 'stochrep' or 'naive'")
