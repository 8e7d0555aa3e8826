"""Random generation: chi-square scalars, singular normals, singular Wishart matrices.

All samplers take an ``rng`` that is either an ``RngStream`` (a fresh
generator is built from it, so equal streams give equal draws) or a live
``numpy.random.Generator`` (consumed statefully). ``size=None`` returns one
draw; an integer returns a leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirection, ZeroProjection
from .rng import RngLike, as_generator
from .spectral import SpectralCovariance

# Budget (in doubles) for the scratch arrays of one Wishart batch.
_WISHART_BUDGET = 1 << 20
_WISHART_BLOCK = 64


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """The law ``N_k(mu, kappa * Sigma)``."""

    mu: np.ndarray
    kappa: float
    sigma: SpectralCovariance

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if mu.size != self.sigma.k:
            raise ValueError(f"mu has length {mu.size}, Sigma is {self.sigma.k} x {self.sigma.k}")

    @property
    def k(self) -> int:
        return self.sigma.k


@dataclass(frozen=True, eq=False)
class WishartSpec:
    n: int
    sigma: SpectralCovariance

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"degrees of freedom must be a positive integer, got {self.n}")


def sample_chi2(n: int, rng: RngLike, size=None):
    """Chi-square draws with n degrees of freedom.

    ``n <= 2`` sums squared normals; larger n uses ``2 * Gamma(n/2, 1)`` so the
    cost does not grow with n.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"chi-square degrees of freedom must be >= 1, got {n}")
    n = int(n)
    gen = as_generator(rng)
    if n <= 2:
        shape = (n,) if size is None else (size, n)
        x = gen.standard_normal(shape)
        return np.sum(x * x, axis=-1) if size is not None else float(np.sum(x * x))
    g = 2.0 * gen.standard_gamma(0.5 * n, size=size)
    return float(g) if size is None else g


def sample_standard_normal(dim: int, rng: RngLike, size=None) -> np.ndarray:
    shape = (dim,) if size is None else (size, dim)
    return as_generator(rng).standard_normal(shape)


def sample_singular_normal(spec: GaussianSpec, rng: RngLike, size=None) -> np.ndarray:
    """``mu + sqrt(kappa) R Lambda^{1/2} y`` with y standard normal in R^r."""
    sig = spec.sigma
    y = sample_standard_normal(sig.r, rng, size)
    return spec.mu + np.sqrt(spec.kappa) * ((y * np.sqrt(sig.eigenvalues)) @ sig.eigenvectors.T)


def sample_singular_wishart(spec: WishartSpec, rng: RngLike, size=None) -> np.ndarray:
    """``A = X X^T`` with n independent ``N_k(0, Sigma)`` columns.

    X is never held in full: columns are produced in blocks and accumulated
    into A, so scratch memory is O(k^2 + k * block) per draw.
    """
    gen = as_generator(rng)
    sig = spec.sigma
    k, r, n = sig.k, sig.r, int(spec.n)
    L = sig.eigenvectors * np.sqrt(sig.eigenvalues)
    block = min(n, _WISHART_BLOCK)
    total = 1 if size is None else int(size)
    per_draw = k * k + k * block + r * block
    chunk = max(1, min(total, _WISHART_BUDGET // per_draw))
    out = np.empty((total, k, k))
    for start in range(0, total, chunk):
        b = min(chunk, total - start)
        A = np.zeros((b, k, k))
        for col in range(0, n, block):
            w = min(block, n - col)
            X = L @ gen.standard_normal((b, r, w))
            A += X @ X.transpose(0, 2, 1)
        out[start:start + b] = 0.5 * (A + A.transpose(0, 2, 1))
    return out[0] if size is None else out


def project_wishart(M, A, sigma: SpectralCovariance | None = None, tol: float = 1e-12) -> np.ndarray:
    """``M A M^T`` (symmetrised); works on a batch of A along the leading axis.

    When Sigma is given, ``M Sigma = 0`` (checked on ``M R Lambda``) raises
    ZeroProjection.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    A = np.asarray(A, dtype=float)
    if sigma is not None:
        mrl = (M @ sigma.eigenvectors) * sigma.eigenvalues
        if np.abs(mrl).max() <= tol * max(1.0, sigma.lambda_max) * max(1.0, np.abs(M).max()):
            raise ZeroProjection("M Sigma vanishes: the projection carries no Wishart mass")
    X = M @ A @ M.T
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def whitened_quadratic_form(w, A, sigma: SpectralCovariance, tol: float = 1e-12):
    """``w^T A w / w^T Sigma w``; chi-square(n) distributed when A ~ W_k(n, Sigma)."""
    w = np.asarray(w, dtype=float).reshape(-1)
    denom = float(sigma.quadratic(w))
    if denom <= tol * sigma.lambda_max * float(w @ w):
        raise DegenerateDirection(f"w^T Sigma w = {denom:.3g}: w lies in the null space of Sigma")
    A = np.asarray(A, dtype=float)
    num = np.einsum("i,...ij,j->...", w, A, w)
    return num / denom if num.ndim else float(num) / denom
