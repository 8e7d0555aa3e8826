"""Characteristic function of ``A z`` as a one-dimensional chi-square mixture integral.

For a direction u write ``v = R^T u``. The Gaussian part of the expectation
can be integrated in closed form, leaving

    phi(u) = prefactor * int_0^inf |Omega(zeta)|^{-1/2} f_n(zeta)
             * exp(i zeta nu'Lambda v - zeta^2/2 v'Lambda Omega^{-1} Lambda v + nu'Omega nu / 2) dzeta

with ``Omega(zeta) = Lambda^{-1}/kappa + zeta (v'Lambda v Lambda - Lambda v v' Lambda)`` and
``nu = Omega^{-1} Lambda^{-1} R^T mu / kappa``.

Evaluation uses the normalised matrix
``W(zeta) = kappa Lambda^{1/2} Omega(zeta) Lambda^{1/2} = I + kappa zeta C`` with
``C = (v'Lambda v) Lambda^2 - a a'`` and ``a = Lambda^{3/2} v``. One symmetric
eigendecomposition ``C = V diag(gamma) V'`` turns every zeta-dependent term into
a sum over ``1 / (1 + kappa zeta gamma_j)``:

    log-modulus  = log f_n(zeta) - sum log(1 + kappa zeta gamma)/2
                   - zeta h'W^{-1}Ch/2 - kappa zeta^2 a'W^{-1}a/2
    phase        = zeta h'W^{-1}a,       h = Lambda^{-1/2} R^T mu.

The prefactor and the ``nu'Omega nu`` term cancel analytically into the
``h'W^{-1}Ch`` term, so nothing overflows at n = 500 and no large numbers are
subtracted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammainc, gammaincc, gammaln

from .errors import DomainError, EmptySample, IllConditioned, QuadratureNonConvergence
from .rng import RngLike, substreams
from .samplers import GaussianSpec, WishartSpec, sample_singular_normal, sample_singular_wishart
from .spectral import pseudo_inverse_quadratic


@dataclass(frozen=True)
class CfQuadratureConfig:
    rel_tol: float = 1e-8
    tail_mass: float = 1e-12
    max_subdivisions: int = 2000
    initial_panels: int = 16

    def __post_init__(self):
        if not 0 < self.rel_tol < 1e-2:
            raise ValueError(f"rel_tol must lie in (0, 1e-2), got {self.rel_tol}")
        if not 0 < self.tail_mass < 1e-6:
            raise ValueError(f"tail_mass must lie in (0, 1e-6), got {self.tail_mass}")
        if self.max_subdivisions < 1 or self.initial_panels < 1:
            raise ValueError("max_subdivisions and initial_panels must be positive")


@dataclass(frozen=True)
class CfResult:
    value: complex
    abserr: float
    evaluations: int
    interval: tuple[float, float]


def chi2_logpdf(zeta, n: int):
    """Log density of chi-square(n)."""
    z = np.asarray(zeta, dtype=float)
    if np.any(z <= 0):
        raise DomainError("chi-square log density needs zeta > 0")
    if n < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {n}")
    half = 0.5 * n
    out = (half - 1.0) * np.log(z) - 0.5 * z - half * np.log(2.0) - gammaln(half)
    return float(out) if np.ndim(out) == 0 else out


def chi2_tail_bounds(n: int, tail_mass: float) -> tuple[float, float]:
    """``(lo, hi)`` with ``P(zeta < lo) <= tail/2`` and ``P(zeta > hi) <= tail/2``."""
    a = 0.5 * n
    half_tail = 0.5 * tail_mass
    hi = max(float(n), 1.0)
    while gammaincc(a, 0.5 * hi) > half_tail:
        hi *= 2.0
    upper = brentq(lambda x: gammaincc(a, 0.5 * x) - half_tail, 0.0, hi, xtol=1e-12, rtol=1e-14)
    # the CDF is 0 at 0 and about 1/2 at n, so [0, n] always brackets the lower quantile
    lower = brentq(lambda x: gammainc(a, 0.5 * x) - half_tail, 0.0, float(n), xtol=1e-300, rtol=1e-14)
    return lower, upper


class CfIntegrand:
    """Per-direction scratch state; callable on arrays of zeta."""

    def __init__(self, u, spec: GaussianSpec, n: int):
        sig = spec.sigma
        lam = sig.eigenvalues
        self.n = int(n)
        self.kappa = float(spec.kappa)
        self.v = np.asarray(u, dtype=float) @ sig.eigenvectors
        self.h = (spec.mu @ sig.eigenvectors) / np.sqrt(lam)
        a = lam**1.5 * self.v
        vlv = float(np.sum(lam * self.v**2))
        C = vlv * np.diag(lam**2) - np.outer(a, a)
        gamma, V = np.linalg.eigh(0.5 * (C + C.T))
        scale = max(vlv * float(lam[-1] ** 2), np.finfo(float).tiny)
        if gamma[0] < -1e-10 * scale:
            raise IllConditioned(f"zeta-coefficient of Omega is not PSD (eigenvalue {gamma[0]:.3g})")
        self.gamma = np.clip(gamma, 0.0, None)
        self.a_t = V.T @ a
        self.h_t = V.T @ self.h

    def log_terms(self, zeta):
        zeta = np.asarray(zeta, dtype=float)
        kz = self.kappa * zeta[..., None] * self.gamma
        winv = 1.0 / (1.0 + kz)
        logdet = np.sum(np.log1p(kz), axis=-1)
        d = zeta * np.sum(self.gamma * self.h_t**2 * winv, axis=-1)
        quad = self.kappa * zeta**2 * np.sum(self.a_t**2 * winv, axis=-1)
        phase = zeta * np.sum(self.h_t * self.a_t * winv, axis=-1)
        with np.errstate(divide="ignore"):
            log_f = np.where(zeta > 0, chi2_logpdf(np.where(zeta > 0, zeta, 1.0), self.n), -np.inf)
        log_mod = log_f - 0.5 * logdet - 0.5 * d - 0.5 * quad
        if np.any(np.isnan(log_mod)) or np.any(np.isnan(phase)):
            bad = np.asarray(zeta).reshape(-1)[np.isnan(np.atleast_1d(log_mod)).reshape(-1)]
            raise IllConditioned("integrand is not finite", zeta=float(bad[0]) if bad.size else None)
        return log_mod, phase

    def __call__(self, zeta):
        log_mod, phase = self.log_terms(zeta)
        return np.exp(log_mod + 1j * phase)

    def in_sqrt_variable(self, x):
        """Integrand after ``zeta = x^2``; smooth at 0 for every n >= 1."""
        x = np.asarray(x, dtype=float)
        zeta = x * x
        log_mod, phase = self.log_terms(zeta)
        with np.errstate(divide="ignore"):
            log_jac = np.log(2.0 * x)
        return np.where(x > 0, np.exp(log_mod + log_jac + 1j * phase), self._at_zero())

    def _at_zero(self):
        # 2x f_n(x^2) -> 2^{1/2} / Gamma(1/2) at x = 0 when n = 1, and 0 for n >= 2
        if self.n == 1:
            return np.sqrt(2.0 / np.pi) + 0j
        return 0j


def adaptive_simpson(f, a: float, b: float, tol: float, max_subdivisions: int, panels: int = 16):
    """Breadth-first adaptive Simpson for a vectorised complex integrand.

    An interval is accepted when ``|S_left + S_right - S| <= 15 * tol * width / (b - a)``.
    Returns ``(value, error_estimate, evaluations)``.
    """
    edges = np.linspace(a, b, panels + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    f_edges = f(edges)
    f_lo, f_hi, f_mid = f_edges[:-1], f_edges[1:], f(mid)
    evaluations = edges.size + mid.size
    whole = (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi)
    total = 0j
    err = 0.0
    splits = 0
    width = b - a
    while lo.size:
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        f_new = f(np.concatenate([lm, rm]))
        evaluations += f_new.size
        f_lm, f_rm = f_new[: lo.size], f_new[lo.size:]
        left = (mid - lo) / 6.0 * (f_lo + 4.0 * f_lm + f_mid)
        right = (hi - mid) / 6.0 * (f_mid + 4.0 * f_rm + f_hi)
        diff = np.abs(left + right - whole)
        ok = diff <= 15.0 * tol * (hi - lo) / width
        ok |= (hi - lo) <= 1e-13 * max(abs(a), abs(b), 1.0)
        refined = left + right + (left + right - whole) / 15.0
        total += np.sum(refined[ok])
        err += float(np.sum(diff[ok])) / 15.0
        keep = ~ok
        n_keep = int(np.count_nonzero(keep))
        splits += n_keep
        if splits > max_subdivisions:
            raise QuadratureNonConvergence(
                f"adaptive Simpson exhausted {max_subdivisions} subdivisions "
                f"({n_keep} intervals still open)"
            )
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        f_lo_new = np.concatenate([f_lo[keep], f_mid[keep]])
        f_hi_new = np.concatenate([f_mid[keep], f_hi[keep]])
        f_mid = np.concatenate([f_lm[keep], f_rm[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        f_lo, f_hi = f_lo_new, f_hi_new
        mid = 0.5 * (lo + hi)
    return complex(total), err, evaluations


def cf_product_result(u, spec: GaussianSpec, n: int, cfg: CfQuadratureConfig | None = None) -> CfResult:
    cfg = cfg or CfQuadratureConfig()
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != spec.k or not np.all(np.isfinite(u)):
        raise ValueError(f"u must be a finite vector of length {spec.k}")
    v = u @ spec.sigma.eigenvectors
    # u'A = 0 whenever R^T u = 0, so the law of u'Az is a point mass at 0
    if np.linalg.norm(v) <= 1e-14 * np.linalg.norm(u):
        return CfResult(1 + 0j, 0.0, 0, (0.0, 0.0))
    integrand = CfIntegrand(u, spec, n)
    lo, hi = chi2_tail_bounds(int(n), cfg.tail_mass)
    x_lo, x_hi = np.sqrt(lo), np.sqrt(hi)
    value, err, evals = adaptive_simpson(
        integrand.in_sqrt_variable, x_lo, x_hi, cfg.rel_tol, cfg.max_subdivisions, cfg.initial_panels
    )
    return CfResult(value, err + cfg.tail_mass, evals, (lo, hi))


def cf_product(u, spec: GaussianSpec, n: int, cfg: CfQuadratureConfig | None = None) -> complex:
    """``E exp(i u^T A z)`` for ``A ~ W_k(n, Sigma)`` independent of ``z ~ N_k(mu, kappa Sigma)``.

    The error is controlled relative to the unit mass of the chi-square
    mixing density, which bounds the integral of ``|integrand|``.
    """
    return cf_product_result(u, spec, n, cfg).value


def cf_product_direct(u, spec: GaussianSpec, n: int, zeta):
    """Unsimplified integrand (prefactor, Omega, nu, determinant) at given zeta.

    Used to cross-check the normalised evaluation; numerically fragile for
    large r or small kappa.
    """
    sig = spec.sigma
    lam, R = sig.eigenvalues, sig.eigenvectors
    kappa = spec.kappa
    u = np.asarray(u, dtype=float)
    v = R.T @ u
    usu = float(sig.quadratic(u))
    mu = spec.mu
    pref = np.exp(-0.5 / kappa * pseudo_inverse_quadratic(sig, mu)) / (kappa ** (0.5 * sig.r) * np.sqrt(np.prod(lam)))
    out = []
    for z in np.atleast_1d(zeta):
        L = np.diag(lam)
        omega = np.diag(1.0 / (kappa * lam)) + z * (L * usu - np.outer(lam * v, lam * v))
        nu = np.linalg.solve(omega, (R.T @ mu) / lam) / kappa
        lv = lam * v
        expo = 1j * z * (nu @ lv) - 0.5 * z**2 * lv @ np.linalg.solve(omega, lv) + 0.5 * nu @ omega @ nu
        f = np.exp(chi2_logpdf(z, n))
        out.append(pref * f * np.exp(expo) / np.sqrt(np.linalg.det(omega)))
    return np.array(out)


def empirical_cf(samples, u) -> complex:
    """Mean of ``exp(i u^T x)`` over the rows of ``samples``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise EmptySample("empirical characteristic function needs at least one sample")
    x = x.reshape(x.shape[0], -1) if x.ndim > 1 else x.reshape(-1, 1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if not np.any(u):
        return 1 + 0j
    phase = x @ u
    return complex(np.mean(np.cos(phase)), np.mean(np.sin(phase)))


def sample_az_naive(spec: GaussianSpec, n: int, rng: RngLike, size: int) -> np.ndarray:
    """Brute-force draws of the full vector ``A z``, shape (size, k)."""
    g_a, g_z = substreams(rng, "wishart", "z")
    wspec = WishartSpec(n, spec.sigma)
    k = spec.k
    out = np.empty((size, k))
    step = max(1, min(size, (1 << 20) // (k * k + k * n)))
    for start in range(0, size, step):
        b = min(step, size - start)
        A = sample_singular_wishart(wspec, g_a, size=b)
        z = sample_singular_normal(spec, g_z, size=b)
        out[start:start + b] = np.einsum("bij,bj->bi", A, z)
    return out
