"""Double-asymptotic normal approximation of ``m^T A z`` and ``M A z``.

As ``r, n -> inf`` with ``r/n -> c``,

    sqrt(n) sigma^{-1} (m^T A z / n - m^T Sigma mu) -> N(0, 1),
    sigma^2 = (m'S mu)^2 + m'S m [kappa tr(S^2) + mu'S mu] + (kappa/c) m'S^3 m,

and the p-variate analogue with
``Omega = M S mu mu' S M' + M S M' [kappa tr(S^2) + mu'S mu] + (kappa/c) M S^3 M'``.
Everything is evaluated through the spectrum of Sigma.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateDirection, DegenerateProjection, ZeroConcentration
from .samplers import GaussianSpec
from .spectral import sym_pd_powers


class AssumptionWarning(UserWarning):
    """An instance looks far from the regime the normal approximation assumes."""


@dataclass(frozen=True)
class AsymptoticParams:
    """Concentration ``c`` (rank over sample size) and scale ``kappa``.

    Build with ``from_ratio(r, n, kappa)`` to keep ``kappa / c`` as the exact
    ``kappa * n / r``.
    """

    c: float
    kappa: float
    derived: bool = False
    r: int | None = None
    n: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise ZeroConcentration(f"concentration c must be positive, got {self.c}")
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    @classmethod
    def from_ratio(cls, r: int, n: int, kappa: float) -> "AsymptoticParams":
        if r <= 0:
            raise ZeroConcentration(f"rank must be positive, got r={r}")
        if n <= 0:
            raise ValueError(f"n must be positive, got {n}")
        return cls(c=r / n, kappa=kappa, derived=True, r=int(r), n=int(n))

    @property
    def kappa_over_c(self) -> float:
        if self.derived:
            return self.kappa * self.n / self.r
        return self.kappa / self.c


def _params_for(spec: GaussianSpec, n: int, params: AsymptoticParams | None) -> AsymptoticParams:
    return params or AsymptoticParams.from_ratio(spec.sigma.r, n, spec.kappa)


def sigma2(m, spec: GaussianSpec, params: AsymptoticParams) -> float:
    sig = spec.sigma
    lam = sig.eigenvalues
    m = np.asarray(m, dtype=float).reshape(-1)
    wm = m @ sig.eigenvectors
    wmu = spec.mu @ sig.eigenvectors
    msm = float(np.sum(lam * wm * wm))
    if msm <= 1e-12 * sig.lambda_max * float(m @ m):
        raise DegenerateDirection(f"m^T Sigma m = {msm:.3g} must be positive")
    ms_mu = float(np.sum(lam * wm * wmu))
    mu_s_mu = float(np.sum(lam * wmu * wmu))
    ms3m = float(np.sum(lam**3 * wm * wm))
    return ms_mu**2 + msm * (params.kappa * float(np.sum(lam**2)) + mu_s_mu) + params.kappa_over_c * ms3m


def omega_matrix(M, spec: GaussianSpec, params: AsymptoticParams) -> np.ndarray:
    sig = spec.sigma
    lam = sig.eigenvalues
    M = np.atleast_2d(np.asarray(M, dtype=float))
    MR = M @ sig.eigenvectors
    wmu = spec.mu @ sig.eigenvectors
    msm = (MR * lam) @ MR.T
    ev = np.linalg.eigvalsh(0.5 * (msm + msm.T))
    if ev[0] <= 1e-12 * max(ev[-1], sig.lambda_max * float(np.max(np.sum(M * M, axis=1)))):
        raise DegenerateProjection("M Sigma M^T is not positive definite")
    ms_mu = MR @ (lam * wmu)
    mu_s_mu = float(np.sum(lam * wmu * wmu))
    ms3m = (MR * lam**3) @ MR.T
    omega = (
        np.outer(ms_mu, ms_mu)
        + msm * (params.kappa * float(np.sum(lam**2)) + mu_s_mu)
        + params.kappa_over_c * ms3m
    )
    return 0.5 * (omega + omega.T)


def standardize_scalar(samples, m, spec: GaussianSpec, n: int, params: AsymptoticParams | None = None):
    """``x -> sqrt(n) (x/n - m'Sigma mu) / sigma``; c defaults to r/n."""
    params = _params_for(spec, n, params)
    s = np.sqrt(sigma2(m, spec, params))
    center = float(np.asarray(m, dtype=float) @ spec.sigma.apply(spec.mu))
    x = np.asarray(samples, dtype=float)
    return np.sqrt(n) * (x / n - center) / s


def unstandardize_scalar(y, m, spec: GaussianSpec, n: int, params: AsymptoticParams | None = None):
    params = _params_for(spec, n, params)
    s = np.sqrt(sigma2(m, spec, params))
    center = float(np.asarray(m, dtype=float) @ spec.sigma.apply(spec.mu))
    return n * (np.asarray(y, dtype=float) * s / np.sqrt(n) + center)


def standardize_vector(samples, M, spec: GaussianSpec, n: int, params: AsymptoticParams | None = None):
    """``x -> sqrt(n) Omega^{-1/2} (x/n - M Sigma mu)``, centred at the constant ``M Sigma mu``."""
    params = _params_for(spec, n, params)
    M = np.atleast_2d(np.asarray(M, dtype=float))
    _, inv_half = sym_pd_powers(omega_matrix(M, spec, params))
    center = M @ spec.sigma.apply(spec.mu)
    x = np.asarray(samples, dtype=float)
    return np.sqrt(n) * (x / n - center) @ inv_half.T


@dataclass(frozen=True)
class AssumptionReport:
    lambda_min: float
    lambda_max: float
    max_mu_coherence: float
    max_m_coherence: float
    kappa_r: float

    def to_dict(self) -> dict:
        return asdict(self)


def validate_assumptions(spec: GaussianSpec, projection, n: int, l2: float = 10.0) -> AssumptionReport:
    """Report the eigenvalue bounds and coherences the approximation relies on.

    Advisory only: a single instance cannot violate statements about a
    sequence of growing problems, so problems are raised as
    ``AssumptionWarning``.
    """
    sig = spec.sigma
    R = sig.eigenvectors
    M = np.atleast_2d(np.asarray(projection, dtype=float))
    report = AssumptionReport(
        lambda_min=sig.lambda_min,
        lambda_max=sig.lambda_max,
        max_mu_coherence=float(np.max(np.abs(spec.mu @ R))),
        max_m_coherence=float(np.max(np.abs(M @ R))),
        kappa_r=float(spec.kappa * sig.r),
    )
    if sig.r >= sig.k:
        warnings.warn(f"Sigma has full rank r = k = {sig.k}; the results assume r < k", AssumptionWarning, stacklevel=2)
    if report.lambda_min < 1e-6:
        warnings.warn(f"smallest eigenvalue {report.lambda_min:.3g} is below 1e-6", AssumptionWarning, stacklevel=2)
    if report.kappa_r > 10:
        warnings.warn(f"kappa * r = {report.kappa_r:.3g} exceeds 10", AssumptionWarning, stacklevel=2)
    if report.max_mu_coherence > l2:
        warnings.warn(f"max |u_i' mu| = {report.max_mu_coherence:.3g} exceeds {l2}", AssumptionWarning, stacklevel=2)
    if report.max_m_coherence > l2:
        warnings.warn(f"max |u_i' m_j| = {report.max_m_coherence:.3g} exceeds {l2}", AssumptionWarning, stacklevel=2)
    return report
