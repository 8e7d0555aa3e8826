"""Linear algebra on rank-deficient symmetric matrices.

Every covariance in the package is carried as a ``SpectralCovariance``: the
positive eigenvalues (ascending) and the matching orthonormal eigenvectors.
Nothing here ever needs the null-space basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DowndateNotPSD,
    NotPositiveSemiDefinite,
    NotSymmetric,
    RankZero,
)

ORTHONORMALITY_TOL = 1e-10
SYMMETRY_RTOL = 1e-12
BETA_LIMIT = 1e-14


@dataclass(frozen=True)
class RankTolerance:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-12

    def __post_init__(self):
        if not (np.isfinite(self.abs_tol) and np.isfinite(self.rel_tol)):
            raise ValueError("rank tolerances must be finite")
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("rank tolerances must be non-negative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise ValueError("at least one rank tolerance must be positive")

    def threshold(self, lambda_max: float) -> float:
        return max(self.abs_tol, self.rel_tol * max(lambda_max, 0.0))


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralCovariance:
    """Rank-r factorisation ``Sigma = R diag(eigenvalues) R^T`` of a k x k PSD matrix.

    Parameters
    ----------
    eigenvalues : array of shape (r,)
        Strictly positive, ascending.
    eigenvectors : array of shape (k, r)
        Orthonormal columns.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        lam = _frozen(self.eigenvalues).reshape(-1)
        vec = _frozen(self.eigenvectors)
        if vec.ndim != 2 or vec.shape[1] != lam.shape[0]:
            raise ValueError(
                f"eigenvectors must be k x r with r={lam.shape[0]}, got shape {vec.shape}"
            )
        if lam.size == 0:
            raise RankZero("a covariance needs at least one positive eigenvalue")
        if vec.shape[1] > vec.shape[0]:
            raise ValueError("rank cannot exceed the ambient dimension")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValueError("stored eigenvalues must be finite and strictly positive")
        if np.any(np.diff(lam) < 0):
            order = np.argsort(lam, kind="stable")
            lam, vec = _frozen(lam[order]), _frozen(vec[:, order])
        gram_err = np.abs(vec.T @ vec - np.eye(lam.size)).max()
        if gram_err > ORTHONORMALITY_TOL:
            raise ValueError(f"eigenvectors are not orthonormal (max error {gram_err:.3g})")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", vec)

    @property
    def k(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def r(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    def matrix(self) -> np.ndarray:
        """Dense ``R Lambda R^T``. Allocates k x k; avoid on hot paths."""
        R = self.eigenvectors
        S = (R * self.eigenvalues) @ R.T
        return 0.5 * (S + S.T)

    def apply(self, x, power: float = 1.0) -> np.ndarray:
        """``Sigma^power x`` for x of shape (..., k), without forming Sigma."""
        R = self.eigenvectors
        return ((np.asarray(x, dtype=float) @ R) * self.eigenvalues**power) @ R.T

    def quadratic(self, x, power: float = 1.0):
        """``x^T Sigma^power x`` along the last axis."""
        w = np.asarray(x, dtype=float) @ self.eigenvectors
        return np.sum(w * w * self.eigenvalues**power, axis=-1)

    def trace(self, power: float = 1.0) -> float:
        return float(np.sum(self.eigenvalues**power))

    @classmethod
    def from_matrix(cls, S, tol: RankTolerance | None = None) -> "SpectralCovariance":
        return spectral_decompose(S, tol)

    @classmethod
    def identity(cls, k: int) -> "SpectralCovariance":
        return cls(np.ones(k), np.eye(k))


def spectral_decompose(S, tol: RankTolerance | None = None) -> SpectralCovariance:
    """Factor a symmetric PSD matrix, keeping eigenpairs above the rank threshold.

    The threshold is ``max(abs_tol, rel_tol * lambda_max)``. Eigenvalues below
    minus the threshold mean the input is not PSD.
    """
    tol = tol or RankTolerance()
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.abs(S).max(initial=0.0)))
    asym = float(np.abs(S - S.T).max(initial=0.0))
    if asym > SYMMETRY_RTOL * scale:
        raise NotSymmetric(f"matrix is not symmetric (max |S - S^T| = {asym:.3g})")
    lam, vec = np.linalg.eigh(0.5 * (S + S.T))
    threshold = tol.threshold(float(lam[-1]))
    if lam[0] < -threshold:
        raise NotPositiveSemiDefinite(
            f"eigenvalue {lam[0]:.6g} is below -{threshold:.3g}"
        )
    keep = lam > threshold
    if not np.any(keep):
        raise RankZero(f"no eigenvalue exceeds the rank threshold {threshold:.3g}")
    return SpectralCovariance(lam[keep], vec[:, keep])


def sqrt_psd(spec: SpectralCovariance) -> np.ndarray:
    """Symmetric square root ``R Lambda^{1/2} R^T``."""
    R = spec.eigenvectors
    X = (R * np.sqrt(spec.eigenvalues)) @ R.T
    return 0.5 * (X + X.T)


def pseudo_inverse_quadratic(spec: SpectralCovariance, x) -> float:
    """``x^T Sigma^+ x`` through the spectrum; zero exactly when ``R^T x = 0``."""
    w = np.asarray(x, dtype=float) @ spec.eigenvectors
    return float(np.sum(w * w / spec.eigenvalues))


def sym_pd_powers(H) -> tuple[np.ndarray, np.ndarray]:
    """``(H^{1/2}, H^{-1/2})`` of a small symmetric positive definite matrix."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    lam, vec = np.linalg.eigh(0.5 * (H + H.T))
    if lam[0] <= 0:
        raise NotPositiveSemiDefinite(f"matrix is not positive definite (min eigenvalue {lam[0]:.3g})")
    root = (vec * np.sqrt(lam)) @ vec.T
    inv_root = (vec / np.sqrt(lam)) @ vec.T
    return 0.5 * (root + root.T), 0.5 * (inv_root + inv_root.T)


def downdate_coefficient(beta):
    """``(1 - sqrt(1 - beta)) / beta`` written as ``1 / (1 + sqrt(1 - beta))``.

    The rewritten form has no 0/0 at ``beta = 0``; below ``BETA_LIMIT`` the
    analytic limit 1/2 is returned outright.
    """
    beta = np.asarray(beta, dtype=float)
    c = 1.0 / (1.0 + np.sqrt(np.clip(1.0 - beta, 0.0, None)))
    return np.where(beta < BETA_LIMIT, 0.5, c)


def rank_one_downdate_sqrt(D, b) -> np.ndarray:
    """Closed-form square-root factor of ``D - b b^T``.

    Returns ``X = D^{1/2} (I - c D^{-1/2} b b^T D^{-1/2})`` with
    ``c = (1 - sqrt(1 - beta)) / beta`` and ``beta = b^T D^{-1} b``.
    ``X X^T = D - b b^T`` always holds. X is symmetric, and then also
    ``X @ X = D - b b^T``, whenever D commutes with ``b b^T`` (for instance
    ``D = alpha I``, the whitened form used by the vector sampler).
    """
    D = np.atleast_2d(np.asarray(D, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if D.shape != (b.size, b.size):
        raise ValueError(f"D must be {b.size} x {b.size}, got {D.shape}")
    root, inv_root = sym_pd_powers(D)
    w = inv_root @ b
    beta = float(w @ w)
    if beta > 1.0 + 1e-12:
        raise DowndateNotPSD(f"b^T D^-1 b = {beta:.15g} exceeds 1; D - b b^T is not PSD")
    c = float(downdate_coefficient(min(beta, 1.0)))
    return root - c * np.outer(b, w)


def write_matrix_csv(path_or_file, S, r: int | None = None) -> None:
    """Row-major CSV with a leading ``# k=..,r=..`` comment line."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    k = S.shape[0]
    if r is None:
        r = int(np.linalg.matrix_rank(S)) if S.shape[0] == S.shape[1] else min(S.shape)
    lines = [f"# k={k},r={r}"]
    lines += [",".join(f"{v:.17g}" for v in row) for row in S]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise ValueError(f"{path}: no matrix rows")
    return np.array(rows, dtype=float)
