"""Dense small-matrix kernels shared by the regression and constraint code.

Everything here is a thin layer over LAPACK (through :mod:`scipy.linalg`)
that adds the rank/definiteness checks and the jitter policy the rest of
the package relies on. Matrices are plain ``numpy`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.linalg import lapack

#: Jitter ladder for :func:`cholesky`, as multiples of ``trace(A) / n``.
JITTER_START = 1e-12
JITTER_STOP = 1e-6


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a matrix is singular to working precision."""

    def __init__(self, message: str, rank: int | None = None, size: int | None = None):
        super().__init__(message)
        self.rank = rank
        self.size = size


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when Cholesky fails even after the full jitter escalation."""

    def __init__(self, message: str, max_jitter: float):
        super().__init__(message)
        self.max_jitter = max_jitter


@dataclass(frozen=True)
class QRFactor:
    """Householder QR factorisation ``A = Q R`` of a square matrix."""

    q: np.ndarray
    r: np.ndarray
    kind: str = field(default="qr", init=False)

    @property
    def size(self) -> int:
        return self.r.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve ``A x = b`` for a vector or a matrix of right-hand sides."""
        qtb = self.q.T @ b
        x, info = lapack.dtrtrs(self.r, qtb, lower=0)
        if info != 0:  # pragma: no cover - excluded by the rank check
            raise SingularMatrixError("triangular solve failed", size=self.size)
        return x


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower Cholesky factor with ``L @ L.T == A + jitter * I``."""

    lower: np.ndarray
    jitter: float = 0.0
    kind: str = field(default="cholesky", init=False)

    @property
    def size(self) -> int:
        return self.lower.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        m = solve_triangular(self.lower, b, side="forward")
        return solve_triangular(self.lower, m, side="backward")


def factor_qr(a: np.ndarray, rtol: float | None = None) -> QRFactor:
    """Householder QR of a square matrix, reusable for many right-hand sides.

    Raises
    ------
    SingularMatrixError
        If some ``|R_ii|`` falls below ``rtol * max|R_ii|``. The error
        carries the numerical rank that was detected.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    n = a.shape[0]
    q, r = la.qr(a)
    diag = np.abs(np.diag(r))
    if rtol is None:
        rtol = n * np.finfo(float).eps
    scale = diag.max() if n else 0.0
    rank = int(np.count_nonzero(diag > rtol * scale)) if scale > 0 else 0
    if rank < n:
        raise SingularMatrixError(
            f"matrix is rank deficient (rank {rank} of {n})", rank=rank, size=n
        )
    return QRFactor(q, r)


def cholesky(a: np.ndarray) -> CholeskyFactor:
    """Lower Cholesky factor of a symmetric matrix with jitter escalation.

    A plain factorisation is tried first. On failure a diagonal jitter of
    ``1e-12 * trace(A)/n`` is added and multiplied by ten until it reaches
    ``1e-6 * trace(A)/n``. The applied jitter is stored on the result.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    low, info = lapack.dpotrf(a, lower=1, clean=1, overwrite_a=0)
    if info == 0:
        return CholeskyFactor(low, 0.0)
    base = abs(np.trace(a)) / n if n else 0.0
    if base == 0.0:
        base = 1.0
    jitter = JITTER_START * base
    eye = np.eye(n)
    while jitter <= JITTER_STOP * base * (1 + 1e-9):
        low, info = lapack.dpotrf(a + jitter * eye, lower=1, clean=1, overwrite_a=0)
        if info == 0:
            return CholeskyFactor(low, jitter)
        jitter *= 10.0
    raise NotPositiveDefiniteError(
        f"matrix is not positive definite (jitter up to {JITTER_STOP * base:.3g})",
        max_jitter=JITTER_STOP * base,
    )


def solve_triangular(low: np.ndarray, b: np.ndarray, side: str = "forward") -> np.ndarray:
    """Substitution with a lower-triangular matrix.

    ``side="forward"`` solves ``L x = b``; ``side="backward"`` solves
    ``L.T x = b``.
    """
    if side not in ("forward", "backward"):
        raise ValueError(f"side must be 'forward' or 'backward', not {side!r}")
    low = np.asarray(low, dtype=float)
    if np.any(np.diag(low) == 0.0):
        raise SingularMatrixError("triangular factor has a zero diagonal entry")
    x, info = lapack.dtrtrs(low, np.asarray(b, dtype=float), lower=1,
                            trans=0 if side == "forward" else 1)
    if info != 0:  # pragma: no cover
        raise SingularMatrixError(f"dtrtrs failed with info={info}")
    return x


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return ``(A + A.T) / 2``."""
    return 0.5 * (a + a.T)


def min_eig_ratio(a: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix divided by its trace."""
    tr = np.trace(a)
    if tr == 0:
        return 0.0
    return float(np.linalg.eigvalsh(symmetrize(a))[0] / tr)
