"""Recursive Gaussian-process regression on a fixed basis grid.

The GP is parameterised by its values at the basis vectors ``X``; their
mean ``mu`` and covariance ``C`` are refined Kalman-style, one scalar
measurement at a time. ``K = k(X, X)`` is factorised once with Householder
QR and every inference solves against that factor.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.linalg import blas, lapack

from .kernel import InputSpace, KernelParams, make_grid, se_kernel, se_kernel_vector
from .linalg import SingularMatrixError, factor_qr


class InitializationError(RuntimeError):
    """The basis kernel matrix could not be factorised."""


@dataclass(frozen=True)
class Prediction:
    """Predictive mean/variance at one input and the basis weights ``j``.

    ``variance`` is clipped at zero; ``raw_variance`` and ``cj = C j`` are
    kept for the update step.
    """

    mean: float
    variance: float
    weights: np.ndarray
    raw_variance: float = 0.0
    cj: np.ndarray | None = None


class RGP:
    """Recursive GP with zero prior mean and an SE kernel.

    Parameters
    ----------
    space : InputSpace
        Input box and basis-grid resolution.
    params : KernelParams
        ``sigma_k``, ``length`` and the measurement noise ``sigma_y``.

    Attributes
    ----------
    basis : ndarray, shape (N_X, n_z)
        Basis vectors in normalised coordinates.
    K : ndarray
        Gram matrix of the basis.
    mu, C : ndarray
        Current mean and covariance of the basis values.
    step : int
        Number of measurement updates applied so far.
    """

    def __init__(self, space: InputSpace, params: KernelParams):
        self.space = space
        self.params = params
        self.basis = make_grid(space.resolution)
        self.K = se_kernel(self.basis, self.basis, params)
        try:
            self.K_factor = factor_qr(self.K)
        except SingularMatrixError as exc:
            raise InitializationError(
                f"cannot factorise the basis kernel matrix: {exc}"
            ) from exc
        # Hot-path copies: the QR factor split in raw arrays.
        self._qt = np.ascontiguousarray(self.K_factor.q.T)
        self._r = np.asfortranarray(self.K_factor.r)
        self._beta = space.beta
        self._lower = np.asarray(space.lower)
        self.reset()

    def reset(self) -> None:
        """Return to the prior ``mu = 0``, ``C = K``."""
        self.mu = np.zeros(len(self.basis))
        # Fortran order so the rank-one downdate can run in place
        self.C = np.asfortranarray(self.K.copy())
        self.step = 0

    @property
    def size(self) -> int:
        return len(self.basis)

    def copy(self) -> "RGP":
        other = object.__new__(RGP)
        other.__dict__.update(self.__dict__)
        other.mu = self.mu.copy()
        other.C = self.C.copy(order="F")
        return other

    def solve_k(self, b: np.ndarray) -> np.ndarray:
        """Solve ``K x = b`` with the offline QR factor."""
        x, _ = lapack.dtrtrs(self._r, self._qt @ b, lower=0)
        return x

    def weights(self, zeta) -> np.ndarray:
        """Basis weights ``j`` solving ``K j = k(X, chi)``."""
        chi = (np.asarray(zeta, dtype=float) - self._lower) * self._beta
        return self.solve_k(se_kernel_vector(chi, self.basis, self.params))

    def infer(self, zeta) -> Prediction:
        """Predictive mean and variance at the physical input ``zeta``."""
        j = self.weights(zeta)
        cj = self.C @ j
        mean = float(j @ self.mu)
        var = self.params.sigma_k**2 + float(j @ cj - j @ (self.K @ j))
        return Prediction(mean, max(var, 0.0), j, var, cj)

    def update(self, zeta, y: float, prediction: Prediction | None = None) -> Prediction:
        """Absorb the measurement ``y`` taken at ``zeta``.

        ``prediction`` may be passed when :meth:`infer` was already called
        for the same input in this step. Returns the pre-update prediction.
        """
        y = float(y)
        if not np.isfinite(y):
            raise ValueError(f"measurement must be finite, got {y}")
        pred = prediction if prediction is not None else self.infer(zeta)
        if pred.cj is None:
            pred = self.infer(zeta)
        s = pred.raw_variance + self.params.sigma_y**2
        # relative floor: an exactly known point with zero noise leaves round-off only
        if not s > 1e-12 * self.params.sigma_k**2:
            raise ValueError(f"innovation variance {s} is not positive")
        cj = pred.cj
        # gain g = C j / s; C - g j^T C written as C - u u^T with u = C j / sqrt(s),
        # which keeps C exactly symmetric
        self.mu = self.mu + cj * ((y - pred.mean) / s)
        u = cj / np.sqrt(s)
        self.C = blas.dger(-1.0, u, u, a=self.C, overwrite_a=1)
        self.step += 1
        return pred

    def predict_mean(self, zetas) -> np.ndarray:
        """Vectorised predictive mean for rows of physical inputs."""
        chi = self.space.normalize(np.atleast_2d(zetas))
        k = se_kernel(chi, self.basis, self.params)
        return k @ self.solve_k(self.mu)

    def predict(self, zetas) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised predictive mean and (clipped) variance."""
        chi = self.space.normalize(np.atleast_2d(zetas))
        kxt = se_kernel(self.basis, chi, self.params)
        j = self.solve_k(kxt)
        mean = j.T @ self.mu
        var = self.params.sigma_k**2 + np.einsum("ij,ij->j", j, (self.C - self.K) @ j)
        return mean, np.maximum(var, 0.0)

    def state_csv(self) -> str:
        """Flat CSV snapshot: the ``mu`` row followed by the rows of ``C``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([repr(float(v)) for v in self.mu])
        for row in self.C:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @staticmethod
    def parse_state_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
        rows = [list(map(float, r)) for r in csv.reader(io.StringIO(text)) if r]
        return np.array(rows[0]), np.array(rows[1:])
