"""Linear gradient operator of an RGP on a fixed test grid.

For a test grid ``X~`` the mean gradient in physical coordinates is
``H_m @ mu`` and its covariance is ``H_m C H_m^T + R_ges``, with
``H_m`` and ``R_ges`` depending only on the grids and hyperparameters.

Derivatives of ``k(a, b) = s^2 exp(-|a-b|^2 / (2L))`` used below::

    dk/da_i           = -(a_i - b_i) / L * k
    d2k/da_i db_i     = (1/L - (a_i - b_i)^2 / L^2) * k
    d2k/da_i db_j     = -(a_i - b_i)(a_j - b_j) / L^2 * k      (i != j)

Each physical derivative picks up the normalisation gain ``beta_i``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernel import InputSpace, make_grid, se_kernel
from .linalg import JITTER_STOP, min_eig_ratio, symmetrize
from .rgp import RGP


class OperatorError(RuntimeError):
    """Gradient covariance could not be repaired into a PSD matrix."""


@dataclass(frozen=True)
class TestGrid:
    """Monotonicity test grid spanning the same box as the basis grid.

    ``points`` are in normalised basis coordinates: test index ``t`` of
    dimension ``i`` sits at ``t * (N_i - 1) / (Nt_i - 1)``.
    """

    __test__ = False  # keep pytest from collecting this class

    space: InputSpace
    resolution: tuple[int, ...]
    points: np.ndarray

    @classmethod
    def build(cls, space: InputSpace, resolution) -> "TestGrid":
        resolution = tuple(int(n) for n in resolution)
        if len(resolution) != space.ndim:
            raise ValueError("test grid and input space dimensions differ")
        idx = make_grid(resolution)
        scale = np.array([
            (nb - 1) / (nt - 1) if nt > 1 else 0.0
            for nb, nt in zip(space.resolution, resolution)
        ])
        offset = np.array([
            0.0 if nt > 1 else (nb - 1) / 2.0
            for nb, nt in zip(space.resolution, resolution)
        ])
        return cls(space, resolution, idx * scale + offset)

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def physical(self) -> np.ndarray:
        return self.space.denormalize(self.points)


@dataclass(frozen=True)
class GradientOperator:
    """Precomputed gradient measurement matrix and noise terms.

    Attributes
    ----------
    blocks : list of ndarray
        ``H_{m,i}``, shape ``(Nt, N_X)`` each.
    H : ndarray
        Blocks stacked by dimension, shape ``(Nt * n_z, N_X)``.
    R : ndarray
        Prior covariance of the stacked gradients at the test points.
    R_ges : ndarray
        ``R - H K H^T``, the part of the gradient covariance the basis
        cannot represent.
    jitter : float
        Diagonal repair added to ``R`` (zero unless it was indefinite).
    """

    test: TestGrid
    blocks: list
    H: np.ndarray
    R: np.ndarray
    R_ges: np.ndarray
    jitter: float = 0.0

    @property
    def ndim(self) -> int:
        return len(self.blocks)

    @property
    def n_test(self) -> int:
        return self.test.size

    def to_csv(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, mat in (("H_m", self.H), ("R_m", self.R), ("R_m_ges", self.R_ges)):
            path = directory / f"{name}.csv"
            with path.open("w", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerows(
                    [[repr(float(v)) for v in row] for row in mat]
                )
            paths.append(path)
        return paths


@dataclass(frozen=True)
class GradientPrediction:
    mean: np.ndarray
    cov: np.ndarray


def gradient_prior_cov(test: TestGrid, model: RGP) -> np.ndarray:
    """Prior covariance of physical gradients at the test points."""
    params = model.params
    beta = model.space.beta
    pts = test.points
    k = se_kernel(pts, pts, params)
    diffs = [pts[:, i][:, None] - pts[:, i][None, :] for i in range(pts.shape[1])]
    inv_l = 1.0 / params.length
    nz, nt = pts.shape[1], len(pts)
    R = np.empty((nz * nt, nz * nt))
    for a in range(nz):
        for b in range(nz):
            if a == b:
                blk = (inv_l - diffs[a] ** 2 * inv_l**2) * k
            else:
                blk = -(diffs[a] * diffs[b]) * inv_l**2 * k
            R[a * nt:(a + 1) * nt, b * nt:(b + 1) * nt] = blk * beta[a] * beta[b]
    return symmetrize(R)


def build_operator(model: RGP, test: TestGrid) -> GradientOperator:
    """Assemble ``H_m``, ``R_m`` and ``R_m,ges`` for ``test``."""
    if test.space.resolution != model.space.resolution:
        raise ValueError("test grid was built for a different basis grid")
    params = model.params
    beta = model.space.beta
    basis = model.basis
    pts = test.points
    k_tx = se_kernel(pts, basis, params)
    blocks = []
    for i in range(basis.shape[1]):
        dk = -(beta[i] / params.length) * (pts[:, i][:, None] - basis[:, i][None, :]) * k_tx
        # H_i = dk K^{-1}; K symmetric so solve K H_i^T = dk^T
        blocks.append(np.ascontiguousarray(model.solve_k(dk.T).T))
    H = np.vstack(blocks)

    R = gradient_prior_cov(test, model)
    jitter = 0.0
    n = len(R)
    ratio = min_eig_ratio(R)
    if ratio < -1e-8:
        base = np.trace(R) / n
        jitter = 1e-12 * base
        while min_eig_ratio(R + jitter * np.eye(n)) < -1e-8:
            jitter *= 10.0
            if jitter > JITTER_STOP * base:
                raise OperatorError(f"gradient covariance indefinite (ratio {ratio:.3g})")
        R = R + jitter * np.eye(n)
    R_ges = symmetrize(R - H @ model.K @ H.T)
    return GradientOperator(test, blocks, H, R, R_ges, jitter)


def predict_gradient(op: GradientOperator, model: RGP) -> GradientPrediction:
    """Mean ``H mu`` and covariance ``H C H^T + R_ges`` of the gradients."""
    mean = op.H @ model.mu
    cov = symmetrize(op.H @ model.C @ op.H.T + op.R_ges)
    return GradientPrediction(mean, cov)
