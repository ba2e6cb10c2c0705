"""Squared-exponential kernel, Cartesian grids and input normalisation.

All kernel evaluations happen in *normalised* coordinates, where every
input axis of the basis grid has unit spacing. :class:`InputSpace` maps
physical inputs onto that frame.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of the SE kernel and the measurement noise.

    ``length`` divides the squared distance as ``exp(-d^2 / (2 * length))``,
    so it acts as a squared length scale in normalised units.
    """

    sigma_k: float
    length: float
    sigma_y: float = 0.0

    def __post_init__(self):
        if not self.sigma_k > 0:
            raise ValueError(f"sigma_k must be positive, got {self.sigma_k}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        if not self.sigma_y >= 0:
            raise ValueError(f"sigma_y must be non-negative, got {self.sigma_y}")


@dataclass(frozen=True)
class InputSpace:
    """Physical input box together with the basis-grid resolution."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    resolution: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        object.__setattr__(self, "resolution", tuple(int(v) for v in self.resolution))
        if not len(self.lower) == len(self.upper) == len(self.resolution):
            raise ValueError("lower, upper and resolution must have equal length")
        for lo, hi, n in zip(self.lower, self.upper, self.resolution):
            if not hi > lo:
                raise ValueError(f"upper bound {hi} must exceed lower bound {lo}")
            if n < 2:
                raise ValueError(f"basis resolution must be at least 2, got {n}")

    @property
    def ndim(self) -> int:
        return len(self.resolution)

    @property
    def beta(self) -> np.ndarray:
        """Per-dimension normalisation gains ``(N_i - 1) / (upper - lower)``."""
        n = np.asarray(self.resolution, dtype=float)
        return (n - 1.0) / (np.asarray(self.upper) - np.asarray(self.lower))

    def normalize(self, zeta) -> np.ndarray:
        """Map physical inputs (one point or rows of points) to grid units.

        Inputs outside the box are extrapolated, not clamped.
        """
        zeta = np.asarray(zeta, dtype=float)
        return (zeta - np.asarray(self.lower)) * self.beta

    def denormalize(self, chi) -> np.ndarray:
        chi = np.asarray(chi, dtype=float)
        return chi / self.beta + np.asarray(self.lower)


def make_grid(resolution) -> np.ndarray:
    """All vertices of the integer grid ``{0..N_1-1} x ... x {0..N_d-1}``.

    The first dimension varies fastest, so ``make_grid((2, 3))`` yields
    ``[[0,0],[1,0],[0,1],[1,1],[0,2],[1,2]]``.
    """
    resolution = tuple(int(n) for n in resolution)
    if any(n < 1 for n in resolution):
        raise ValueError(f"grid resolutions must be positive, got {resolution}")
    axes = [range(n) for n in reversed(resolution)]
    rows = [tuple(reversed(p)) for p in itertools.product(*axes)]
    return np.array(rows, dtype=float).reshape(-1, len(resolution))


def sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def se_kernel(a, b, params: KernelParams) -> np.ndarray:
    """Kernel matrix ``sigma_k^2 * exp(-|a_i - b_j|^2 / (2 L))``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    return params.sigma_k**2 * np.exp(-sq_dist(a, b) / (2.0 * params.length))


def se_kernel_vector(chi: np.ndarray, points: np.ndarray, params: KernelParams) -> np.ndarray:
    """Kernel between one normalised point and each row of ``points``.

    Allocation-light variant of :func:`se_kernel` for the per-step path.
    """
    d = points - chi
    return params.sigma_k**2 * np.exp(np.einsum("ij,ij->i", d, d) * (-0.5 / params.length))
