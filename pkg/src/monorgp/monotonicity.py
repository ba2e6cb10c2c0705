"""Soft gradient constraints for an RGP via ReLU pseudo-measurements.

Each test point and input dimension carries an inequality
``s_i * (dz/dzeta_i - B_i) < 0``. A violated inequality is treated as the
equality pseudo-measurement ``0`` with noise ``R_ges + R_IC~`` in an EKF
mean update; satisfied ones drop out because the ReLU derivative is zero
there. The covariance part of that EKF update is never applied.

Two schedules are provided:

* :func:`full_update` corrects every violated row at once (Cholesky of
  the stacked innovation covariance).
* :func:`sequential_update` corrects one test point per call, walking the
  grid with a circular counter, so each call solves at most one
  ``n_z x n_z`` system.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .gradient import GradientOperator
from .linalg import NotPositiveDefiniteError, cholesky, solve_triangular
from .rgp import RGP

log = logging.getLogger(__name__)

FULL = "full"
SEQUENTIAL = "sequential"


@dataclass
class MonotonicityConfig:
    """Bounds, signs and pseudo-noise of the gradient constraints.

    ``signs[i] = +1`` encodes ``dz/dzeta_i < bounds[i]`` and ``-1`` encodes
    ``dz/dzeta_i > bounds[i]``. ``pseudo_noise`` may be a scalar (times the
    identity) or a full matrix over the stacked test rows.
    """

    bounds: np.ndarray
    signs: np.ndarray
    pseudo_noise: float | np.ndarray = 1e-2
    variant: str = FULL
    exact_noise: bool = False
    drop_inactive: bool = False

    def __post_init__(self):
        self.bounds = np.atleast_1d(np.asarray(self.bounds, dtype=float))
        self.signs = np.atleast_1d(np.asarray(self.signs, dtype=float))
        if self.bounds.shape != self.signs.shape:
            raise ValueError("bounds and signs must have the same length")
        if not np.all(np.abs(self.signs) == 1):
            raise ValueError(f"signs must be +1 or -1, got {self.signs}")
        if self.variant not in (FULL, SEQUENTIAL):
            raise ValueError(f"unknown variant {self.variant!r}")

    def noise_matrix(self, op: GradientOperator) -> np.ndarray:
        """``R_IC = R_ges + R_IC~`` over all stacked test rows."""
        n = len(op.R_ges)
        extra = np.asarray(self.pseudo_noise, dtype=float)
        if extra.ndim == 0:
            extra = float(extra) * np.eye(n)
        if extra.shape != (n, n):
            raise ValueError(f"pseudo_noise must be scalar or {n}x{n}")
        if not np.allclose(extra, extra.T):
            raise ValueError("pseudo_noise must be symmetric")
        if np.linalg.eigvalsh(extra)[0] < -1e-12 * max(np.trace(extra), 1.0):
            raise ValueError("pseudo_noise must be positive semi-definite")
        return op.R_ges + extra


@dataclass
class ConstraintState:
    """Counter and diagnostics of the sequential schedule.

    ``counter`` is 0-based: the next test point to probe.
    """

    n_test: int
    n_dims: int
    counter: int = 0
    masks: np.ndarray | None = None
    violation: np.ndarray = field(default=None)

    def __post_init__(self):
        if not 0 <= self.counter < self.n_test:
            raise ValueError(f"counter must lie in [0, {self.n_test})")
        if self.violation is None:
            self.violation = np.zeros(self.n_dims)


@dataclass(frozen=True)
class UpdateInfo:
    """What a constraint update did.

    ``solves`` counts linear systems factorised, ``system_size`` is the
    size of the (last) one, ``point`` the updated test point for the
    sequential schedule and ``probes`` the points inspected, starting at
    test point ``start``.
    """

    active: int
    solves: int = 0
    system_size: int = 0
    point: int | None = None
    probes: int = 0
    skipped: int = 0
    failed: bool = False
    start: int = 0


@dataclass(frozen=True)
class ViolationReport:
    per_point: np.ndarray  # (n_z, Nt) positive parts
    sums: np.ndarray  # (n_z,)

    @property
    def total(self) -> float:
        return float(self.sums.sum())


def activations(op: GradientOperator, model: RGP, cfg: MonotonicityConfig):
    """Gradient deficits ``dy_i = H_i mu - B_i`` and activity masks.

    Returns arrays of shape ``(n_z, Nt)``; a mask entry is true iff
    ``s_i * dy_i > 0`` (boundary values are inactive).
    """
    nt = op.n_test
    dy = (op.H @ model.mu).reshape(op.ndim, nt) - cfg.bounds[:, None]
    mask = cfg.signs[:, None] * dy > 0
    return dy, mask


def measure_violation(op: GradientOperator, model: RGP, cfg: MonotonicityConfig) -> ViolationReport:
    dy, _ = activations(op, model, cfg)
    viol = np.maximum(cfg.signs[:, None] * dy, 0.0)
    return ViolationReport(viol, viol.sum(axis=1))


def _correct(model: RGP, h_rows: np.ndarray, rhs: np.ndarray) -> None:
    # mu <- mu - C h^T v, never touching C
    model.mu = model.mu - model.C @ (h_rows.T @ rhs)


def full_update(
    model: RGP,
    op: GradientOperator,
    cfg: MonotonicityConfig,
    noise: np.ndarray | None = None,
    rows: np.ndarray | None = None,
) -> UpdateInfo:
    """Simultaneous constraint update of all violated rows.

    The innovation covariance ``H^ C H^T + R_IC`` keeps the zero rows of
    the inactive constraints, so active rows see the full correlated noise.
    With ``cfg.drop_inactive`` the system is restricted to the active rows.
    ``rows`` optionally limits the update to a subset of stacked row
    indices (everything else is treated as inactive and dropped).

    On a Cholesky failure the update is skipped and ``failed`` is set.
    """
    if noise is None:
        noise = cfg.noise_matrix(op)
    dy, mask = activations(op, model, cfg)
    dy, mask = dy.ravel(), mask.ravel()
    if rows is not None:
        keep = np.zeros_like(mask)
        keep[np.asarray(rows)] = True
        mask &= keep
    active = np.flatnonzero(mask)
    if active.size == 0:
        return UpdateInfo(active=0)

    h_act = op.H[active]
    hch = h_act @ model.C @ h_act.T
    if cfg.drop_inactive or rows is not None:
        sys_rows = active
        mat = hch + noise[np.ix_(active, active)]
        rhs = dy[active]
        pos = slice(None)
    else:
        sys_rows = np.arange(len(dy))
        mat = noise.copy()
        mat[np.ix_(active, active)] += hch
        rhs = np.where(mask, dy, 0.0)
        pos = active
    try:
        fac = cholesky(mat)
    except NotPositiveDefiniteError as exc:
        log.warning("skipping constraint update: %s", exc)
        return UpdateInfo(active=active.size, solves=1, system_size=len(sys_rows), failed=True)
    m = solve_triangular(fac.lower, rhs, side="forward")
    v = solve_triangular(fac.lower, m, side="backward")
    _correct(model, h_act, v[pos])
    return UpdateInfo(active=active.size, solves=1, system_size=len(sys_rows))


def _small_solve(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Direct solve of the point system, Cholesky as the fallback."""
    if mat.shape == (1, 1):
        if mat[0, 0] == 0.0 or not np.isfinite(mat[0, 0]):
            raise np.linalg.LinAlgError("singular 1x1 system")
        return rhs / mat[0, 0]
    lu, piv, x, info = lapack.dgesv(mat, rhs)
    if info == 0 and np.all(np.isfinite(x)):
        return x
    return cholesky(mat).solve(rhs)


def point_rows(op: GradientOperator, point: int, dims) -> np.ndarray:
    """Stacked row indices of ``point`` for the given dimensions."""
    return np.asarray(dims, dtype=int) * op.n_test + point


def sequential_update(
    model: RGP,
    op: GradientOperator,
    cfg: MonotonicityConfig,
    state: ConstraintState,
    noise: np.ndarray | None = None,
) -> UpdateInfo:
    """Correct the first violating test point at or after ``state.counter``.

    Only the active dimensions of that point enter the update; the noise
    uses the diagonal of ``R_IC`` (all entries of the point's block when
    ``cfg.exact_noise`` is set). After an update the counter moves past
    the corrected point; if nothing is violated it completes a full cycle
    and ends where it started. A point whose system cannot be solved is
    skipped (counter still advances), so each call solves at most once.
    """
    if noise is None:
        noise = cfg.noise_matrix(op)
    nt = op.n_test
    start = state.counter
    dy, mask = activations(op, model, cfg)
    state.masks = mask
    any_act = mask.any(axis=0)
    order = (state.counter + np.arange(nt)) % nt
    hits = np.flatnonzero(any_act[order])
    if hits.size == 0:
        # full cycle without a violation: the counter ends where it started
        return UpdateInfo(active=0, probes=nt, start=start)
    h = int(hits[0])
    p = int(order[h])
    dims = np.flatnonzero(mask[:, p])
    rows = point_rows(op, p, dims)
    h_rows = op.H[rows]
    if cfg.exact_noise:
        r_o = noise[np.ix_(rows, rows)]
    else:
        r_o = np.diag(noise[rows, rows])
    mat = h_rows @ model.C @ h_rows.T + r_o
    state.counter = (p + 1) % nt
    try:
        v = _small_solve(mat, dy[dims, p])
    except np.linalg.LinAlgError as exc:
        log.warning("skipping constraint update at test point %d: %s", p, exc)
        return UpdateInfo(active=int(mask.sum()), solves=1, system_size=len(rows), point=p,
                          probes=h + 1, skipped=1, failed=True, start=start)
    _correct(model, h_rows, v)
    return UpdateInfo(active=int(mask.sum()), solves=1, system_size=len(rows), point=p, probes=h + 1,
                      start=start)
