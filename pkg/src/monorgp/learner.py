"""One object per learning variant: plain RGP, full or sequential constraints."""

from __future__ import annotations

import numpy as np

from .gradient import TestGrid, build_operator
from .kernel import InputSpace, KernelParams
from .monotonicity import (
    FULL,
    SEQUENTIAL,
    ConstraintState,
    MonotonicityConfig,
    UpdateInfo,
    full_update,
    measure_violation,
    sequential_update,
)
from .rgp import RGP

#: Variant labels used across the experiments.
VARIANTS = {"S0": None, "S3": FULL, "S4": SEQUENTIAL}


class Learner:
    """RGP plus an optional monotonicity schedule.

    Each call to :meth:`observe` runs the measurement update and then, for
    the constrained variants, one constraint update on the new mean. The
    constrained mean is what the next measurement update starts from.

    With ``audit=True`` every constraint update is checked to leave ``C``
    bit-identical; offending steps are counted in ``c_altered``.
    """

    def __init__(
        self,
        space: InputSpace,
        params: KernelParams,
        variant: str = "S0",
        test_resolution=None,
        mono: MonotonicityConfig | None = None,
        audit: bool = False,
    ):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; expected one of {sorted(VARIANTS)}")
        self.variant = variant
        self.model = RGP(space, params)
        self.op = None
        self.cfg = mono
        self.state = None
        if test_resolution is not None and mono is not None:
            self.op = build_operator(self.model, TestGrid.build(space, test_resolution))
            self.noise = mono.noise_matrix(self.op)
        schedule = VARIANTS[variant]
        if schedule is not None:
            if self.op is None:
                raise ValueError(f"variant {variant} needs a test grid and a constraint config")
            self.cfg = MonotonicityConfig(
                mono.bounds, mono.signs, mono.pseudo_noise, schedule,
                mono.exact_noise, mono.drop_inactive,
            )
            if schedule == SEQUENTIAL:
                self.state = ConstraintState(self.op.n_test, self.op.ndim)
        self.last_info: UpdateInfo | None = None
        self.audit = audit
        self.c_altered = 0

    @property
    def constrained(self) -> bool:
        return VARIANTS[self.variant] is not None

    def reset(self) -> None:
        self.model.reset()
        self.c_altered = 0
        if self.state is not None:
            self.state = ConstraintState(self.op.n_test, self.op.ndim)

    def infer(self, zeta):
        return self.model.infer(zeta)

    def observe(self, zeta, y: float, prediction=None) -> UpdateInfo | None:
        self.model.update(zeta, y, prediction)
        schedule = VARIANTS[self.variant]
        if self.audit and schedule is not None:
            c_before = self.model.C.copy()
        if schedule == FULL:
            info = full_update(self.model, self.op, self.cfg, self.noise)
        elif schedule == SEQUENTIAL:
            info = sequential_update(self.model, self.op, self.cfg, self.state, self.noise)
        else:
            info = None
        if self.audit and schedule is not None and not np.array_equal(c_before, self.model.C):
            self.c_altered += 1
        self.last_info = info
        return info

    def violation(self) -> np.ndarray:
        """Per-dimension summed violation of the current mean (needs a grid)."""
        if self.op is None or self.cfg is None:
            raise ValueError("no test grid configured")
        return measure_violation(self.op, self.model, self.cfg).sums
