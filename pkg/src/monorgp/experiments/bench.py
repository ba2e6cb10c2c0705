"""Per-step wall time of the learning variants, normalised to plain RGP."""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from ..learner import Learner
from .study import COARSE, FINE, StudyConfig, make_stream, trimmed_mean

BENCH_HEADER = ["grid", "variant", "mean_us", "max_us", "trimmed_mean_us", "normalized_mean",
                "normalized_trimmed", "max_solves_per_step", "max_system_size", "mean_system_size"]


@dataclass(frozen=True)
class BenchConfig:
    study: StudyConfig = StudyConfig()
    grids: tuple = (("coarse", COARSE), ("fine", FINE))
    steps: int = 1000
    repeats: int = 3
    warmup: int = 50
    seed: int = 0


@dataclass
class BenchRow:
    grid: str
    variant: str
    mean: float
    max: float
    trimmed: float
    normalized_mean: float
    normalized_trimmed: float
    max_solves: int
    max_system_size: int
    mean_system_size: float

    def as_list(self) -> list:
        return [self.grid, self.variant, self.mean * 1e6, self.max * 1e6, self.trimmed * 1e6,
                self.normalized_mean, self.normalized_trimmed, self.max_solves,
                self.max_system_size, self.mean_system_size]


def _time_variant(learner: Learner, streams, warmup: int):
    times, sizes, solves = [], [], []
    for zeta, y in streams:
        learner.reset()
        for k in range(min(warmup, len(y))):
            learner.observe(zeta[k], y[k])
        learner.reset()
        for k in range(len(y)):
            t0 = time.perf_counter()
            info = learner.observe(zeta[k], y[k])
            times.append(time.perf_counter() - t0)
            solves.append(0 if info is None else info.solves)
            sizes.append(0 if info is None else info.system_size)
    return np.array(times), np.array(solves), np.array(sizes)


def bench(cfg: BenchConfig = BenchConfig()) -> list[BenchRow]:
    """Time S0/S3/S4 on every configured test grid with identical streams."""
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.repeats)
    study = dataclasses.replace(cfg.study, checkpoints=(cfg.steps,))
    streams = [make_stream(study, s) for s in seeds]
    rows = []
    for name, res in cfg.grids:
        per = {}
        for v in study.variants:
            learner = Learner(study.space, study.kernel, v, res, study.mono)
            per[v] = _time_variant(learner, streams, cfg.warmup)
        base_t = per.get("S0", next(iter(per.values())))[0]
        base_mean, base_trim = base_t.mean(), trimmed_mean(base_t)
        for v, (t, solves, sizes) in per.items():
            used = sizes[sizes > 0]
            rows.append(BenchRow(name, v, float(t.mean()), float(t.max()), trimmed_mean(t),
                                 float(t.mean() / base_mean), trimmed_mean(t) / base_trim,
                                 int(solves.max()), int(sizes.max()),
                                 float(used.mean()) if used.size else 0.0))
    return rows
