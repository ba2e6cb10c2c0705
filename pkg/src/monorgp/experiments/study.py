"""Monte-Carlo RMSE study of plain versus constrained RGP on a 2D function."""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..kernel import InputSpace, KernelParams, make_grid, se_kernel
from ..learner import VARIANTS, Learner
from ..linalg import min_eig_ratio
from ..monotonicity import MonotonicityConfig

CHECKPOINTS = (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000)
COARSE = (5, 5)
FINE = (10, 10)


def cubic_plane(zeta: np.ndarray) -> np.ndarray:
    """``10 z1 + z1^3 + 10 z2``, increasing in both inputs."""
    z1, z2 = zeta[..., 0], zeta[..., 1]
    return 10.0 * z1 + z1**3 + 10.0 * z2


HIDDEN_FUNCTIONS = {"cubic_plane": cubic_plane}


@dataclass(frozen=True)
class StudyConfig:
    """Settings of the 2D study; defaults are the standard study setup.

    ``noise`` is the measurement-noise standard deviation unless
    ``noise_mode == "variance"``, in which case it is the variance. The
    RGP noise hyperparameter always equals the resulting standard
    deviation.
    """

    function: str = "cubic_plane"
    lower: tuple = (-2.0, -1.0)
    upper: tuple = (4.0, 4.0)
    basis: tuple = (10, 10)
    sigma_k: float = 10.0
    length: float = 1.5
    noise: float = 0.1
    noise_mode: str = "std"
    signs: tuple = (-1.0, -1.0)
    bounds: tuple = (0.0, 0.0)
    pseudo_noise: float = 1e-2
    test_resolution: tuple = COARSE
    variants: tuple = ("S0", "S3", "S4")
    runs: int = 100
    checkpoints: tuple = CHECKPOINTS
    eval_resolution: tuple = (50, 50)
    seed: int = 0
    rmse_cap: float = 1e3
    workers: int = 1
    audit: bool = False

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        cps = np.asarray(self.checkpoints)
        if cps.size == 0 or cps[0] < 1 or np.any(np.diff(cps) <= 0):
            raise ValueError("checkpoints must be positive and strictly increasing")
        if self.function not in HIDDEN_FUNCTIONS:
            raise ValueError(f"unknown hidden function {self.function!r}")
        if self.noise_mode not in ("std", "variance"):
            raise ValueError("noise_mode must be 'std' or 'variance'")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad:
            raise ValueError(f"unknown variants {bad}")

    @property
    def noise_std(self) -> float:
        return float(np.sqrt(self.noise)) if self.noise_mode == "variance" else float(self.noise)

    @property
    def space(self) -> InputSpace:
        return InputSpace(self.lower, self.upper, self.basis)

    @property
    def kernel(self) -> KernelParams:
        return KernelParams(self.sigma_k, self.length, self.noise_std)

    @property
    def mono(self) -> MonotonicityConfig:
        return MonotonicityConfig(np.array(self.bounds), np.array(self.signs), self.pseudo_noise)

    def eval_points(self) -> np.ndarray:
        axes = [np.linspace(lo, hi, n) for lo, hi, n in zip(self.lower, self.upper, self.eval_resolution)]
        grid = make_grid(self.eval_resolution)
        return np.column_stack([axes[i][grid[:, i].astype(int)] for i in range(len(axes))])

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunRecord:
    """One run of one variant: RMSE per checkpoint, flags and step timings."""

    rmse: np.ndarray
    diverged: bool
    step_times: np.ndarray
    max_solves: int = 0
    c_altered: int = 0
    min_eig_ratio: float = 0.0
    max_asymmetry: float = 0.0


@dataclass
class StudyReport:
    config: StudyConfig
    rmse: dict  # variant -> (runs, checkpoints)
    diverged: dict  # variant -> (runs,) bool
    timing: dict  # variant -> dict of mean/max/trimmed step time
    health: dict = field(default_factory=dict)

    def mean_rmse(self, variant: str) -> np.ndarray:
        return self.rmse[variant].mean(axis=0)

    def normalized_time(self, variant: str, key: str = "trimmed_mean") -> float:
        base = self.timing.get("S0", self.timing[variant])[key]
        return self.timing[variant][key] / base

    def rmse_rows(self) -> list[list]:
        rows = []
        for v, mat in self.rmse.items():
            for j, k in enumerate(self.config.checkpoints):
                rows.append([v, k, float(mat[:, j].mean()), float(mat[:, j].std()),
                             int(self.diverged[v].sum())])
        return rows

    def run_rows(self) -> list[list]:
        rows = []
        for v, mat in self.rmse.items():
            for r in range(mat.shape[0]):
                for j, k in enumerate(self.config.checkpoints):
                    rows.append([v, r, k, float(mat[r, j]), int(self.diverged[v][r])])
        return rows

    def timing_rows(self) -> list[list]:
        rows = []
        for v, t in self.timing.items():
            rows.append([v, t["mean"], t["max"], t["trimmed_mean"], self.normalized_time(v, "mean"),
                         self.normalized_time(v), t["max_solves"]])
        return rows


def trimmed_mean(x: np.ndarray, upper: float = 0.01) -> float:
    """Mean after dropping the slowest ``upper`` fraction (scheduler outliers)."""
    x = np.sort(np.asarray(x))
    keep = max(1, int(np.ceil(len(x) * (1.0 - upper))))
    return float(x[:keep].mean())


def run_stream(learner: Learner, zeta: np.ndarray, y: np.ndarray, checkpoints, eval_kernel: np.ndarray,
               z_eval: np.ndarray, cap: float) -> RunRecord:
    """Feed one measurement stream into ``learner`` and score it at the checkpoints."""
    learner.reset()
    model = learner.model
    rmse = np.empty(len(checkpoints))
    times = np.empty(checkpoints[-1])
    diverged = False
    max_solves = 0
    worst_eig = np.inf
    worst_asym = 0.0
    ci = 0
    for k in range(checkpoints[-1]):
        t0 = time.perf_counter()
        info = learner.observe(zeta[k], y[k])
        times[k] = time.perf_counter() - t0
        if info is not None:
            max_solves = max(max_solves, info.solves)
        if k + 1 == checkpoints[ci]:
            if learner.audit:
                worst_eig = min(worst_eig, min_eig_ratio(model.C))
                worst_asym = max(worst_asym, float(np.abs(model.C - model.C.T).max()))
            finite = np.all(np.isfinite(model.mu)) and np.all(np.isfinite(model.C))
            err = np.sqrt(np.mean((eval_kernel @ model.solve_k(model.mu) - z_eval) ** 2)) if finite else np.inf
            if not np.isfinite(err) or err > cap:
                diverged = True
                err = cap
            rmse[ci] = err
            ci += 1
    return RunRecord(rmse, diverged, times, max_solves, learner.c_altered,
                     worst_eig if np.isfinite(worst_eig) else 0.0, worst_asym)


def make_stream(cfg: StudyConfig, seed) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    n = cfg.checkpoints[-1]
    zeta = np.column_stack([rng.uniform(lo, hi, n) for lo, hi in zip(cfg.lower, cfg.upper)])
    y = HIDDEN_FUNCTIONS[cfg.function](zeta) + cfg.noise_std * rng.standard_normal(n)
    return zeta, y


def _run_chunk(cfg: StudyConfig, seeds: list) -> dict:
    space, params = cfg.space, cfg.kernel
    learners = {v: Learner(space, params, v, cfg.test_resolution, cfg.mono, audit=cfg.audit)
                for v in cfg.variants}
    e = cfg.eval_points()
    eval_kernel = se_kernel(space.normalize(e), learners[cfg.variants[0]].model.basis, params)
    z_eval = HIDDEN_FUNCTIONS[cfg.function](e)
    out = {v: [] for v in cfg.variants}
    for seed in seeds:
        zeta, y = make_stream(cfg, seed)
        for v, learner in learners.items():
            out[v].append(run_stream(learner, zeta, y, cfg.checkpoints, eval_kernel, z_eval, cfg.rmse_cap))
    return out


def run_study_2d(cfg: StudyConfig) -> StudyReport:
    """Average RMSE per checkpoint over ``cfg.runs`` seeded input streams.

    Every variant sees exactly the same stream in a run. Run ``r`` always
    uses the ``r``-th child of ``SeedSequence(cfg.seed)``, so results do not
    depend on ``cfg.workers``.
    """
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.runs)
    if cfg.workers > 1:
        chunks = [seeds[i::cfg.workers] for i in range(cfg.workers)]
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, [cfg] * len(chunks), chunks))
        # undo the round-robin split
        records = {v: [None] * cfg.runs for v in cfg.variants}
        for w, part in enumerate(parts):
            for v in cfg.variants:
                for i, rec in enumerate(part[v]):
                    records[v][w + i * cfg.workers] = rec
    else:
        records = _run_chunk(cfg, seeds)

    rmse, diverged, timing, health = {}, {}, {}, {}
    for v, recs in records.items():
        rmse[v] = np.array([r.rmse for r in recs])
        diverged[v] = np.array([r.diverged for r in recs])
        times = np.concatenate([r.step_times for r in recs])
        timing[v] = {"mean": float(times.mean()), "max": float(times.max()),
                     "trimmed_mean": trimmed_mean(times), "max_solves": max(r.max_solves for r in recs)}
        health[v] = {"c_altered": sum(r.c_altered for r in recs),
                     "min_eig_ratio": min(r.min_eig_ratio for r in recs),
                     "max_asymmetry": max(r.max_asymmetry for r in recs)}
    return StudyReport(cfg, rmse, diverged, timing, health)
