"""Closed-loop pressure-control experiment with online disturbance learning.

Three controller variants share identical reference and throttle-command
trajectories per run:

``none``
    no disturbance model (integral action only).
``rgp``
    plain RGP feedforward.
``rgpm``
    RGP with sequential monotonicity constraints.

The learned map is ``z(p_fac, u_z)`` with ``p_fac = p_U / p``; it is
trained on ``y = mdot_in`` whenever the learning gate reports steady state
and evaluated at the reference pressure for the feedforward.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..config import ConfigError, apply_section, check_sections, line_of, read_ini, read_text, to_ini
from ..kernel import InputSpace, KernelParams
from ..learner import Learner
from ..linalg import min_eig_ratio
from ..monotonicity import MonotonicityConfig
from .control import Controller, ControllerParams, VarianceGatedFilter, learning_gate
from .plant import (
    INFLOW_VALVE,
    OUTFLOW_VALVE,
    PlantParams,
    PlantState,
    ValveMap,
    hidden_outflow,
    inflow_valve,
    plant_step,
)

VARIANT_LEARNERS = {"none": None, "rgp": "S0", "rgpm": "S4", "rgpm-full": "S3"}

TIMESERIES_HEADER = [
    "step", "t", "p_ref", "p", "u_C", "u_z", "mdot_in", "z_true", "z_hat",
    "c_p", "gate", "ccv_1", "ccv_2", "cae",
]


class PlantFault(RuntimeError):
    pass


@dataclass(frozen=True)
class RGPSettings:
    lower: tuple = (0.2, 0.0)
    upper: tuple = (0.7, 1.0)
    resolution: tuple = (5, 5)
    sigma_k: float = 1.0
    length: float = 2.5
    sigma_y: float = 10.0


@dataclass(frozen=True)
class MonotonicitySettings:
    test_resolution: tuple = (5, 5)
    signs: tuple = (1.0, 1.0)
    bounds: tuple = (0.0, 0.0)
    pseudo_noise: float = 1e-2


@dataclass(frozen=True)
class ScenarioSettings:
    runs: int = 5
    duration: float = 100.0
    seed: int = 0
    variants: tuple = ("none", "rgp", "rgpm")
    p_ref_range: tuple = (1.5e5, 4e5)
    p_hold: tuple = (2.0, 5.0)
    u_z_range: tuple = (0.0, 0.6)
    u_z_hold: tuple = (2.0, 4.0)
    ref_omega: float = 3.0
    meas_noise: float = 0.02
    settle: float = 20.0
    record_stride: int = 100
    outflow_coefficient: float = OUTFLOW_VALVE.coefficient
    inflow_coefficient: float = INFLOW_VALVE.coefficient
    b_cr: float = 0.528


@dataclass(frozen=True)
class ScenarioConfig:
    plant: PlantParams = field(default_factory=PlantParams)
    controller: ControllerParams = field(default_factory=ControllerParams)
    rgp: RGPSettings = field(default_factory=RGPSettings)
    monotonicity: MonotonicitySettings = field(default_factory=MonotonicitySettings)
    scenario: ScenarioSettings = field(default_factory=ScenarioSettings)

    @property
    def inflow(self) -> ValveMap:
        return ValveMap(self.scenario.inflow_coefficient, self.scenario.b_cr)

    @property
    def outflow(self) -> ValveMap:
        return ValveMap(self.scenario.outflow_coefficient, self.scenario.b_cr, normally_open=True)

    def replace(self, section: str, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **changes)})

    def to_ini(self) -> str:
        return to_ini({name: getattr(self, name) for name in _SECTIONS})


_SECTIONS = {
    "plant": PlantParams,
    "controller": ControllerParams,
    "rgp": RGPSettings,
    "monotonicity": MonotonicitySettings,
    "scenario": ScenarioSettings,
}


def parse_config(text: str, path=None) -> ScenarioConfig:
    """Parse an INI scenario description; missing keys keep their defaults."""
    parser = read_ini(text, path)
    check_sections(parser, _SECTIONS, text, path)
    base = ScenarioConfig()
    parts = {name: apply_section(getattr(base, name), parser, name, text, path) for name in _SECTIONS}
    cfg = dataclasses.replace(base, **parts)
    bad = [v for v in cfg.scenario.variants if v not in VARIANT_LEARNERS]
    if bad:
        raise ConfigError(f"unknown variants {bad}", path, line_of(text, "scenario", "variants"))
    return cfg


def load_config(path) -> ScenarioConfig:
    return parse_config(read_text(path), path)


def filtered_steps(rng: np.random.Generator, n: int, T_s: float, value_range, hold_range,
                   omega: float | None):
    """Random piecewise-constant levels through a critically damped filter.

    Returns the filtered signal and its time derivative. ``omega=None``
    returns the raw steps with zero derivative.
    """
    target = np.empty(n)
    i = 0
    while i < n:
        hold = max(1, int(round(rng.uniform(*hold_range) / T_s)))
        target[i:i + hold] = rng.uniform(*value_range)
        i += hold
    if omega is None:
        return target, np.zeros(n)
    x = np.empty(n)
    xd = np.empty(n)
    pos, vel = target[0], 0.0
    w2, two_w = omega * omega, 2.0 * omega
    for k in range(n):
        x[k] = pos
        xd[k] = vel
        acc = w2 * (target[k] - pos) - two_w * vel
        pos += T_s * vel
        vel += T_s * acc
    return x, xd


@dataclass(frozen=True)
class Trajectories:
    p_ref: np.ndarray
    p_ref_dot: np.ndarray
    u_z: np.ndarray
    noise: np.ndarray


def make_trajectories(cfg: ScenarioConfig, seed: int) -> Trajectories:
    sc = cfg.scenario
    n = int(round(sc.duration / cfg.plant.T_s))
    rng = np.random.default_rng(seed)
    p_ref, p_dot = filtered_steps(rng, n, cfg.plant.T_s, sc.p_ref_range, sc.p_hold, sc.ref_omega)
    u_z, _ = filtered_steps(rng, n, cfg.plant.T_s, sc.u_z_range, sc.u_z_hold, sc.ref_omega)
    noise = rng.normal(0.0, sc.meas_noise, n) if sc.meas_noise > 0 else np.zeros(n)
    return Trajectories(p_ref, p_dot, u_z, noise)


def make_learner(cfg: ScenarioConfig, variant: str, audit: bool = False) -> Learner | None:
    label = VARIANT_LEARNERS[variant]
    if label is None:
        return None
    r = cfg.rgp
    m = cfg.monotonicity
    space = InputSpace(r.lower, r.upper, r.resolution)
    params = KernelParams(r.sigma_k, r.length, r.sigma_y)
    mono = MonotonicityConfig(np.array(m.bounds), np.array(m.signs), m.pseudo_noise)
    return Learner(space, params, label, m.test_resolution, mono, audit=audit)


@dataclass
class RunResult:
    variant: str
    run: int
    cae: float
    cae_windows: np.ndarray
    ccv: np.ndarray
    gate_fraction: float
    max_step_time: float
    mean_step_time: float
    saturated_fraction: float
    constraint_solves_max: int
    fault: bool
    rows: list = field(default_factory=list)
    c_altered: int = 0
    min_eig_ratio: float = 0.0
    max_asymmetry: float = 0.0


def run_closed_loop(cfg: ScenarioConfig, traj: Trajectories, variant: str, run: int = 0,
                    record: bool = True, window: float = 20.0, check_health: bool = False) -> RunResult:
    """Simulate one run of one variant.

    With ``check_health`` the learner audits every constraint update and
    the covariance is checked for symmetry and its smallest eigenvalue
    once per simulated second.
    """
    plant = cfg.plant
    cp = cfg.controller
    inflow, outflow = cfg.inflow, cfg.outflow
    learner = make_learner(cfg, variant, audit=check_health)
    ctrl = Controller(cp, plant, inflow)
    filt = None
    if learner is not None:
        filt = VarianceGatedFilter(cfg.rgp.sigma_k**2 / cp.sigma_fac, cp.rate_limit, plant.T_s)
    n = len(traj.p_ref)
    T_s = plant.T_s
    p_U, p_in = plant.p_U, plant.p_in
    state = PlantState(traj.p_ref[0])
    # settle on the first set point before recording; the model is not
    # consulted yet (a fresh model predicts zero anyway)
    for _ in range(int(round(cfg.scenario.settle / T_s))):
        x = state.p
        out = ctrl.step(traj.p_ref[0], 0.0, x, 0.0)
        mdot_in = inflow_valve(p_in, p_U, x, out.u_C, inflow)
        state = plant_step(state, plant, mdot_in, hidden_outflow(x, p_U, traj.u_z[0], outflow))
    n_win = max(1, int(math.ceil(n * T_s / window - 1e-9)))
    win_len = int(round(window / T_s))
    cae_w = np.zeros(n_win)
    ccv = np.zeros(2)
    viol = np.zeros(2)
    cae = 0.0
    gated = 0
    sat = 0
    max_dt = 0.0
    tot_dt = 0.0
    max_solves = 0
    worst_eig = np.inf
    worst_asym = 0.0
    health_every = max(1, int(round(1.0 / T_s)))
    rows = []
    stride = cfg.scenario.record_stride
    c_p = 0.0
    for k in range(n):
        t0 = time.perf_counter()
        x_r = traj.p_ref[k]
        xd = traj.p_ref_dot[k]
        u_z = traj.u_z[k]
        x = state.p
        if learner is not None:
            pred = learner.infer((p_U / x_r, u_z))
            c_p = pred.variance
            z_hat = filt(pred.mean, c_p)
        else:
            z_hat = 0.0
        out = ctrl.step(x_r, xd, x, z_hat)
        mdot_in = inflow_valve(p_in, p_U, x, out.u_C, inflow)
        z_true = hidden_outflow(x, p_U, u_z, outflow)
        gate = learning_gate(x_r, x, xd, cp)
        if learner is not None and gate:
            info = learner.observe((p_U / x, u_z), mdot_in + traj.noise[k])
            if info is not None:
                max_solves = max(max_solves, info.solves)
            viol = learner.violation()
        if check_health and learner is not None and (k % health_every == 0 or k == n - 1):
            C = learner.model.C
            worst_asym = max(worst_asym, float(np.abs(C - C.T).max()))
            worst_eig = min(worst_eig, min_eig_ratio(C))
        err = abs(x_r - x)
        cae += err * T_s
        cae_w[min(k // win_len, n_win - 1)] += err * T_s
        ccv += viol * T_s
        gated += gate
        sat += out.saturated
        state = plant_step(state, plant, mdot_in, z_true)
        dt = time.perf_counter() - t0
        tot_dt += dt
        if dt > max_dt:
            max_dt = dt
        if state.fault:
            raise PlantFault(f"pressure left the valid range at step {k} (variant {variant}, run {run})")
        if record and k % stride == 0:
            rows.append([k, round(k * T_s, 9), x_r, x, out.u_C, u_z, mdot_in, z_true, z_hat,
                         c_p, int(gate), ccv[0], ccv[1], cae])
    return RunResult(variant, run, cae, cae_w, ccv, gated / n, max_dt, tot_dt / n, sat / n,
                     max_solves, state.fault, rows,
                     learner.c_altered if learner is not None else 0,
                     worst_eig if np.isfinite(worst_eig) else 0.0, worst_asym)


@dataclass
class ExperimentReport:
    """Per-variant, per-run results of a pneumatic scenario."""

    config: ScenarioConfig
    results: dict  # variant -> list[RunResult]

    def total_cae(self, variant: str) -> float:
        return float(sum(r.cae for r in self.results[variant]))

    def total_ccv(self, variant: str) -> np.ndarray:
        return np.sum([r.ccv for r in self.results[variant]], axis=0)

    def summary_rows(self) -> list[list]:
        """Rows of ``metric, variant, value``.

        CAE ratios are relative to ``none`` and CCV ratios relative to
        ``rgp``; a ratio is NaN when its baseline is missing or zero.
        """
        rows = []
        cae_base = self.total_cae("none") if "none" in self.results else 0.0
        ccv_base = self.total_ccv("rgp") if "rgp" in self.results else np.zeros(2)
        for v in self.results:
            cae = self.total_cae(v)
            ccv = self.total_ccv(v)
            rows.append(["cae", v, cae])
            rows.append(["cae_ratio", v, cae / cae_base if cae_base > 0 else float("nan")])
            for i, c in enumerate(ccv, start=1):
                rows.append([f"ccv_{i}", v, float(c)])
                base = ccv_base[i - 1]
                rows.append([f"ccv_{i}_ratio", v, float(c / base) if base > 0 else float("nan")])
            rows.append(["gate_fraction", v, float(np.mean([r.gate_fraction for r in self.results[v]]))])
        return rows

    def window_gaps(self, a: str = "rgp", b: str = "rgpm") -> np.ndarray:
        """``CAE_a - CAE_b`` per run and 20-s window, shape (runs, windows)."""
        return np.array([ra.cae_windows - rb.cae_windows
                         for ra, rb in zip(self.results[a], self.results[b])])

    def curves(self, column: int) -> tuple[np.ndarray, dict]:
        """Recorded cumulative column summed over runs, per variant."""
        out = {}
        t = None
        for v, runs in self.results.items():
            if not runs or not runs[0].rows:
                raise ValueError("report was produced without recorded time series")
            mats = np.array([[row[column] for row in r.rows] for r in runs], dtype=float)
            out[v] = mats.sum(axis=0)
            t = np.array([row[1] for row in runs[0].rows], dtype=float)
        return t, out

    def normalized_rows(self, metric: str) -> tuple[list[str], list[list]]:
        """Cumulative CAE (to ``none``) or CCV (to ``rgp``) curves over time."""
        if metric == "cae":
            base, cols = "none", [TIMESERIES_HEADER.index("cae")]
        elif metric == "ccv":
            base, cols = "rgp", [TIMESERIES_HEADER.index("ccv_1"), TIMESERIES_HEADER.index("ccv_2")]
        else:
            raise ValueError(f"unknown metric {metric!r}")
        if base not in self.results:
            raise ValueError(f"normalising {metric} needs the {base!r} variant")
        header = ["t"]
        series = []
        for c in cols:
            t, cur = self.curves(c)
            ref = cur[base]
            for v, val in cur.items():
                header.append(v if len(cols) == 1 else f"{v}_{TIMESERIES_HEADER[c]}")
                with np.errstate(divide="ignore", invalid="ignore"):
                    series.append(np.where(ref > 0, val / np.where(ref > 0, ref, 1.0), np.nan))
        rows = [[t[i]] + [s[i] for s in series] for i in range(len(t))]
        return header, rows


def run_experiment(cfg: ScenarioConfig, record: bool = True, check_health: bool = False) -> ExperimentReport:
    """All runs of all configured variants; models start fresh in every run."""
    results = {v: [] for v in cfg.scenario.variants}
    seeds = np.random.SeedSequence(cfg.scenario.seed).generate_state(cfg.scenario.runs)
    for run, seed in enumerate(seeds):
        traj = make_trajectories(cfg, int(seed))
        for v in cfg.scenario.variants:
            results[v].append(run_closed_loop(cfg, traj, v, run, record, check_health=check_health))
    return ExperimentReport(cfg, results)
