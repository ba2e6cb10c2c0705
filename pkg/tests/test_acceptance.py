"""End-to-end acceptance checks at the stated tolerances.

Each test carries ``@pytest.mark.acceptance(n)``; the terminal summary
prints one PASS/FAIL line per criterion. The expensive runs (both 2D
studies and the pneumatic experiment) are shared through module fixtures
and timed once.
"""

import dataclasses
import time

import numpy as np
import pytest

from conftest import STUDY_MONO, prior_mean_sample
from oracles import batch_posterior, fd_kernel_hessian, fd_mean_gradient
from monorgp.experiments.bench import BenchConfig, bench
from monorgp.experiments.study import COARSE, FINE, StudyConfig, make_stream, run_study_2d
from monorgp.gradient import TestGrid, build_operator, predict_gradient
from monorgp.kernel import InputSpace, KernelParams
from monorgp.learner import Learner
from monorgp.monotonicity import (
    SEQUENTIAL,
    ConstraintState,
    MonotonicityConfig,
    activations,
    full_update,
    point_rows,
    sequential_update,
)
from monorgp.pneumatic.scenario import TIMESERIES_HEADER, ScenarioConfig, run_experiment
from monorgp.rgp import RGP

STUDY_CHECKS = (5, 10, 20, 50, 100)


def _report(record_property, detail: str) -> None:
    record_property("detail", detail)
    print(detail)


@pytest.fixture(scope="module")
def coarse_study():
    t0 = time.perf_counter()
    rep = run_study_2d(StudyConfig(test_resolution=COARSE, runs=100, audit=True))
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def fine_study():
    t0 = time.perf_counter()
    rep = run_study_2d(StudyConfig(test_resolution=FINE, runs=100, variants=("S3", "S4"), audit=True))
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def pneumatic():
    t0 = time.perf_counter()
    rep = run_experiment(ScenarioConfig(), record=True, check_health=True)
    return rep, time.perf_counter() - t0


@pytest.mark.acceptance(1)
def test_gradient_operator_matches_finite_differences(record_property):
    t0 = time.perf_counter()
    cfg = StudyConfig()
    space, params = cfg.space, cfg.kernel
    tg = TestGrid.build(space, FINE)
    model = RGP(space, params)
    op = build_operator(model, tg)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        m = model.copy()
        m.mu = prior_mean_sample(m, rng)
        grad = op.H @ m.mu
        fd = fd_mean_gradient(m, tg.physical, 1e-3)
        worst = max(worst, float(np.max(np.abs(grad - fd) / np.abs(fd))))
    cov = predict_gradient(op, model).cov
    hess = fd_kernel_hessian(space, params, tg.physical)
    scale = np.sqrt(np.outer(np.diag(cov), np.diag(cov)))
    cov_err = float(np.max(np.abs(cov - hess) / scale))
    elapsed = time.perf_counter() - t0
    _report(record_property, f"mean rel err {worst:.2e} (<1e-6), covariance err {cov_err:.2e} (<1e-5), "
                             f"{elapsed:.1f} s (<10 s)")
    assert worst < 1e-6
    assert cov_err < 1e-5
    assert elapsed < 10.0


@pytest.mark.acceptance(2)
def test_recursive_posterior_equals_batch(record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    spaces = [InputSpace((0.0,), (3.0,), (n,)) for n in range(2, 7)]
    spaces += [InputSpace((0.0, -1.0), (2.0, 1.0), (2, 2)), InputSpace((0.0, -1.0), (2.0, 1.0), (3, 2))]
    worst = 0.0
    for space in spaces:
        for _ in range(10):
            m = RGP(space, KernelParams(rng.uniform(0.5, 3.0), rng.uniform(0.3, 3.0), rng.uniform(0.1, 1.0)))
            n = int(rng.integers(1, 21))
            idx = rng.integers(0, m.size, n)
            y = rng.normal(0.0, 2.0, n)
            for i, yi in zip(idx, y):
                m.update(space.denormalize(m.basis[i]), yi)
            mu, C = batch_posterior(m, idx, y)
            floor = 1e-12 * m.params.sigma_k**2
            worst = max(worst, float(np.max(np.abs(m.mu - mu) / (np.abs(mu) + floor))),
                        float(np.max(np.abs(m.C - C) / (np.abs(C) + floor))))
    elapsed = time.perf_counter() - t0
    _report(record_property, f"worst rel diff {worst:.2e} (<1e-6), {elapsed:.2f} s (<1 s)")
    assert worst < 1e-6
    assert elapsed < 1.0


@pytest.mark.acceptance(3)
def test_constrained_variants_improve_coarse_study(coarse_study, record_property):
    rep, elapsed = coarse_study
    cps = list(rep.config.checkpoints)
    cols = [cps.index(k) for k in STUDY_CHECKS]
    base = rep.mean_rmse("S0")[cols]
    parts, ok = [], True
    for v in ("S3", "S4"):
        r = rep.mean_rmse(v)[cols]
        gain = 1.0 - r[1] / base[1]
        below = bool(np.all(r < base))
        ok &= below and gain >= 0.2
        parts.append(f"{v} below S0 at all checkpoints: {below}, gain@k=10 {gain:.1%} (>=20%)")
    _report(record_property, "; ".join(parts) + f"; {elapsed:.0f} s (<600 s)")
    assert ok
    assert elapsed < 600


@pytest.mark.acceptance(4)
def test_fine_grid_runs_never_diverge(fine_study, record_property):
    rep, elapsed = fine_study
    parts = []
    for v in ("S3", "S4"):
        r = rep.rmse[v]
        good = np.isfinite(r[:, -1]) & (r[:, -1] < r[:, 0])
        parts.append(f"{v}: {int(good.sum())}/{len(good)} runs improve, {int(rep.diverged[v].sum())} diverged")
    _report(record_property, "; ".join(parts) + f"; {elapsed:.0f} s")
    for v in ("S3", "S4"):
        r = rep.rmse[v]
        assert np.all(np.isfinite(r[:, -1]))
        assert np.all(r[:, -1] < r[:, 0])
        assert not rep.diverged[v].any()


@pytest.mark.acceptance(5)
def test_pneumatic_constraint_violation_reduced(pneumatic, record_property):
    rep, elapsed = pneumatic
    ratio = rep.total_ccv("rgpm") / rep.total_ccv("rgp")
    _report(record_property, f"CCV ratio per dimension {np.round(ratio, 4).tolist()} (<=0.2), "
                             f"{elapsed:.0f} s (<300 s)")
    assert np.all(rep.total_ccv("rgp") > 0)
    assert np.all(ratio <= 0.2)
    assert elapsed < 300


def _normalized_gap_peaks(rep) -> np.ndarray:
    """Time of the largest ``(CAE_rgp - CAE_rgpm) / CAE_none`` per run."""
    col = TIMESERIES_HEADER.index("cae")
    peaks = []
    for none, rgp, rgpm in zip(rep.results["none"], rep.results["rgp"], rep.results["rgpm"]):
        t = np.array([row[1] for row in none.rows])
        base = np.array([row[col] for row in none.rows])
        gap = np.array([a[col] - b[col] for a, b in zip(rgp.rows, rgpm.rows)])
        valid = base > 0
        peaks.append(t[valid][np.argmax(gap[valid] / base[valid])])
    return np.array(peaks)


@pytest.mark.acceptance(6)
def test_pneumatic_control_improvement(pneumatic, record_property):
    rep, _ = pneumatic
    none, rgp, rgpm = (rep.total_cae(v) for v in ("none", "rgp", "rgpm"))
    peaks = _normalized_gap_peaks(rep)
    windows = np.argmax(rep.window_gaps("rgp", "rgpm"), axis=1)
    _report(record_property, f"CAE rgpm/none {rgpm / none:.3f} (<=0.7), rgpm/rgp {rgpm / rgp:.3f} (<=1), "
                             f"normalised gap peak t {np.round(peaks, 1).tolist()} s (<=20); "
                             f"info: largest absolute 20-s window gap index {windows.tolist()}")
    assert rgpm <= 0.7 * none
    assert rgpm <= rgp
    assert np.all(peaks <= 20.0)


def _coverage_gap(starts, probes, n_test) -> int:
    """Longest run of consecutive calls during which some test point is never probed."""
    last = np.full(n_test, -1)
    worst = 0
    for k, (s, n) in enumerate(zip(starts, probes)):
        seen = (s + np.arange(n)) % n_test
        worst = max(worst, int(np.max(k - last)) - 1)
        last[seen] = k
    return max(worst, int(np.max(len(starts) - last)) - 1)


@pytest.mark.acceptance(7)
def test_sequential_real_time_contract(coarse_study, fine_study, pneumatic, record_property):
    max_solves = max(coarse_study[0].timing["S4"]["max_solves"], fine_study[0].timing["S4"]["max_solves"],
                     max(r.constraint_solves_max for r in pneumatic[0].results["rgpm"]))
    cfg = StudyConfig(test_resolution=FINE)
    gaps = []
    for res in (COARSE, FINE):
        learner = Learner(cfg.space, cfg.kernel, "S4", res, cfg.mono)
        for seed in np.random.SeedSequence(5).spawn(5):
            learner.reset()
            zeta, y = make_stream(cfg, seed)
            starts, probes = [], []
            for zi, yi in zip(zeta, y):
                info = learner.observe(zi, yi)
                assert info.solves <= 1
                starts.append(info.start)
                probes.append(info.probes)
            gaps.append(_coverage_gap(starts, probes, learner.op.n_test) <= learner.op.n_test - 1)
    timing = {r.variant: r for r in bench(BenchConfig(study=dataclasses.replace(cfg, variants=("S3", "S4")),
                                                      grids=(("fine", FINE),), repeats=3))}
    s3, s4 = timing["S3"].mean, timing["S4"].mean
    _report(record_property, f"max solves per S4 step {max_solves} (<=1), coverage within N steps in "
                             f"{sum(gaps)}/{len(gaps)} streams, fine-grid mean step S4 {s4 * 1e6:.0f} us "
                             f"vs S3 {s3 * 1e6:.0f} us")
    assert max_solves <= 1
    assert all(gaps)
    assert s4 < s3


@pytest.mark.acceptance(8)
def test_covariance_health(coarse_study, fine_study, pneumatic, record_property):
    altered, eig, asym = 0, np.inf, 0.0
    for rep, _ in (coarse_study, fine_study):
        for h in rep.health.values():
            altered += h["c_altered"]
            eig = min(eig, h["min_eig_ratio"])
            asym = max(asym, h["max_asymmetry"])
    for runs in pneumatic[0].results.values():
        for r in runs:
            if r.variant == "none":
                continue
            altered += r.c_altered
            eig = min(eig, r.min_eig_ratio)
            asym = max(asym, r.max_asymmetry)
    _report(record_property, f"max |C - C^T| {asym:.1e} (==0), min eig/trace {eig:.2e} (>=-1e-8), "
                             f"constraint steps altering C {altered} (==0)")
    assert asym == 0.0
    assert eig >= -1e-8
    assert altered == 0


@pytest.mark.acceptance(9)
def test_sequential_matches_row_restricted_full(record_property):
    rng = np.random.default_rng(99)
    setups = [(InputSpace((-2.0,), (4.0,), (10,)), (10,), MonotonicityConfig([0.0], [-1.0], 1e-2)),
              (StudyConfig().space, COARSE, STUDY_MONO), (StudyConfig().space, FINE, STUDY_MONO)]
    worst, cases = 0.0, 0
    for space, res, mono in setups:
        base = RGP(space, KernelParams(10.0, 1.5, 0.1))
        op = build_operator(base, TestGrid.build(space, res))
        for exact in (False, True):
            cfg = dataclasses.replace(mono, variant=SEQUENTIAL, exact_noise=exact)
            noise = cfg.noise_matrix(op)
            ref_noise = noise if exact else np.diag(np.diag(noise))
            for _ in range(15):
                m = base.copy()
                m.mu = prior_mean_sample(m, rng)
                for _ in range(int(rng.integers(0, 10))):
                    m.update(rng.uniform(space.lower, space.upper), rng.normal(0.0, 10.0))
                _, mask = activations(op, m, cfg)
                if not mask.any():
                    continue
                state = ConstraintState(op.n_test, op.ndim, counter=int(rng.integers(op.n_test)))
                seq = m.copy()
                info = sequential_update(seq, op, cfg, state, noise)
                rows = point_rows(op, info.point, np.flatnonzero(mask[:, info.point]))
                ref = m.copy()
                full_update(ref, op, cfg, ref_noise, rows=rows)
                delta = np.abs(ref.mu - m.mu).max()
                worst = max(worst, float(np.abs(seq.mu - ref.mu).max() / delta))
                cases += 1
    _report(record_property, f"{cases} randomized corrections, worst relative mismatch {worst:.1e} (<=1e-10)")
    assert cases >= 60
    assert worst <= 1e-10
