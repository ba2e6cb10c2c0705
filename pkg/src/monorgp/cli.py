"""Command-line entry point: ``monorgp {demo1d,study2d,bench,pneumatic}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import ConfigError, apply_section, check_sections, read_ini, read_text
from .experiments.bench import BENCH_HEADER, BenchConfig, bench
from .experiments.demo import DEMO_HEADER, DemoConfig, run_demo_1d
from .experiments.io import write_csv, write_metadata
from .experiments.study import COARSE, FINE, StudyConfig, run_study_2d
from .pneumatic.scenario import TIMESERIES_HEADER, VARIANT_LEARNERS, ScenarioConfig, load_config, run_experiment

GRIDS = {"coarse": COARSE, "fine": FINE}
log = logging.getLogger("monorgp")


def _variants(text: str | None) -> tuple | None:
    if text is None:
        return None
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _load_section(path, section: str, default):
    if path is None:
        return default
    text = read_text(path)
    parser = read_ini(text, path)
    check_sections(parser, (section,), text, path)
    return apply_section(default, parser, section, text, path)


def cmd_demo1d(args) -> int:
    cfg = _load_section(args.config, "demo", DemoConfig())
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    res = run_demo_1d(cfg)
    out = Path(args.out)
    write_csv(out / "demo1d.csv", DEMO_HEADER, res.rows())
    write_csv(out / "demo1d_samples.csv", ["zeta", "y"], zip(*res.samples))
    write_metadata(out / "metadata.json", "demo1d", cfg.seed, cfg.as_dict(),
                   violated_test_points={"rgp": res.violations[0], "rgpm": res.violations[1]})
    print(f"violated test points: RGP {res.violations[0]}, RGPm {res.violations[1]}")
    return 0


def _study_config(args) -> StudyConfig:
    cfg = _load_section(args.config, "study", StudyConfig())
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "runs", None) is not None:
        changes["runs"] = args.runs
    if args.variants is not None:
        changes["variants"] = _variants(args.variants)
    if getattr(args, "test_grid", None) is not None:
        changes["test_resolution"] = GRIDS[args.test_grid]
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    if getattr(args, "noise_mode", None) is not None:
        changes["noise_mode"] = args.noise_mode
    return dataclasses.replace(cfg, **changes)


def cmd_study2d(args) -> int:
    cfg = _study_config(args)
    rep = run_study_2d(cfg)
    out = Path(args.out)
    write_csv(out / "study2d_rmse.csv", ["variant", "checkpoint", "rmse_mean", "rmse_std", "diverged_runs"],
              rep.rmse_rows())
    write_csv(out / "study2d_runs.csv", ["variant", "run", "checkpoint", "rmse", "diverged"], rep.run_rows())
    write_csv(out / "study2d_timing.csv",
              ["variant", "mean_s", "max_s", "trimmed_mean_s", "normalized_mean", "normalized_trimmed",
               "max_solves_per_step"], rep.timing_rows())
    write_metadata(out / "metadata.json", "study2d", cfg.seed, cfg.as_dict(),
                   noise_std=cfg.noise_std, noise_variance=cfg.noise_std**2)
    for v in cfg.variants:
        r = rep.mean_rmse(v)
        print(f"{v}: RMSE@k=1 {r[0]:.3f}  @k={cfg.checkpoints[-1]} {r[-1]:.3f}  "
              f"diverged {int(rep.diverged[v].sum())}/{cfg.runs}")
    return 0


def cmd_bench(args) -> int:
    study = _study_config(args)
    grids = tuple(GRIDS.items()) if args.test_grid is None else ((args.test_grid, GRIDS[args.test_grid]),)
    cfg = BenchConfig(study=study, grids=grids, steps=args.steps, repeats=args.repeats, seed=study.seed)
    rows = bench(cfg)
    out = Path(args.out)
    write_csv(out / "bench.csv", BENCH_HEADER, [r.as_list() for r in rows])
    write_metadata(out / "metadata.json", "bench", cfg.seed, dataclasses.asdict(cfg))
    for r in rows:
        print(f"{r.grid:6s} {r.variant}: {r.trimmed * 1e6:8.1f} us/step  x{r.normalized_trimmed:.2f}  "
              f"solves/step <= {r.max_solves}")
    return 0


def cmd_pneumatic(args) -> int:
    cfg = load_config(args.config) if args.config is not None else ScenarioConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.runs is not None:
        changes["runs"] = args.runs
    if args.variants is not None:
        variants = _variants(args.variants)
        bad = [v for v in variants if v not in VARIANT_LEARNERS]
        if bad:
            raise ConfigError(f"unknown variants {bad}; expected {sorted(VARIANT_LEARNERS)}")
        changes["variants"] = variants
    if changes:
        cfg = cfg.replace("scenario", **changes)
    rep = run_experiment(cfg)
    out = Path(args.out)
    for v, runs in rep.results.items():
        for r in runs:
            write_csv(out / f"pneumatic_timeseries_{v}_run{r.run}.csv", TIMESERIES_HEADER, r.rows)
    write_csv(out / "pneumatic_summary.csv", ["metric", "variant", "value"], rep.summary_rows())
    for metric in ("cae", "ccv"):
        try:
            header, rows = rep.normalized_rows(metric)
        except ValueError as exc:
            log.warning("no normalised %s table: %s", metric, exc)
            continue
        write_csv(out / f"pneumatic_{metric}_normalized.csv", header, rows)
    write_csv(out / "pneumatic_timing.csv", ["variant", "run", "mean_step_s", "max_step_s"],
              [[r.variant, r.run, r.mean_step_time, r.max_step_time] for runs in rep.results.values() for r in runs])
    (out / "scenario.ini").write_text(cfg.to_ini())
    write_metadata(out / "metadata.json", "pneumatic", cfg.scenario.seed,
                   {"ini": cfg.to_ini(), "config_file": str(args.config) if args.config else None})
    for row in rep.summary_rows():
        if row[0].endswith("ratio"):
            print(f"{row[0]:14s} {row[1]:10s} {row[2]:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="monorgp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, runs=True, variants=True, grid=True):
        p.add_argument("--config", type=Path, default=None, help="INI file with overrides")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        if runs:
            p.add_argument("--runs", type=int, default=None)
        if variants:
            p.add_argument("--variants", default=None, help="comma-separated variant list")
        if grid:
            p.add_argument("--test-grid", choices=sorted(GRIDS), default=None)

    p = sub.add_parser("demo1d", help="1D RGP vs RGPm after a few samples")
    common(p, runs=False, variants=False, grid=False)
    p.set_defaults(func=cmd_demo1d)

    p = sub.add_parser("study2d", help="2D Monte-Carlo RMSE study")
    common(p)
    p.add_argument("--workers", type=int, default=None, help="parallel worker processes")
    p.add_argument("--noise-mode", choices=("std", "variance"), default=None,
                   help="interpret the noise setting as standard deviation or variance")
    p.set_defaults(func=cmd_study2d)

    p = sub.add_parser("bench", help="per-step timing normalised to plain RGP")
    common(p, runs=False)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("pneumatic", help="closed-loop pressure-control scenario")
    common(p, grid=False)
    p.set_defaults(func=cmd_pneumatic)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
