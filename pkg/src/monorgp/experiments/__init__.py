"""Numerical studies: 1D demo, 2D RMSE study, timing bench."""

from .bench import BenchConfig, bench
from .demo import DemoConfig, run_demo_1d, search_seed
from .study import CHECKPOINTS, COARSE, FINE, StudyConfig, StudyReport, run_study_2d

__all__ = [
    "bench",
    "BenchConfig",
    "CHECKPOINTS",
    "COARSE",
    "DemoConfig",
    "FINE",
    "run_demo_1d",
    "run_study_2d",
    "search_seed",
    "StudyConfig",
    "StudyReport",
]
