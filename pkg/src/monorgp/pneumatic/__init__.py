"""Simulated pneumatic pressure loop that learns its hidden outflow online."""

from .control import Controller, ControllerParams, VarianceGatedFilter, controller_step, learning_gate
from .plant import (
    INFLOW_VALVE,
    OUTFLOW_VALVE,
    PlantParams,
    PlantState,
    ValveMap,
    hidden_outflow,
    inflow_valve,
    inflow_valve_inverse,
    plant_step,
)
from .scenario import (
    ConfigError,
    ExperimentReport,
    ScenarioConfig,
    load_config,
    parse_config,
    run_closed_loop,
    run_experiment,
)

__all__ = [
    "ConfigError",
    "Controller",
    "controller_step",
    "ControllerParams",
    "ExperimentReport",
    "hidden_outflow",
    "INFLOW_VALVE",
    "inflow_valve",
    "inflow_valve_inverse",
    "learning_gate",
    "load_config",
    "OUTFLOW_VALVE",
    "parse_config",
    "plant_step",
    "PlantParams",
    "PlantState",
    "run_closed_loop",
    "run_experiment",
    "ScenarioConfig",
    "ValveMap",
    "VarianceGatedFilter",
]
