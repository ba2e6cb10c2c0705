"""Isothermal pneumatic tank with an inflow valve and a throttle outflow.

Valve flows follow the ISO 6358 orifice model::

    mdot = c * area(u) * p_up * psi(p_down / p_up)

with ``psi = 1`` in the choked regime (ratio <= b_cr) and
``sqrt(1 - ((ratio - b_cr) / (1 - b_cr))^2)`` otherwise. Flows are in g/s,
pressures in Pa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PlantParams:
    V: float = 4e-4  # m^3
    R_gas: float = 0.2871  # J/(g K)
    T0: float = 293.15  # K
    p_in: float = 6e5  # supply, Pa
    p_U: float = 1e5  # ambient, Pa
    T_s: float = 1e-3  # s

    def __post_init__(self):
        for name in ("V", "R_gas", "T0", "p_in", "p_U", "T_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.p_in > self.p_U:
            raise ValueError("supply pressure must exceed ambient pressure")

    @property
    def gain(self) -> float:
        """``R T / V``: pressure rate per unit net mass flow (Pa per g)."""
        return self.R_gas * self.T0 / self.V


@dataclass
class PlantState:
    p: float
    fault: bool = False

    def mass(self, params: PlantParams) -> float:
        return self.p * params.V / (params.R_gas * params.T0)


@dataclass(frozen=True)
class ValveMap:
    """Orifice with a linear actuation-to-area map.

    ``normally_open`` valves close as the command rises (area ``1 - u``).
    """

    coefficient: float  # g / (s Pa)
    b_cr: float = 0.528
    normally_open: bool = False

    def area(self, u: float) -> float:
        u = min(max(u, 0.0), 1.0)
        return 1.0 - u if self.normally_open else u

    def psi(self, ratio: float) -> float:
        if ratio >= 1.0:
            return 0.0
        if ratio <= self.b_cr:
            return 1.0
        x = (ratio - self.b_cr) / (1.0 - self.b_cr)
        return math.sqrt(1.0 - x * x)

    def flow(self, p_up: float, p_down: float, u: float) -> float:
        if p_up <= p_down:
            return 0.0
        return self.coefficient * self.area(u) * p_up * self.psi(p_down / p_up)

    def capacity(self, p_up: float, p_down: float) -> float:
        """Flow at full opening."""
        if p_up <= p_down:
            return 0.0
        return self.coefficient * p_up * self.psi(p_down / p_up)


#: Default valves: supply valve sized for ~9 g/s, throttle for ~1.2 g/s at 4 bar.
INFLOW_VALVE = ValveMap(coefficient=1.5e-5)
OUTFLOW_VALVE = ValveMap(coefficient=3e-6, normally_open=True)


def plant_step(state: PlantState, params: PlantParams, mdot_in: float, mdot_out: float) -> PlantState:
    """Explicit Euler step of ``dp/dt = R T / V (mdot_in - mdot_out)``.

    A non-positive pressure is clamped to ambient and flagged as a fault.
    """
    if not (math.isfinite(mdot_in) and math.isfinite(mdot_out)):
        raise ValueError("mass flows must be finite")
    p = state.p + params.T_s * params.gain * (mdot_in - mdot_out)
    if p <= 0.0:
        return PlantState(params.p_U, fault=True)
    return PlantState(p, state.fault)


def inflow_valve(p_in: float, p_U: float, p: float, u_C: float, valve: ValveMap = INFLOW_VALVE) -> float:
    """Supply flow into the tank for command ``u_C``.

    ``p_U`` is part of the identified signature but the filling branch
    does not depend on it.
    """
    return valve.flow(p_in, p, u_C)


def inflow_valve_inverse(
    p_in: float, p_U: float, p: float, mdot_d: float, valve: ValveMap = INFLOW_VALVE
) -> tuple[float, bool]:
    """Command that realises the demanded flow, and a saturation flag."""
    cap = valve.capacity(p_in, p)
    if mdot_d <= 0.0:
        area, sat = 0.0, mdot_d < 0.0
    elif cap <= 0.0:
        area, sat = 1.0, True
    else:
        area = mdot_d / cap
        sat = area > 1.0
        area = min(area, 1.0)
    return (1.0 - area if valve.normally_open else area), sat


def hidden_outflow(p: float, p_U: float, u_z: float, valve: ValveMap = OUTFLOW_VALVE) -> float:
    """Throttle flow to ambient; decreasing in ``p_U / p`` and in ``u_z``."""
    return valve.flow(p, p_U, u_z)
