"""Input-output linearising pressure controller and its learning helpers."""

from __future__ import annotations

from dataclasses import dataclass

from .plant import INFLOW_VALVE, PlantParams, ValveMap, inflow_valve_inverse


@dataclass(frozen=True)
class ControllerParams:
    """Gains, learning gates and filter settings.

    ``lim_1`` gates on the tracking error (Pa), ``lim_2`` on the reference
    slope (Pa/s). The filter rate-limits the disturbance estimate while the
    predictive variance exceeds ``sigma_k**2 / sigma_fac``.
    """

    k_C: float = 4.0
    k_I: float = 4.0
    lim_1: float = 3000.0
    lim_2: float = 10000.0
    sigma_fac: float = 5.0
    rate_limit: float = 2.0  # g/s^2

    def __post_init__(self):
        for name in ("k_C", "k_I", "lim_1", "lim_2", "sigma_fac", "rate_limit"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class ControlOutput:
    u_C: float
    mdot_d: float
    saturated: bool


class Controller:
    """Tracking law ``v = dx_r + k_C e + k_I int(e)`` with plant inversion.

    The demanded inflow is ``v / b + z_hat`` (``b = R T / V``); the valve
    inverse turns it into a command. The integrator freezes while the
    command saturates.
    """

    def __init__(self, params: ControllerParams, plant: PlantParams, valve: ValveMap = INFLOW_VALVE):
        self.params = params
        self.plant = plant
        self.valve = valve
        self.integ = 0.0

    def reset(self) -> None:
        self.integ = 0.0

    def step(self, x_r: float, x_r_dot: float, x: float, z_hat: float) -> ControlOutput:
        e = x_r - x
        v = x_r_dot + self.params.k_C * e + self.params.k_I * self.integ
        mdot_d = v / self.plant.gain + z_hat
        u_C, sat = inflow_valve_inverse(self.plant.p_in, self.plant.p_U, x, mdot_d, self.valve)
        if not sat:
            self.integ += self.plant.T_s * e
        return ControlOutput(u_C, mdot_d, sat)


def controller_step(ctrl: Controller, x_r, x_r_dot, x, z_hat) -> float:
    """Functional form of :meth:`Controller.step` returning ``u_C`` only."""
    return ctrl.step(x_r, x_r_dot, x, z_hat).u_C


def learning_gate(x_r: float, x: float, x_r_dot: float, params: ControllerParams) -> bool:
    """True near steady state: small tracking error and a flat reference."""
    return abs(x_r - x) < params.lim_1 and abs(x_r_dot) < params.lim_2


class VarianceGatedFilter:
    """Rate limiter that engages only while the model is uncertain.

    While the predictive variance exceeds ``threshold`` the output slews
    towards the mean by at most ``rate_limit * T_s`` per call. Once the
    variance drops, the limiter keeps slewing until it has caught up and
    only then passes the mean straight through, so switching never causes
    a jump.
    """

    def __init__(self, threshold: float, rate_limit: float, T_s: float, initial: float = 0.0):
        self.threshold = threshold
        self.max_delta = rate_limit * T_s
        self.reset(initial)

    def reset(self, initial: float = 0.0) -> None:
        self.value = initial
        self.engaged = False
        self.tracking = True

    def __call__(self, mean: float, variance: float) -> float:
        self.engaged = variance > self.threshold
        if self.engaged or not self.tracking:
            delta = mean - self.value
            if delta > self.max_delta:
                self.value += self.max_delta
            elif delta < -self.max_delta:
                self.value -= self.max_delta
            else:
                self.value = mean
                self.tracking = not self.engaged
                return self.value
            self.tracking = False
        else:
            self.value = mean
        return self.value
