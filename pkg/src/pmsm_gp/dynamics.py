"""Motion dynamics of the PMSM, the GP input mapping, torque field and reference."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

TWO_PI = 2.0 * math.pi

# Compact GP input domain: phi_m in [-pi, pi], omega_m in [-1, 1].
DOMAIN_LO = np.array([-math.pi, -1.0])
DOMAIN_HI = np.array([math.pi, 1.0])


def rpm_to_rad_s(rpm: float) -> float:
    return rpm * TWO_PI / 60.0


def rad_s_to_rpm(omega: float) -> float:
    return omega * 60.0 / TWO_PI


@dataclass(frozen=True)
class MotorParams:
    """Mechanical constants of the motor.

    Parameters
    ----------
    J : float
        Moment of inertia.
    p : int
        Pole-pair count.
    B_damp : float
        Viscous damping coefficient.
    psi : float
        Flux linkage (Wb).
    """

    J: float = 8e-5
    p: int = 5
    B_damp: float = 0.1
    psi: float = 0.008

    def __post_init__(self):
        if not self.J > 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be an integer >= 1, got {self.p}")
        if self.B_damp < 0:
            raise ValueError(f"B_damp must be nonnegative, got {self.B_damp}")
        if not self.psi > 0:
            raise ValueError(f"psi must be positive, got {self.psi}")

    @property
    def torque_constant(self) -> float:
        """Electromagnetic torque per unit q-axis current, 1.5 p psi."""
        return 1.5 * self.p * self.psi


class State(NamedTuple):
    phi: float
    omega: float


class MappedInput(NamedTuple):
    phi_m: float
    omega_m: float


class ReferencePoint(NamedTuple):
    phi_d: float
    omega_d: float
    accel_d: float


@dataclass(frozen=True)
class MappingConfig:
    upsilon: float = 0.1
    omega_lo: float = -rpm_to_rad_s(1000.0)
    omega_hi: float = rpm_to_rad_s(1000.0)

    def __post_init__(self):
        if not self.upsilon > 0:
            raise ValueError(f"upsilon must be positive, got {self.upsilon}")
        if not self.omega_max > 0:
            raise ValueError("omega bounds must not both be zero")
        if self.omega_lo > self.omega_hi:
            raise ValueError("omega_lo must not exceed omega_hi")

    @property
    def omega_max(self) -> float:
        return max(abs(self.omega_lo), abs(self.omega_hi))

    @classmethod
    def symmetric(cls, upsilon: float, omega_max: float) -> "MappingConfig":
        return cls(upsilon=upsilon, omega_lo=-omega_max, omega_hi=omega_max)


@dataclass(frozen=True)
class ReferenceConfig:
    alpha: float = 50.0 * math.pi / 3.0
    t_acc: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.t_acc > 0:
            raise ValueError(f"t_acc must be positive, got {self.t_acc}")


def map_state(state, cfg: MappingConfig) -> MappedInput:
    """Map a motor state onto the compact GP input domain.

    The angle is scaled by the gear ratio and wrapped with a Euclidean
    modulo, so negative angles land in ``[-pi, pi)`` as well.
    """
    phi, omega = state
    wrapped = (cfg.upsilon * phi) % TWO_PI
    # a tiny negative product can round up to exactly 2*pi
    if wrapped >= TWO_PI:
        wrapped = 0.0
    return MappedInput(wrapped - math.pi, omega / cfg.omega_max)


def map_states(phi, omega, cfg: MappingConfig) -> np.ndarray:
    """Vectorized :func:`map_state`; returns an ``(n, 2)`` array."""
    wrapped = np.mod(cfg.upsilon * np.asarray(phi, dtype=float), TWO_PI)
    wrapped = np.where(wrapped >= TWO_PI, 0.0, wrapped)
    return np.column_stack([wrapped - math.pi, np.asarray(omega, dtype=float) / cfg.omega_max])


def dynamics_rhs(state, i_q: float, torque: float, params: MotorParams) -> np.ndarray:
    phi, omega = state
    domega = (-params.B_damp * omega + params.torque_constant * i_q - torque) / params.J
    return np.array([omega, domega])


def true_torque(xm) -> float:
    """External load torque acting on the motor (N m), as a function of the mapped input."""
    phi_m, omega_m = xm
    return 2.0 * math.sin(phi_m) + 2e-4 * math.cos(phi_m) * omega_m**2 + 10.0


def true_torque_grid(xm: np.ndarray) -> np.ndarray:
    xm = np.atleast_2d(xm)
    return 2.0 * np.sin(xm[:, 0]) + 2e-4 * np.cos(xm[:, 0]) * xm[:, 1] ** 2 + 10.0


def true_torque_gradient_sup(n: int = 401) -> float:
    """Dense-grid supremum of the gradient norm of the torque field over the domain."""
    phi, om = np.meshgrid(np.linspace(-math.pi, math.pi, n), np.linspace(-1.0, 1.0, n))
    d_phi = 2.0 * np.cos(phi) - 2e-4 * np.sin(phi) * om**2
    d_om = 4e-4 * np.cos(phi) * om
    return float(np.sqrt(d_phi**2 + d_om**2).max())


def reference(t: float, cfg: ReferenceConfig) -> ReferencePoint:
    """Constant-acceleration ramp up to ``alpha * t_acc``, then constant speed."""
    if t < 0:
        raise ValueError("reference is defined for t >= 0")
    a, ta = cfg.alpha, cfg.t_acc
    if t <= ta:
        return ReferencePoint(0.5 * a * t * t, a * t, a)
    return ReferencePoint(a * ta * t - 0.5 * a * ta * ta, a * ta, 0.0)


TorqueSource = Callable[[np.ndarray], float]


def torque_from_field(mapping: MappingConfig) -> TorqueSource:
    """Torque source evaluating :func:`true_torque` at the mapped state."""

    def source(state):
        return true_torque(map_state(state, mapping))

    return source


def rk4_step(state, t: float, dt: float, i_q: float, torque_source: TorqueSource,
             params: MotorParams) -> State:
    """One classical Runge-Kutta step with the current held constant.

    ``t`` is accepted for interface symmetry; the plant is time invariant.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(state, dtype=float)

    def f(y):
        return dynamics_rhs(y, i_q, torque_source(y), params)

    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    x_new = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return State(float(x_new[0]), float(x_new[1]))
