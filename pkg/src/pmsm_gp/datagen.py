"""Training-data generation: encoder model, finite differences and noise propagation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import DOMAIN_HI, DOMAIN_LO, MotorParams, true_torque_grid
from .gp import Dataset


@dataclass(frozen=True)
class SensorConfig:
    sigma_phi: float = 1e-3
    delta_t: float = 1e-3
    sigma_lin_phi: float = 0.0
    sigma_lin_omega: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.sigma_phi, self.sigma_lin_phi, self.sigma_lin_omega) < 0:
            raise ValueError("noise standard deviations must be nonnegative")
        if not self.delta_t > 0:
            raise ValueError("delta_t must be positive")


@dataclass(frozen=True)
class RegionSpec:
    """Rectangular patch of the input domain sampled on a uniform grid for one expert."""

    phi_lo: float
    phi_hi: float
    omega_lo: float = -1.0
    omega_hi: float = 1.0
    n_phi: int = 10
    n_omega: int = 5
    noise_std: float = 0.01

    def __post_init__(self):
        slack = 1e-12
        if not (DOMAIN_LO[0] - slack <= self.phi_lo <= self.phi_hi <= DOMAIN_HI[0] + slack):
            raise ValueError(f"phi range [{self.phi_lo}, {self.phi_hi}] not nested in [-pi, pi]")
        if not (DOMAIN_LO[1] - slack <= self.omega_lo <= self.omega_hi <= DOMAIN_HI[1] + slack):
            raise ValueError(f"omega range [{self.omega_lo}, {self.omega_hi}] not nested in [-1, 1]")
        if self.n_phi < 1 or self.n_omega < 1:
            raise ValueError("grid counts must be >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")

    def grid(self) -> np.ndarray:
        phi = np.linspace(self.phi_lo, self.phi_hi, self.n_phi)
        om = np.linspace(self.omega_lo, self.omega_hi, self.n_omega)
        P, W = np.meshgrid(phi, om, indexing="ij")
        return np.column_stack([P.ravel(), W.ravel()])


def paper_regions(n_phi: int = 10, n_omega: int = 5) -> list[RegionSpec]:
    """Four quarter slices in angle; the outer two are the low-noise experts."""
    edges = np.linspace(-math.pi, math.pi, 5)
    noise = (0.01, 0.1, 0.1, 0.01)
    return [RegionSpec(float(edges[i]), float(edges[i + 1]), -1.0, 1.0, n_phi, n_omega, noise[i])
            for i in range(4)]


def encoder_measure(phi_m, cfg: SensorConfig, rng: np.random.Generator):
    phi_m = np.asarray(phi_m, dtype=float)
    z = phi_m + cfg.sigma_phi * rng.standard_normal(phi_m.shape)
    return float(z) if z.ndim == 0 else z


def finite_diff_velocity(z_next, z_now, delta_t: float):
    if not delta_t > 0:
        raise ValueError("delta_t must be positive")
    return (np.asarray(z_next) - np.asarray(z_now)) / delta_t


def finite_diff_accel(z_2, z_1, z_0, delta_t: float):
    if not delta_t > 0:
        raise ValueError("delta_t must be positive")
    return (np.asarray(z_2) - 2.0 * np.asarray(z_1) + np.asarray(z_0)) / delta_t**2


def reconstruct_torque(omega_tilde_next, omega_tilde_now, i_q, delta_t: float,
                       params: MotorParams):
    """Invert the motion equation for the load torque, T = -J dw/dt - B w + 1.5 p psi I_q."""
    if not delta_t > 0:
        raise ValueError("delta_t must be positive")
    omega_dot = (np.asarray(omega_tilde_next) - np.asarray(omega_tilde_now)) / delta_t
    return (-params.J * omega_dot - params.B_damp * np.asarray(omega_tilde_now)
            + params.torque_constant * np.asarray(i_q))


def noise_variance_omega(cfg: SensorConfig) -> float:
    return 4.0 * cfg.sigma_phi**2 / cfg.delta_t**2 + cfg.sigma_lin_phi**2


def noise_variance_domega(sigma_omega_sq: float, cfg: SensorConfig) -> float:
    return 4.0 * sigma_omega_sq / cfg.delta_t**2 + cfg.sigma_lin_omega**2


def noise_variance_torque(sigma_omega_sq: float, cfg: SensorConfig, params: MotorParams) -> float:
    J, B = params.J, params.B_damp
    return (4.0 * J**2 / cfg.delta_t**2 + B**2) * sigma_omega_sq + J**2 * cfg.sigma_lin_omega**2


def generate_grid_dataset(region: RegionSpec, rng: np.random.Generator) -> Dataset:
    x = region.grid()
    y = true_torque_grid(x) + region.noise_std * rng.standard_normal(x.shape[0])
    return Dataset(x, y, region.noise_std)


def expert_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """Independent streams per expert so one region's draws never shift another's."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def generate_datasets(regions, seed: int) -> list[Dataset]:
    return [generate_grid_dataset(r, g) for r, g in zip(regions, expert_rngs(seed, len(regions)))]
