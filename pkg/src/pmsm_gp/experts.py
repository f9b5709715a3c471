"""A bank of independently fitted GP experts sharing one kernel."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .aggregation import ExpertOutputs
from .datagen import RegionSpec, generate_datasets
from .dynamics import DOMAIN_HI, DOMAIN_LO, true_torque_grid
from .gp import BoundParams, Dataset, GPModel, SEKernel, bound_params


@dataclass
class ExpertBank:
    models: list[GPModel]
    bounds: list[BoundParams]
    regions: list[RegionSpec] | None = None

    @classmethod
    def from_datasets(cls, datasets: list[Dataset], kernel: SEKernel, delta: float,
                      tau: float, L_f: float, regions=None) -> "ExpertBank":
        models = [GPModel(kernel).fit(d) for d in datasets]
        bounds = [bound_params(m, delta, tau, L_f) for m in models]
        return cls(models, bounds, regions)

    @classmethod
    def from_regions(cls, regions: list[RegionSpec], kernel: SEKernel, seed: int,
                     delta: float = 0.01, tau: float = 0.01, L_f: float = 2.0002) -> "ExpertBank":
        return cls.from_datasets(generate_datasets(regions, seed), kernel, delta, tau, L_f,
                                 list(regions))

    @property
    def n(self) -> int:
        return len(self.models)

    @property
    def kernel(self) -> SEKernel:
        return self.models[0].kernel

    def means(self, x) -> np.ndarray:
        """Posterior means, shape ``(N,)`` for one point or ``(N, n)`` for rows of x."""
        return np.array([m.posterior_mean(x) for m in self.models])

    def variances(self, x) -> np.ndarray:
        return np.array([m.posterior_var(x) for m in self.models])

    def etas_from_var(self, var: np.ndarray) -> np.ndarray:
        sqrt_beta = np.array([math.sqrt(b.beta) for b in self.bounds])
        gamma = np.array([b.gamma for b in self.bounds])
        if var.ndim == 2:
            sqrt_beta, gamma = sqrt_beta[:, None], gamma[:, None]
        return sqrt_beta * np.sqrt(var) + gamma

    def etas(self, x) -> np.ndarray:
        return self.etas_from_var(self.variances(x))

    def outputs(self, x, need_var: bool = False, need_eta: bool = False) -> ExpertOutputs:
        means = self.means(x)
        if not (need_var or need_eta):
            return ExpertOutputs(means)
        var = self.variances(x)
        return ExpertOutputs(means, var, self.etas_from_var(var) if need_eta else None)

    def eta_tilde_max(self, n_grid: int = 201) -> float:
        """Dense-grid estimate of the supremum over the domain of the smallest expert bound."""
        phi = np.linspace(DOMAIN_LO[0], DOMAIN_HI[0], n_grid)
        om = np.linspace(DOMAIN_LO[1], DOMAIN_HI[1], n_grid)
        P, W = np.meshgrid(phi, om, indexing="ij")
        x = np.column_stack([P.ravel(), W.ravel()])
        return float(self.etas(x).min(axis=0).max())

    def coverage(self, n_grid: int = 50) -> list[float]:
        """Fraction of an ``n_grid x n_grid`` grid of each expert's region where its bound holds."""
        if self.regions is None:
            raise ValueError("coverage needs the expert regions")
        out = []
        for model, bp, region in zip(self.models, self.bounds, self.regions):
            grid = RegionSpec(region.phi_lo, region.phi_hi, region.omega_lo, region.omega_hi,
                              n_grid, n_grid, region.noise_std).grid()
            err = np.abs(true_torque_grid(grid) - model.posterior_mean(grid))
            eta = math.sqrt(bp.beta) * np.sqrt(model.posterior_var(grid)) + bp.gamma
            out.append(float(np.mean(err <= eta)))
        return out
