"""Exact GP regression with a squared-exponential kernel and its uniform error bound."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .dynamics import DOMAIN_HI, DOMAIN_LO

VARIANCE_CLAMP_TOL = 1e-12


class GPFitError(ValueError):
    """Raised when the regularized Gram matrix is not numerically positive definite."""


@dataclass(frozen=True)
class SEKernel:
    sigma_f: float = 1.0
    ell: float = 0.2

    def __post_init__(self):
        if not self.sigma_f > 0 or not self.ell > 0:
            raise ValueError(f"kernel hyperparameters must be positive, got {self}")

    def __call__(self, a, b) -> np.ndarray:
        """Cross-covariance matrix between row sets ``a`` (n, d) and ``b`` (m, d)."""
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
        return self.sigma_f**2 * np.exp(-sq / (2.0 * self.ell**2))


def kernel_eval(k: SEKernel, x, x2) -> float:
    d = np.asarray(x, dtype=float) - np.asarray(x2, dtype=float)
    return float(k.sigma_f**2 * math.exp(-float(d @ d) / (2.0 * k.ell**2)))


@dataclass
class Dataset:
    inputs: np.ndarray
    outputs: np.ndarray
    noise_std: float

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.outputs = np.asarray(self.outputs, dtype=float).ravel()
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ValueError(
                f"{self.inputs.shape[0]} inputs but {self.outputs.shape[0]} outputs")
        if self.inputs.shape[0] < 1:
            raise ValueError("dataset must hold at least one sample")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if self.inputs.shape[1] == 2:
            slack = 1e-12
            if np.any(self.inputs < DOMAIN_LO - slack) or np.any(self.inputs > DOMAIN_HI + slack):
                raise ValueError("dataset inputs leave the domain [-pi, pi] x [-1, 1]")

    def __len__(self):
        return self.outputs.shape[0]

    def to_csv(self, path) -> None:
        path = Path(path)
        body = np.column_stack([self.inputs, self.outputs])
        with path.open("w") as fh:
            fh.write(f"# sigma_T={self.noise_std!r}\n")
            fh.write("phi_m,omega_m,y\n")
            np.savetxt(fh, body, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        with path.open() as fh:
            first = fh.readline().strip()
            if not first.startswith("# sigma_T="):
                raise ValueError(f"{path}: missing '# sigma_T=' header comment")
            noise_std = float(first.split("=", 1)[1])
            header = fh.readline().strip()
            if header != "phi_m,omega_m,y":
                raise ValueError(f"{path}: unexpected header {header!r}")
            body = np.loadtxt(fh, delimiter=",", ndmin=2)
        return cls(body[:, :2], body[:, 2], noise_std)


class GPModel:
    """Zero-mean GP posterior for one expert.

    Caches the Cholesky factor of ``K + sigma_T^2 I`` and the weight vector
    ``alpha = (K + sigma_T^2 I)^{-1} Y``. Calling :meth:`fit` again replaces
    both caches.
    """

    def __init__(self, kernel: SEKernel):
        self.kernel = kernel
        self.dataset: Dataset | None = None
        self.chol: np.ndarray | None = None
        self.alpha: np.ndarray | None = None

    def fit(self, dataset: Dataset) -> "GPModel":
        self.dataset = self.chol = self.alpha = None
        gram = self.kernel(dataset.inputs, dataset.inputs)
        gram[np.diag_indices_from(gram)] += dataset.noise_std**2
        try:
            chol = scipy.linalg.cholesky(gram, lower=True)
        except np.linalg.LinAlgError as exc:
            raise GPFitError(
                "K + sigma_T^2 I is not positive definite (duplicate inputs with "
                "zero noise?); consider adding a small jitter to noise_std"
            ) from exc
        self.dataset = dataset
        self.chol = chol
        self.alpha = scipy.linalg.cho_solve((chol, True), dataset.outputs)
        return self

    def _require_fit(self):
        if self.alpha is None:
            raise RuntimeError("GPModel used before fit()")

    @property
    def n_samples(self) -> int:
        self._require_fit()
        return len(self.dataset)

    def posterior_mean(self, x):
        """Posterior mean at a point ``(2,)`` or at rows of ``(n, 2)``."""
        self._require_fit()
        single = np.ndim(x) == 1
        kx = self.kernel(x, self.dataset.inputs)
        mu = kx @ self.alpha
        return float(mu[0]) if single else mu

    def posterior_var(self, x):
        self._require_fit()
        single = np.ndim(x) == 1
        kx = self.kernel(x, self.dataset.inputs)
        v = scipy.linalg.solve_triangular(self.chol, kx.T, lower=True)
        var = self.kernel.sigma_f**2 - np.einsum("ij,ij->j", v, v)
        var = _clamp_variance(var)
        return float(var[0]) if single else var


def _clamp_variance(var: np.ndarray) -> np.ndarray:
    # round-off may push the variance slightly below zero
    if np.any(var < -VARIANCE_CLAMP_TOL):
        raise FloatingPointError(f"posterior variance {var.min():.3e} is negative beyond round-off")
    return np.maximum(var, 0.0)


def fit(dataset: Dataset, kernel: SEKernel) -> GPModel:
    return GPModel(kernel).fit(dataset)


def posterior_mean(model: GPModel, x):
    return model.posterior_mean(x)


def posterior_var(model: GPModel, x):
    return model.posterior_var(x)


def lipschitz_kernel_se(kernel: SEKernel) -> float:
    """Lipschitz constant of ``x -> k(x, x0)``; the gradient norm peaks at distance ``ell``."""
    return kernel.sigma_f**2 / kernel.ell * math.exp(-0.5)


def lipschitz_sigma_se(kernel: SEKernel) -> float:
    return math.sqrt(2.0) * kernel.sigma_f / kernel.ell


def lipschitz_mu(model: GPModel, L_k: float) -> float:
    return L_k * math.sqrt(model.n_samples) * float(np.linalg.norm(model.alpha))


def compute_beta(delta: float, tau: float, lo=DOMAIN_LO, hi=DOMAIN_HI) -> float:
    """Confidence scaling for the uniform bound, from a tau-grid covering of the box [lo, hi]."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if not tau > 0:
        raise ValueError("tau must be positive")
    widths = np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float)
    return float(2.0 * np.sum(np.log(widths / (math.sqrt(2.0) * tau) + 1.0)) - 2.0 * math.log(delta))


def compute_gamma(beta: float, L_sigma: float, L_f: float, L_mu: float, tau: float) -> float:
    return (math.sqrt(beta) * L_sigma + L_f + L_mu) * tau


@dataclass(frozen=True)
class BoundParams:
    delta: float
    tau: float
    L_f: float
    beta: float
    gamma: float
    L_mu: float
    L_sigma: float
    L_k: float

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if min(self.L_f, self.L_mu, self.L_sigma, self.L_k) < 0:
            raise ValueError("Lipschitz constants must be nonnegative")
        if not self.beta > 0:
            raise ValueError("beta must be positive")


def bound_params(model: GPModel, delta: float = 0.01, tau: float = 0.01,
                 L_f: float = 2.0002, lo=DOMAIN_LO, hi=DOMAIN_HI) -> BoundParams:
    """Assemble every constant of the error bound for a fitted SE-kernel model."""
    L_k = lipschitz_kernel_se(model.kernel)
    L_sigma = lipschitz_sigma_se(model.kernel)
    L_mu = lipschitz_mu(model, L_k)
    beta = compute_beta(delta, tau, lo, hi)
    gamma = compute_gamma(beta, L_sigma, L_f, L_mu, tau)
    return BoundParams(delta, tau, L_f, beta, gamma, L_mu, L_sigma, L_k)


def eta(model: GPModel, bp: BoundParams, x):
    """High-probability bound on ``|f(x) - mu(x)|``."""
    return math.sqrt(bp.beta) * np.sqrt(model.posterior_var(x)) + bp.gamma
