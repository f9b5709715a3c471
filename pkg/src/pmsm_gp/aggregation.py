"""Fusion of distributed GP expert predictions into one torque estimate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

STRATEGIES = ("none", "moe", "gpoe", "coaoe-mean", "coaoe-eta")


@dataclass(frozen=True)
class ExpertOutputs:
    """Per-expert predictions at one query point.

    ``variances`` and ``etas`` stay ``None`` unless a strategy asked for them,
    so mean-only strategies never pay for variance computations.
    """

    means: np.ndarray
    variances: np.ndarray | None = None
    etas: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.means)
        for name in ("variances", "etas"):
            v = getattr(self, name)
            if v is not None and len(v) != n:
                raise ValueError(f"{name} has length {len(v)}, expected {n}")
        if self.variances is not None and np.any(np.asarray(self.variances) < 0):
            raise ValueError("variances must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.means)


def check_weights(w, n: int | None = None, atol: float = 1e-12) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if n is not None and w.shape != (n,):
        raise ValueError(f"weights have shape {w.shape}, expected ({n},)")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if abs(w.sum() - 1.0) > atol:
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    return w


def vertex(j: int, n: int) -> np.ndarray:
    w = np.zeros(n)
    w[j] = 1.0
    return w


def aggregate_mean(outputs: ExpertOutputs, w) -> float:
    w = check_weights(w, outputs.n)
    return float(np.dot(w, outputs.means))


def moe_weights(n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("need at least one expert")
    return np.full(n, 1.0 / n)


def gpoe_aggregate(outputs: ExpertOutputs, w) -> tuple[float, float]:
    """Generalized product of experts: precision-weighted mean and fused std.

    An expert with exactly zero variance is certain; its mean is returned
    with zero spread (the lowest such index wins).
    """
    if outputs.variances is None:
        raise ValueError("gpoe needs expert variances")
    w = check_weights(w, outputs.n)
    var = np.asarray(outputs.variances, dtype=float)
    mu = np.asarray(outputs.means, dtype=float)
    zero = np.flatnonzero(var == 0.0)
    if zero.size:
        return float(mu[zero[0]]), 0.0
    prec = w / var
    fused_var = 1.0 / prec.sum()
    return float(fused_var * np.dot(prec, mu)), math.sqrt(fused_var)


def coaoe_theta(outputs: ExpertOutputs, Pb: np.ndarray, e) -> np.ndarray:
    """theta = h * (b^T P e); the linear objective over the simplex."""
    return np.asarray(outputs.means, dtype=float) * float(np.dot(Pb, e))


def coaoe_mean_weights(outputs: ExpertOutputs, P, b, e) -> np.ndarray:
    """Simplex vertex minimizing the Lyapunov derivative, using expert means only.

    With the controller in place the error obeys ``de/dt = A e + B_in (T_hat - T)``,
    so ``dV/dt`` contains ``+2 J^-1 (b^T P e) h^T w``. The linear objective
    ``theta^T w`` is therefore minimized, which puts all weight on
    ``argmin_i theta_i``.
    """
    theta = coaoe_theta(outputs, np.asarray(P) @ np.asarray(b), e)
    # argmin returns the first minimizer, which is the tie rule
    return vertex(int(np.argmin(theta)), outputs.n)


def coaoe_eta_weights(outputs: ExpertOutputs) -> np.ndarray:
    if outputs.etas is None:
        raise ValueError("coaoe-eta needs expert error bounds")
    return vertex(int(np.argmin(outputs.etas)), outputs.n)


def vdot_value(e, P, Q, B_in, T_true: float, T_hat: float) -> float:
    """Time derivative of ``V = e^T P e`` along the controlled error dynamics.

    An overestimated load (``T_hat > T``) accelerates the motor, hence the
    ``T_hat - T`` factor.
    """
    e = np.asarray(e, dtype=float)
    return float(-e @ Q @ e + 2.0 * e @ P @ B_in * (T_hat - T_true))


def ball_radius(P, Q, J: float, eta_tilde: float) -> float:
    """Error norm beyond which the Lyapunov function is certified to decrease."""
    return 2.0 * np.linalg.norm(P, 2) / (J * np.linalg.eigvalsh(Q)[0]) * eta_tilde


def ultimate_bound(P, Q, J: float, eta_max: float) -> float:
    eig_p = np.linalg.eigvalsh(P)
    eig_q = np.linalg.eigvalsh(Q)
    if eig_p[0] <= 0 or eig_q[0] <= 0:
        raise ValueError("P and Q must be positive definite")
    return float(2.0 * math.sqrt(eig_p[-1] / eig_p[0]) * np.linalg.norm(P, 2)
                 / (J * eig_q[0]) * eta_max)
