"""Tracking controller with torque compensation and its Lyapunov certificate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import MotorParams, ReferencePoint

LYAPUNOV_RESIDUAL_TOL = 1e-10


class NotHurwitzError(ValueError):
    pass


@dataclass(frozen=True)
class Gains:
    lambda1: float = -5e3
    lambda2: float = -1e4


def build_A(gains: Gains) -> np.ndarray:
    """Companion matrix of the nominal error dynamics; rejects non-Hurwitz gains."""
    A = np.array([[0.0, 1.0], [gains.lambda1, gains.lambda2]])
    # 2x2: Hurwitz iff trace < 0 and det > 0
    if not (np.trace(A) < 0 and np.linalg.det(A) > 0):
        raise NotHurwitzError(
            f"gains {gains} give trace {np.trace(A):g}, det {np.linalg.det(A):g}; need trace<0, det>0")
    return A


def _is_hurwitz(A: np.ndarray) -> bool:
    return bool(np.all(np.linalg.eigvals(A).real < 0))


def solve_lyapunov(A: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Solve ``A^T P + P A + Q = 0`` for symmetric ``P`` (2x2 only).

    The symmetric unknowns ``(p11, p12, p22)`` satisfy a 3x3 linear system,
    which is solved directly.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if A.shape != (2, 2) or Q.shape != (2, 2):
        raise ValueError("solve_lyapunov handles 2x2 matrices only")
    if not np.allclose(Q, Q.T, rtol=0, atol=1e-14) or np.any(np.linalg.eigvalsh(Q) <= 0):
        raise ValueError("Q must be symmetric positive definite")
    if not _is_hurwitz(A):
        raise NotHurwitzError("A is not Hurwitz; the Lyapunov equation has no positive definite solution")
    (a, b), (c, d) = A
    # entries (1,1), (1,2), (2,2) of A^T P + P A
    M = np.array([
        [2 * a, 2 * c, 0.0],
        [b, a + d, c],
        [0.0, 2 * b, 2 * d],
    ])
    p11, p12, p22 = np.linalg.solve(M, -np.array([Q[0, 0], Q[0, 1], Q[1, 1]]))
    P = np.array([[p11, p12], [p12, p22]])
    if not (P[0, 0] > 0 and np.linalg.det(P) > 0):
        raise NotHurwitzError("Lyapunov solution is not positive definite")
    return P


def lyapunov_residual(A, P, Q) -> float:
    return float(np.linalg.norm(A.T @ P + P @ A + Q, "fro"))


@dataclass(frozen=True)
class ClosedLoopMatrices:
    A: np.ndarray
    b: np.ndarray
    B_in: np.ndarray
    Q: np.ndarray
    P: np.ndarray

    @classmethod
    def build(cls, gains: Gains, Q, J: float) -> "ClosedLoopMatrices":
        A = build_A(gains)
        Q = np.asarray(Q, dtype=float)
        P = solve_lyapunov(A, Q)
        res = lyapunov_residual(A, P, Q)
        # relative to |Q| so badly scaled but valid inputs are not rejected
        if res > LYAPUNOV_RESIDUAL_TOL * max(1.0, np.linalg.norm(Q, "fro")):
            raise FloatingPointError(f"Lyapunov residual {res:.3e} exceeds tolerance")
        b = np.array([0.0, 1.0])
        for m in (A, b, Q, P):
            m.setflags(write=False)
        B_in = b / J
        B_in.setflags(write=False)
        return cls(A, b, B_in, Q, P)

    @property
    def Pb(self) -> np.ndarray:
        return self.P @ self.b


def tracking_error(state, ref: ReferencePoint) -> np.ndarray:
    phi, omega = state
    return np.array([phi - ref.phi_d, omega - ref.omega_d])


def control_law(state, ref: ReferencePoint, T_hat: float, params: MotorParams,
                gains: Gains) -> float:
    """q-axis current that cancels damping and predicted load and imposes the error dynamics."""
    phi, omega = state
    J = params.J
    torque = (T_hat
              + J * gains.lambda1 * (phi - ref.phi_d)
              + J * gains.lambda2 * (omega - ref.omega_d)
              + params.B_damp * omega
              + J * ref.accel_d)
    return torque / params.torque_constant
