"""Closed-loop scenario runner, Lyapunov diagnostics, metrics and strategy comparison."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import _fastloop
from .aggregation import STRATEGIES, aggregate_mean, coaoe_eta_weights, coaoe_mean_weights, \
    gpoe_aggregate, moe_weights, ultimate_bound
from .config import ScenarioConfig
from .control import ClosedLoopMatrices, control_law, tracking_error
from .dynamics import MotorParams, map_state, map_states, reference, rk4_step, true_torque, \
    true_torque_grid
from .experts import ExpertBank

log = logging.getLogger(__name__)


class SimulationDiverged(RuntimeError):
    def __init__(self, t: float):
        super().__init__(f"non-finite state at t={t:.6g} s")
        self.t = t


def log_columns(n_experts: int) -> list[str]:
    return (["t", "phi", "omega", "phi_d", "omega_d", "e1", "e2", "e_norm", "T_true", "T_hat", "i_q"]
            + [f"w{i + 1}" for i in range(n_experts)] + ["V"])


@dataclass
class TrajectoryLog:
    data: np.ndarray
    n_experts: int
    strategy: str = ""

    @property
    def columns(self) -> list[str]:
        return log_columns(self.n_experts)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def __len__(self):
        return self.data.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return self.data[:, 11:11 + self.n_experts]

    @property
    def errors(self) -> np.ndarray:
        return self.data[:, 5:7]

    def to_csv(self, path) -> None:
        np.savetxt(path, self.data, delimiter=",", header=",".join(self.columns), comments="",
                   fmt="%.10g")

    @classmethod
    def from_csv(cls, path, strategy: str = "") -> "TrajectoryLog":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        n = sum(1 for c in header if c.startswith("w"))
        if header != log_columns(n):
            raise ValueError(f"{path}: header does not match the trajectory schema")
        return cls(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2), n, strategy)


def build_bank(config: ScenarioConfig, seed: int | None = None) -> ExpertBank:
    b = config.bound
    return ExpertBank.from_regions(list(config.experts), config.kernel,
                                   config.seed if seed is None else seed, b.delta, b.tau, b.L_f)


def closed_loop_matrices(config: ScenarioConfig) -> ClosedLoopMatrices:
    return ClosedLoopMatrices.build(config.gains, config.Q_matrix, config.motor.J)


def _pack_bank(bank: ExpertBank):
    N = bank.n
    M = np.array([m.n_samples for m in bank.models], dtype=np.int64)
    mmax = int(M.max())
    X = np.zeros((N, mmax, 2))
    alpha = np.zeros((N, mmax))
    L = np.zeros((N, mmax, mmax))
    for i, m in enumerate(bank.models):
        X[i, :M[i]] = m.dataset.inputs
        alpha[i, :M[i]] = m.alpha
        L[i, :M[i], :M[i]] = m.chol
    sqrt_beta = np.array([math.sqrt(b.beta) for b in bank.bounds])
    gamma = np.array([b.gamma for b in bank.bounds])
    return X, alpha, L, M, sqrt_beta, gamma


def _run_fast(config, bank, cl, strategy):
    n_ticks = config.n_ticks
    out = np.empty((n_ticks + 1, 12 + bank.n))
    X, alpha, L, M, sqrt_beta, gamma = _pack_bank(bank)
    m, mp, r, g = config.motor, config.mapping, config.reference, config.gains
    bad = _fastloop.simulate(
        n_ticks, config.n_sub, config.dt_ctrl, m.J, float(m.p), m.B_damp, m.psi,
        mp.upsilon, mp.omega_max, r.alpha, r.t_acc, g.lambda1, g.lambda2,
        np.ascontiguousarray(cl.P), _fastloop.STRATEGY_CODES[strategy], X, alpha, L, M,
        bank.kernel.sigma_f, bank.kernel.ell, sqrt_beta, gamma,
        float(config.x0[0]), float(config.x0[1]), out)
    if bad >= 0:
        raise SimulationDiverged(bad * config.dt_ctrl)
    return out


def _estimate(strategy, bank, xm, e, cl, T_true):
    """Torque estimate and weights for one control tick."""
    n = bank.n
    if strategy == "none":
        return 0.0, moe_weights(n)
    if strategy == "perfect":
        return T_true, moe_weights(n)
    x = np.asarray(xm)
    if strategy == "moe":
        w = moe_weights(n)
        return aggregate_mean(bank.outputs(x), w), w
    if strategy == "gpoe":
        w = moe_weights(n)
        return gpoe_aggregate(bank.outputs(x, need_var=True), w)[0], w
    if strategy == "coaoe-mean":
        outputs = bank.outputs(x)
        w = coaoe_mean_weights(outputs, cl.P, cl.b, e)
    else:
        outputs = bank.outputs(x, need_eta=True)
        w = coaoe_eta_weights(outputs)
    return aggregate_mean(outputs, w), w


def _run_python(config, bank, cl, strategy):
    """Reference engine built from the public module functions; slow but transparent."""
    n_ticks, n_sub = config.n_ticks, config.n_sub
    dt_sim = config.dt_ctrl / n_sub
    params: MotorParams = config.motor
    out = np.empty((n_ticks + 1, 12 + bank.n))
    state = tuple(float(v) for v in config.x0)
    for k in range(n_ticks + 1):
        t = k * config.dt_ctrl
        ref = reference(t, config.reference)
        e = tracking_error(state, ref)
        xm = map_state(state, config.mapping)
        T_true = true_torque(xm)
        T_hat, w = _estimate(strategy, bank, xm, e, cl, T_true)
        i_q = control_law(state, ref, T_hat, params, config.gains)
        out[k, :11] = (t, state[0], state[1], ref.phi_d, ref.omega_d, e[0], e[1],
                       math.hypot(e[0], e[1]), T_true, T_hat, i_q)
        out[k, 11:11 + bank.n] = w
        out[k, 11 + bank.n] = float(e @ cl.P @ e)
        if k == n_ticks:
            break
        if strategy == "perfect":
            def source(_y, held=T_hat):
                return held
        else:
            def source(y):
                return true_torque(map_state(y, config.mapping))
        for _ in range(n_sub):
            state = rk4_step(state, t, dt_sim, i_q, source, params)
        if not all(map(math.isfinite, state)):
            raise SimulationDiverged((k + 1) * config.dt_ctrl)
    return out


def run_closed_loop(config: ScenarioConfig, strategy: str | None = None,
                    bank: ExpertBank | None = None, engine: str = "fast") -> TrajectoryLog:
    """Simulate the tracking loop from ``config.x0`` at t=0 to ``config.t_end``.

    The controller runs every ``dt_ctrl`` with zero-order hold and reads the
    true state; the plant is integrated with RK4 at ``dt_sim``. Strategy
    ``"perfect"`` is a test hook whose torque compensation is exact at every
    integrator stage.
    """
    strategy = strategy or config.strategy
    if strategy not in _fastloop.STRATEGY_CODES:
        raise ValueError(f"unknown strategy {strategy!r}")
    bank = bank if bank is not None else build_bank(config)
    cl = closed_loop_matrices(config)
    if engine == "fast":
        data = _run_fast(config, bank, cl, strategy)
    elif engine == "python":
        data = _run_python(config, bank, cl, strategy)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return TrajectoryLog(data, bank.n, strategy)


@dataclass
class LyapunovTrace:
    V: np.ndarray
    vdot_fd: np.ndarray
    vdot_analytic: np.ndarray


def lyapunov_trace(log: TrajectoryLog, cl: ClosedLoopMatrices) -> LyapunovTrace:
    """V along the log, its central-difference derivative, and the model derivative."""
    if len(log) == 0:
        raise ValueError("empty log")
    e = log.errors
    V = np.einsum("ni,ij,nj->n", e, cl.P, e)
    vdot_fd = np.gradient(V, log["t"]) if len(log) > 1 else np.zeros(1)
    d = log["T_hat"] - log["T_true"]
    vdot = -np.einsum("ni,ij,nj->n", e, cl.Q, e) + 2.0 * (e @ (cl.P @ cl.B_in)) * d
    return LyapunovTrace(V, vdot_fd, vdot)


@dataclass
class Metrics:
    rmse_e: float
    max_e: float
    steady_e: float
    bound_violations: int = 0


def bound_violations(log: TrajectoryLog, bank: ExpertBank, config: ScenarioConfig,
                     stride: int = 10) -> int:
    """Count (tick, expert) pairs along the log where ``|T - mu_i| > eta_i``."""
    rows = slice(None, None, stride)
    xm = map_states(log["phi"][rows], log["omega"][rows], config.mapping)
    T = true_torque_grid(xm)
    err = np.abs(bank.means(xm) - T)
    return int(np.sum(err > bank.etas(xm)))


def compute_metrics(log: TrajectoryLog, window_fraction: float = 0.2,
                    violations: int = 0) -> Metrics:
    """RMS and mean of the error norm over the final window, plus the overall maximum."""
    if len(log) == 0:
        raise ValueError("empty log")
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must lie in (0, 1]")
    e = log["e_norm"]
    start = min(int(math.floor(len(e) * (1.0 - window_fraction))), len(e) - 1)
    tail = e[start:]
    return Metrics(float(np.sqrt(np.mean(tail**2))), float(e.max()), float(tail.mean()),
                   int(violations))


@dataclass
class CompareRow:
    strategy: str
    metrics: Metrics | None
    error: str | None = None


def compare(config: ScenarioConfig, strategies=STRATEGIES, out_dir=None, seed: int | None = None,
            window_fraction: float = 0.2, count_violations: bool = True) -> list[CompareRow]:
    """Run each strategy on the same plant, reference and fitted experts."""
    if seed is not None:
        config = config.replace(seed=seed)
    bank = build_bank(config)
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for s in strategies:
        try:
            trace = run_closed_loop(config, s, bank)
        except Exception as exc:  # one failing strategy must not sink the batch
            log.warning("strategy %s failed: %s", s, exc)
            rows.append(CompareRow(s, None, str(exc)))
            continue
        nv = bound_violations(trace, bank, config) if count_violations else 0
        rows.append(CompareRow(s, compute_metrics(trace, window_fraction, nv)))
        if out_dir is not None:
            trace.to_csv(out_dir / f"{s}.csv")
    if out_dir is not None:
        write_report(rows, out_dir / "metrics.csv")
    return rows


def write_report(rows: list[CompareRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strategy", "rmse_e", "max_e", "steady_e", "bound_violations", "error"])
        for r in rows:
            if r.metrics is None:
                w.writerow([r.strategy, "", "", "", "", r.error])
            else:
                m = r.metrics
                w.writerow([r.strategy, f"{m.rmse_e:.10g}", f"{m.max_e:.10g}",
                            f"{m.steady_e:.10g}", m.bound_violations, ""])


def bound_check(config: ScenarioConfig, simulate: bool = True, coverage_grid: int = 50) -> dict:
    """Error-bound coverage per expert and the ultimate tracking-error radius."""
    bank = build_bank(config)
    cl = closed_loop_matrices(config)
    eta_max = bank.eta_tilde_max(config.bound.eta_grid)
    radius = ultimate_bound(cl.P, cl.Q, config.motor.J, eta_max)
    report = {
        "beta": bank.bounds[0].beta,
        "L_k": bank.bounds[0].L_k,
        "L_sigma": bank.bounds[0].L_sigma,
        "experts": [{"L_mu": b.L_mu, "gamma": b.gamma, "coverage": c}
                    for b, c in zip(bank.bounds, bank.coverage(coverage_grid))],
        "eta_tilde_max": eta_max,
        "eta_grid": config.bound.eta_grid,
        "ultimate_bound": radius,
    }
    if simulate:
        trace = run_closed_loop(config, "coaoe-eta", bank)
        m = compute_metrics(trace)
        report["coaoe_eta_steady_e"] = m.steady_e
        report["within_bound"] = bool(m.steady_e < radius)
    return report


def metrics_dict(m: Metrics) -> dict:
    return asdict(m)
