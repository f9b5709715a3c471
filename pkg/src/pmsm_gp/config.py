"""Scenario configuration and its TOML representation."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import tomli

from .aggregation import STRATEGIES
from .control import Gains
from .datagen import RegionSpec, paper_regions
from .dynamics import MappingConfig, MotorParams, ReferenceConfig, rpm_to_rad_s
from .gp import SEKernel

# "perfect" is a test hook (estimate equals the true torque), not a fusion strategy
SIM_STRATEGIES = STRATEGIES + ("perfect",)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BoundConfig:
    delta: float = 0.01
    tau: float = 0.01
    L_f: float = 2.0002
    eta_grid: int = 201


@dataclass(frozen=True)
class ScenarioConfig:
    motor: MotorParams = field(default_factory=MotorParams)
    mapping: MappingConfig = field(default_factory=MappingConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    gains: Gains = field(default_factory=Gains)
    Q: tuple = ((1.0, 0.0), (0.0, 1.0))
    experts: tuple = field(default_factory=lambda: tuple(paper_regions()))
    kernel: SEKernel = field(default_factory=SEKernel)
    bound: BoundConfig = field(default_factory=BoundConfig)
    strategy: str = "coaoe-eta"
    t_end: float = 10.0
    dt_sim: float = 1e-5
    dt_ctrl: float = 1e-4
    x0: tuple = (0.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in SIM_STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")
        if not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if not (self.dt_sim > 0 and self.dt_ctrl > 0):
            raise ConfigError("time steps must be positive")
        self.n_sub  # validates the step ratio
        self.n_ticks
        if len(self.experts) < 1:
            raise ConfigError("at least one expert region is required")
        if np.asarray(self.Q).shape != (2, 2):
            raise ConfigError("Q must be 2x2")

    @property
    def n_sub(self) -> int:
        ratio = self.dt_ctrl / self.dt_sim
        n = round(ratio)
        if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"dt_ctrl={self.dt_ctrl} is not an integer multiple of dt_sim={self.dt_sim}")
        return n

    @property
    def n_ticks(self) -> int:
        ratio = self.t_end / self.dt_ctrl
        n = round(ratio)
        if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"t_end={self.t_end} is not an integer multiple of dt_ctrl={self.dt_ctrl}")
        return n

    @property
    def Q_matrix(self) -> np.ndarray:
        return np.array(self.Q, dtype=float)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def _build(cls, table: dict, name: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(table) - known
    if unknown:
        raise ConfigError(f"[{name}] has unknown keys: {sorted(unknown)}")
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}] {exc}") from exc


def _mapping(table: dict) -> MappingConfig:
    table = dict(table)
    if "omega_max_rpm" in table:
        if "omega_lo" in table or "omega_hi" in table:
            raise ConfigError("[mapping] give omega_max_rpm or omega_lo/omega_hi, not both")
        w = rpm_to_rad_s(float(table.pop("omega_max_rpm")))
        table["omega_lo"], table["omega_hi"] = -w, w
    return _build(MappingConfig, table, "mapping")


def _reference(table: dict) -> ReferenceConfig:
    table = dict(table)
    if "speed_rpm" in table:
        if "alpha" in table:
            raise ConfigError("[reference] give alpha or speed_rpm, not both")
        t_acc = float(table.get("t_acc", ReferenceConfig.t_acc))
        table["alpha"] = rpm_to_rad_s(float(table.pop("speed_rpm"))) / t_acc
    return _build(ReferenceConfig, table, "reference")


def _region(table: dict, i: int) -> RegionSpec:
    table = dict(table)
    # angles may be given in multiples of pi
    for key in ("phi_lo", "phi_hi"):
        if key + "_pi" in table:
            table[key] = float(table.pop(key + "_pi")) * math.pi
    return _build(RegionSpec, table, f"experts.{i}")


def config_from_dict(data: dict) -> ScenarioConfig:
    data = dict(data)
    kwargs = {}
    if "motor" in data:
        kwargs["motor"] = _build(MotorParams, data.pop("motor"), "motor")
    if "mapping" in data:
        kwargs["mapping"] = _mapping(data.pop("mapping"))
    if "reference" in data:
        kwargs["reference"] = _reference(data.pop("reference"))
    if "control" in data:
        ctrl = dict(data.pop("control"))
        if "Q" in ctrl:
            kwargs["Q"] = tuple(tuple(float(v) for v in row) for row in ctrl.pop("Q"))
        kwargs["gains"] = _build(Gains, ctrl, "control")
    if "kernel" in data:
        kwargs["kernel"] = _build(SEKernel, data.pop("kernel"), "kernel")
    if "bound" in data:
        kwargs["bound"] = _build(BoundConfig, data.pop("bound"), "bound")
    if "experts" in data:
        kwargs["experts"] = tuple(_region(t, i) for i, t in enumerate(data.pop("experts")))
    sim = dict(data.pop("simulation", {}))
    if "x0" in sim:
        sim["x0"] = tuple(float(v) for v in sim["x0"])
    kwargs.update(sim)
    if data:
        raise ConfigError(f"unknown top-level keys: {sorted(data)}")
    try:
        return ScenarioConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def resolve_config_path(path) -> Path:
    """Return ``path`` if it exists, else a bundled config of that name (e.g. ``paper.toml``)."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.suffix == ".toml" else p.name + ".toml"
    bundled = resources.files("pmsm_gp") / "configs" / name
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"config file {path} not found")


def load_config(path) -> ScenarioConfig:
    p = resolve_config_path(path)
    try:
        with p.open("rb") as fh:
            data = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return config_from_dict(data)
