"""Scenario configuration: TOML files with dotted keys, strictly validated."""
from __future__ import annotations

import dataclasses
import os
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import tomli

from .analytic import SQRT_PI
from .codes import EIGENSTATES
from .noise import DEFAULT_MAINS, NoiseModel, RecoilModel

OUTPUT_ENV = "GRIDPUMP_OUT"
SCENARIOS = ("epsilon_sweep", "stabilizer_onset", "lifetimes", "logical_init", "charfn", "ramsey")
MODES = ("exact_branching", "sampled")


class ConfigError(ValueError):
    pass


@dataclass
class RecoilConfig:
    enabled: bool = True
    mean_photons: float = 2.0
    mean_norm: float = 0.13
    angle_distribution: str = "isotropic_projected"


@dataclass
class MainsConfig:
    frequencies: list = field(default_factory=lambda: [m[0] for m in DEFAULT_MAINS])
    amplitudes: list = field(default_factory=lambda: [m[1] for m in DEFAULT_MAINS])
    phases: list = field(default_factory=lambda: [m[2] for m in DEFAULT_MAINS])


@dataclass
class NoiseConfig:
    enabled: bool = True
    gamma_down: float = 10.0
    gamma_up: float = 10.0
    gamma_deph: float = 20.0
    drift_sigma: float = float(2 * 3.141592653589793 * 6.0)
    line_trigger: bool = False
    half_detuning: bool = False
    mains: MainsConfig = field(default_factory=MainsConfig)
    recoil: RecoilConfig = field(default_factory=RecoilConfig)

    def model(self) -> NoiseModel:
        if not self.enabled:
            return NoiseModel.noiseless()
        recoil = RecoilModel(
            mean_photons=self.recoil.mean_photons,
            mean_norm=self.recoil.mean_norm,
            angle_distribution=self.recoil.angle_distribution,
            enabled=self.recoil.enabled,
        )
        mains = tuple(zip(self.mains.frequencies, self.mains.amplitudes, self.mains.phases))
        return NoiseModel(
            self.gamma_down, self.gamma_up, self.gamma_deph, mains, self.drift_sigma, recoil, self.line_trigger, self.half_detuning
        )


@dataclass
class ScanConfig:
    """Per-scenario grids; unused entries are ignored by other scenarios."""

    points: int = 20
    eps_max: float = float(0.4 * SQRT_PI)
    hold_time: float = 150e-6
    t_max: float = 20e-3
    t_max_free: float = 6e-3
    t_max_stab_free: float = 3e-3
    free_points: int = 13
    readout_every: int = 2
    pump_cycles: int = 6
    eigenstates: list = field(default_factory=lambda: ["+X", "+Y", "+Z"])
    extent: float = 8.0
    grid: int = 41
    ramsey_t_max: float = 50e-3
    ramsey_points: int = 26


@dataclass
class ScenarioConfig:
    scenario: str = "stabilizer_onset"
    code: str = "square"
    kappa: float = 0.37
    eps: float = float(2 * SQRT_PI * 0.045)
    mu: float = float(2 * SQRT_PI * 0.065)
    eps_offset: float = 0.0
    readout_eps_k1: Optional[float] = None
    readout_eps_k2: Optional[float] = None
    readout_eps_offset: float = 0.0
    init_eps: float = float(2 * SQRT_PI * 0.03)
    cycles: int = 10
    n_traj: int = 200
    seed: int = 1
    dim: int = 200
    tail_tol: float = 1e-6
    mode: str = "exact_branching"
    frame_corrected: bool = True
    shots: int = 0
    workers: int = 1
    out: Optional[str] = None
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)

    def validate(self) -> "ScenarioConfig":
        def need(cond: bool, key: str, msg: str):
            if not cond:
                raise ConfigError(f"{key}: {msg}")

        need(self.scenario in SCENARIOS, "scenario", f"must be one of {SCENARIOS}")
        need(self.code in ("square", "hexagonal"), "code", "must be 'square' or 'hexagonal'")
        need(self.scenario != "logical_init" or self.code == "square", "code", "logical_init needs the square code")
        need(0.05 <= self.kappa <= 0.8, "kappa", f"{self.kappa} outside [0.05, 0.8]")
        for key in ("eps", "mu", "init_eps"):
            need(0.0 <= getattr(self, key) <= 2 * SQRT_PI, key, "must lie in [0, 2 sqrt(pi)]")
        for key in ("readout_eps_k1", "readout_eps_k2"):
            v = getattr(self, key)
            need(v is None or 0.0 <= v <= 2 * SQRT_PI, key, "must lie in [0, 2 sqrt(pi)]")
        need(self.cycles >= 0, "cycles", "must be >= 0")
        need(self.n_traj >= 1, "n_traj", "must be >= 1")
        need(self.seed >= 0, "seed", "must be >= 0")
        need(self.dim >= 2, "dim", "must be >= 2")
        need(0.0 < self.tail_tol < 1.0, "tail_tol", "must lie in (0, 1)")
        need(self.mode in MODES, "mode", f"must be one of {MODES}")
        need(self.shots >= 0, "shots", "must be >= 0")
        need(self.workers >= 1, "workers", "must be >= 1")
        n = self.noise
        for key in ("gamma_down", "gamma_up", "gamma_deph", "drift_sigma"):
            need(getattr(n, key) >= 0, f"noise.{key}", "must be >= 0")
        m = n.mains
        need(len(m.frequencies) == len(m.amplitudes) == len(m.phases), "noise.mains", "frequencies, amplitudes and phases must have equal length")
        need(all(f > 0 for f in m.frequencies), "noise.mains.frequencies", "must be positive")
        need(all(a >= 0 for a in m.amplitudes), "noise.mains.amplitudes", "must be >= 0")
        need(n.recoil.mean_photons >= 1, "noise.recoil.mean_photons", "must be >= 1")
        need(n.recoil.mean_norm >= 0, "noise.recoil.mean_norm", "must be >= 0")
        need(n.recoil.angle_distribution in ("isotropic_projected", "fixed_axis"), "noise.recoil.angle_distribution", "unknown distribution")
        s = self.scan
        need(s.points >= 2, "scan.points", "must be >= 2")
        need(s.eps_max > 0, "scan.eps_max", "must be positive")
        need(s.hold_time >= 0, "scan.hold_time", "must be >= 0")
        need(min(s.t_max, s.t_max_free, s.t_max_stab_free, s.ramsey_t_max) > 0, "scan.t_max", "times must be positive")
        need(s.free_points >= 4 and s.ramsey_points >= 4, "scan.free_points", "need at least 4 points for a fit")
        need(s.readout_every >= 1, "scan.readout_every", "must be >= 1")
        need(s.pump_cycles >= 0, "scan.pump_cycles", "must be >= 0")
        need(all(e in EIGENSTATES for e in s.eigenstates), "scan.eigenstates", f"entries must be in {EIGENSTATES}")
        need(s.extent > 0 and s.grid >= 2, "scan.extent", "extent > 0 and grid >= 2 required")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def output_dir(self) -> Path:
        if self.out:
            return Path(self.out)
        return Path(os.environ.get(OUTPUT_ENV, "runs")) / self.scenario


def _flatten(d: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _line_of(text: str, key: str) -> Optional[int]:
    leaf = re.escape(key.split(".")[-1])
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*([\w.\"']+\.)?{leaf}\s*=", line):
            return i
    return None


def _coerce(value: Any, target: Any, key: str) -> Any:
    kind = type(target)
    if target is None:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{key}: expected a number")
        return float(value)
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number")
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        return value
    if kind is list:
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected an array")
        return list(value)
    raise ConfigError(f"{key}: unsupported value")


def _set(obj: Any, parts: list[str], value: Any, key: str) -> None:
    names = {f.name for f in fields(obj)}
    head = parts[0]
    if head not in names:
        raise ConfigError(f"unknown key {key!r}")
    current = getattr(obj, head)
    if dataclasses.is_dataclass(current):
        if len(parts) == 1:
            raise ConfigError(f"{key}: is a section, not a value")
        _set(current, parts[1:], value, key)
        return
    if len(parts) > 1:
        raise ConfigError(f"unknown key {key!r}")
    if head == "out":
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string")
        setattr(obj, head, value)
        return
    setattr(obj, head, _coerce(value, current, key))


def config_from_mapping(data: dict, text: str = "") -> ScenarioConfig:
    cfg = ScenarioConfig()
    for key, value in _flatten(data).items():
        try:
            _set(cfg, key.split("."), value, key)
        except ConfigError as exc:
            line = _line_of(text, key) if text else None
            raise ConfigError(f"line {line}: {exc}" if line else str(exc)) from None
    try:
        return cfg.validate()
    except ConfigError as exc:
        key = str(exc).split(":")[0]
        line = _line_of(text, key) if text else None
        raise ConfigError(f"line {line}: {exc}" if line else str(exc)) from None


def parse_config(path: str | os.PathLike) -> ScenarioConfig:
    """Read and validate a scenario file; unknown keys and out-of-range values raise ConfigError."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text()
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from None
    return config_from_mapping(data, text)
