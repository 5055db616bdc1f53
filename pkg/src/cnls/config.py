"""Experiment configuration: a flat TOML table with strict key checking."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import tomli
import tomli_w

from . import __version__
from .solver import SolverConfig

EXPERIMENTS = ("ground-state", "gn-constant", "simulate", "dichotomy", "morawetz-check", "resonance-check")
REQUIRED = ("experiment",)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    L: float = 32.0
    M: int = 256
    N: int = 1
    offset: int = 0
    system: str = "finite"
    init: str = "gaussian"
    mass_scale: Optional[float] = None
    perturbation: float = 0.0
    t_end: float = 1.0
    dt_max: float = 1e-3
    cfl_constant: float = 0.1
    dt_min: float = 1e-9
    blowup_sup_factor: float = 1e3
    sample_interval: float = 0.1
    dealias: bool = False
    adaptive: bool = True
    snapshots: bool = True
    tol: float = 1e-10
    method: str = "both"
    n_list: list = field(default_factory=lambda: [1, 2, 3, 5])
    sigma_list: list = field(default_factory=lambda: [0.5, 0.8, 1.0, 2.0])
    out: str = "out"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.mass_scale is not None and not self.mass_scale > 0:
            raise ConfigError("mass_scale must be positive")
        if any(not s > 0 for s in self.sigma_list):
            raise ConfigError("every entry of sigma_list must be positive")
        if self.system not in ("finite", "infinite"):
            raise ConfigError(f"system must be 'finite' or 'infinite', got {self.system!r}")
        if not self.L > 0 or self.M < 4 or self.M % 2:
            raise ConfigError(f"grid needs L > 0 and an even M >= 4, got L={self.L}, M={self.M}")
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.method not in ("petviashvili", "shooting", "both"):
            raise ConfigError(f"method must be petviashvili, shooting or both, got {self.method!r}")

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            t_end=self.t_end,
            dt_max=self.dt_max,
            cfl_constant=self.cfl_constant,
            dt_min=self.dt_min,
            blowup_sup_factor=self.blowup_sup_factor,
            dealias=self.dealias,
            sample_interval=self.sample_interval,
            adaptive=self.adaptive,
        )

    def to_dict(self) -> dict:
        return {k: v for k, v in dataclasses.asdict(self).items() if v is not None}

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def config_from_dict(raw: dict) -> ExperimentConfig:
    unknown = sorted(set(raw) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ConfigError(f"missing required configuration key: {missing[0]}")
    values = dict(raw)
    for name in ("L", "mass_scale", "perturbation", "t_end", "dt_max", "cfl_constant", "dt_min",
                 "blowup_sup_factor", "sample_interval", "tol"):
        if name in values and isinstance(values[name], int) and not isinstance(values[name], bool):
            values[name] = float(values[name])
    if "sigma_list" in values:
        values["sigma_list"] = [float(s) for s in values["sigma_list"]]
    return ExperimentConfig(**values)


def parse_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)


def dump_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


def write_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(dump_config(cfg))


def write_manifest(out_dir, cfg: ExperimentConfig, thresholds: dict, extra: Optional[dict] = None) -> Path:
    """Config echo, code version, seed and the exact threshold values used."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "code_version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "thresholds": thresholds,
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
