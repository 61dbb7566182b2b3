"""Run configuration: one JSON object per experiment, with key=value overrides."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .model import PhysicalParams

__all__ = ["RunConfig", "parse_override"]


@dataclass(frozen=True)
class RunConfig:
    R_a: float = 1.0
    C_m: float = 1.0
    G_m: float = 1.0
    G_s: float = 0.5
    A_s: float = 6.283185307179586
    ell: float = 1.0
    a0: float = 1.0
    S: float = 2.0
    M: float = 4.0
    x_cells: int = 2048
    y_cells: int = 2048
    modes: int = 64
    seed: int = 0
    n_profiles: int = 10  # random profiles in sweeps and restarts in searches
    n_nodes: int = 9  # taper nodes of random profiles
    n_xi: int = 21
    n_times: int = 200
    t_max: float = 5.0
    max_iter: int = 500
    out: str = "out"

    def __post_init__(self):
        for name in ("x_cells", "y_cells", "modes", "n_profiles", "n_nodes", "n_xi", "n_times", "max_iter"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_nodes < 2:
            raise ConfigError("n_nodes must be at least 2")
        if self.ell <= 0 or self.a0 <= 0 or self.t_max <= 0:
            raise ConfigError("ell, a0 and t_max must be positive")
        if self.S <= self.a0 * self.ell:
            raise ConfigError(f"empty admissible class: S={self.S} <= a0*ell={self.a0 * self.ell}")
        if self.M <= self.a0**3:
            raise ConfigError(f"M must exceed a0^3 = {self.a0 ** 3}, got {self.M}")
        self.params  # validates the physical constants

    @property
    def params(self) -> PhysicalParams:
        return PhysicalParams(self.R_a, self.C_m, self.G_m, self.G_s, self.A_s)

    @property
    def ell1(self) -> float:
        """Reduced length of the cylinder a = a0."""
        return self.ell / self.a0**2

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        unknown = set(data) - set(cls.field_names())
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in data.items():
            kwargs[key] = _coerce(key, value, types[key])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, overrides: dict) -> "RunConfig":
        data = dataclasses.asdict(self)
        data.update(overrides)
        return RunConfig.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(key: str, value, kind: str):
    try:
        if kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError("not an integer")
            return int(value)
        if kind == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def parse_override(text: str) -> tuple[str, str]:
    """Split ``key=value``."""
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override must look like key=value, got {text!r}")
    return key.strip(), value.strip()
