"""CSV and JSON readers and writers with bit-stable number formatting."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import PhysicalParams, TaperProfile

__all__ = [
    "write_csv",
    "read_csv",
    "write_profile",
    "read_profile",
    "write_json",
    "params_to_json",
    "params_from_json",
]

FMT = "%.17g"
PARAM_KEYS = ("R_a", "C_m", "G_m", "G_s", "A_s", "ell", "a0", "S")


def write_csv(path: str | Path, header: list[str], columns) -> Path:
    """Write columns of equal length with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    if data.shape[1] != len(header):
        raise ValueError("header and column count differ")
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt=FMT)
    return path


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    try:
        with path.open() as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return header, data


def write_profile(path: str | Path, a: TaperProfile) -> Path:
    return write_csv(path, ["x", "a"], [a.x, a.a])


def read_profile(path: str | Path) -> TaperProfile:
    header, data = read_csv(path)
    if header != ["x", "a"]:
        raise ConfigError(f"profile CSV header must be 'x,a', got {','.join(header)!r}")
    try:
        return TaperProfile(data[:, 0], data[:, 1])
    except ValueError as exc:
        raise ConfigError(f"invalid profile in {path}: {exc}") from exc


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def params_to_json(params: PhysicalParams, ell: float, a0: float, S: float) -> dict:
    return {**params.to_dict(), "ell": ell, "a0": a0, "S": S}


def params_from_json(obj: dict) -> tuple[PhysicalParams, float, float, float]:
    missing = [k for k in PARAM_KEYS if k not in obj]
    if missing:
        raise ConfigError(f"missing parameter keys: {missing}")
    params = PhysicalParams.from_dict({k: obj[k] for k in ("R_a", "C_m", "G_m", "G_s", "A_s")})
    return params, float(obj["ell"]), float(obj["a0"]), float(obj["S"])
