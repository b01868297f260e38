"""Run configuration, named random streams and CSV/JSON artifacts."""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import GridCDF
from .kernels import ConfigError, ModelParams

CSV_FMT = "%.12g"

DEFAULT_MODEL = {
    "jump": {"kind": "exponential", "rate": 1.0},
    "rate": {"kind": "power", "K": 1},
    "mu": 1.0,
    "mu2": 0.0,
}

DEFAULT_NUMERICS = {
    "h": 1e-2,
    "dt": 5e-3,
    "tail_tol": 1e-6,
    "median_tol": 1e-4,
    "fp_tol": 1e-8,
    "tol": 5e-3,
}

_MODEL_KEYS = {"jump", "rate", "mu", "mu2", "jump2"}
_TOP_KEYS = {"model", "numerics", "experiment", "seed", "out"}


@dataclass
class RunConfig:
    """Everything needed to replay a command.

    The JSON form is either ``{"model": {...}, "numerics": {...}, ...}`` or a
    bare model block ``{"jump": ..., "rate": ..., "mu": ..., "mu2": ...}``
    optionally carrying the other top-level keys alongside.
    """

    model: ModelParams
    numerics: dict = field(default_factory=lambda: dict(DEFAULT_NUMERICS))
    experiment: dict = field(default_factory=dict)
    seed: int = 0
    out: str = "."

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        if not isinstance(d, dict):
            raise ConfigError("config: expected a JSON object")
        if "model" in d:
            model_block, where = d["model"], "model"
        else:
            model_block, where = {k: v for k, v in d.items() if k in _MODEL_KEYS}, "config"
        unknown = set(d) - _TOP_KEYS - (set() if "model" in d else _MODEL_KEYS)
        if unknown:
            raise ConfigError(f"config: unknown keys {sorted(unknown)}")
        model = ModelParams.from_dict(model_block, where)
        numerics = dict(DEFAULT_NUMERICS)
        extra = d.get("numerics", {})
        if not isinstance(extra, dict):
            raise ConfigError("numerics: expected an object")
        for k, v in extra.items():
            if k not in DEFAULT_NUMERICS:
                raise ConfigError(f"numerics.{k}: unknown setting")
            if not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"numerics.{k}: expected a positive number")
            numerics[k] = float(v)
        experiment = d.get("experiment", {})
        if not isinstance(experiment, dict):
            raise ConfigError("experiment: expected an object")
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("seed: expected an integer in [0, 2**64)")
        return cls(model, numerics, dict(experiment), seed, str(d.get("out", ".")))

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "numerics": dict(self.numerics),
            "experiment": dict(self.experiment),
            "seed": self.seed,
            "out": self.out,
        }

    @classmethod
    def load(cls, path) -> RunConfig:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        try:
            return cls.from_dict(data)
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    @classmethod
    def default(cls) -> RunConfig:
        return cls.from_dict({"model": DEFAULT_MODEL})

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def seed_sequence(master: int, name: str, index: int = 0) -> np.random.SeedSequence:
    """Child seed for the stream ``(name, index)`` of a 64-bit master seed."""
    return np.random.SeedSequence(master, spawn_key=(zlib.crc32(name.encode()), index))


def stream(master: int, name: str, index: int = 0) -> np.random.Generator:
    """Independent Generator for one purpose or replica."""
    return np.random.default_rng(seed_sequence(master, name, index))


# ------------------------------------------------------------------ artifacts


def write_csv(path, header, columns) -> Path:
    """Columns of equal length as CSV with 12 significant digits and LF endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, fmt=CSV_FMT, delimiter=",", newline="\n")
    return path


def read_csv(path) -> tuple[list, np.ndarray]:
    path = Path(path)
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed CSV ({exc})") from None
    return header, data


def write_cdf(path, f: GridCDF, name: str = "F") -> Path:
    return write_csv(path, ["x", name], [f.x, f.values])


def read_cdf(path) -> GridCDF:
    """Two-column (x, F) CSV on a uniform grid."""
    _, data = read_csv(path)
    if data.shape[1] < 2 or data.shape[0] < 2:
        raise ConfigError(f"{path}: expected at least two rows of (x, F)")
    x, F = data[:, 0], data[:, 1]
    dx = np.diff(x)
    h = (x[-1] - x[0]) / (x.size - 1)
    if not h > 0 or np.max(np.abs(dx - h)) > 1e-6 * max(1.0, abs(h)) + 1e-9:
        raise ConfigError(f"{path}: x column is not a uniform increasing grid")
    try:
        return GridCDF(float(x[0]), float(x[-1]), F)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def write_positions(path, positions) -> Path:
    return write_csv(path, ["position"], [positions])


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
