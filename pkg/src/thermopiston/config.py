"""Run configuration: JSON file, defaults, and dotted-path overrides."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

from .core_model import (
    DEFAULT_ALPHA,
    DEFAULT_KAPPA,
    DEFAULT_OMEGA,
    DEFAULT_STIFFNESS,
    DEFAULT_T_REF,
    HBAR,
    K_BOLTZMANN,
    BathParams,
    LinearDrive,
    OscillatorParams,
)
from .errors import ThermoPistonError
from .langevin import CoolingParams, default_regime


class ConfigError(ThermoPistonError, ValueError):
    """Invalid configuration file or override; carries the offending path."""


DEFAULTS = {
    "oscillator": {"stiffness": DEFAULT_STIFFNESS, "omega": DEFAULT_OMEGA},
    "constants": {"hbar": HBAR, "k_boltzmann": K_BOLTZMANN},
    "drive": {"kappa": DEFAULT_KAPPA, "alpha": DEFAULT_ALPHA, "t_ref": DEFAULT_T_REF},
    # null gamma_m / gamma_l pick the default cooling regime for the oscillator
    "bath": {"t": 200.0, "gamma_m": None},
    "cooling": {"gamma_l": None},
    "sweep": {"t_min": 80.0, "t_max": 120.0, "n_points": 81},
    "simulation": {
        "n_traj": 10_000,
        "dt": None,
        "t_final": None,
        "seed": 42,
        "sample_every": 4,
        "workers": 1,
        "noise_scale": 1.0,
        "method": "exact",
    },
    "output": {"path": "out", "format": "csv"},
    "validate": {"corrupt": False},
}

_OPTIONAL_SECTIONS = {"cooling"}


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"{where}: unknown field")
        if isinstance(base[key], dict):
            if value is None and key in _OPTIONAL_SECTIONS:
                out[key] = None
                continue
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected an object")
            if key == "oscillator":
                out[key] = _merge_oscillator(value, where)
            else:
                out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def _merge_oscillator(value, where):
    allowed = {"mass", "stiffness", "omega"}
    for key in value:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}: unknown field")
    if "mass" in value and "stiffness" in value:
        raise ConfigError(f"{where}: give either mass or stiffness, not both")
    out = {"omega": value.get("omega", DEFAULT_OMEGA)}
    if "mass" in value:
        out["mass"] = value["mass"]
    else:
        out["stiffness"] = value.get("stiffness", DEFAULT_STIFFNESS)
    return out


def _number(section, key, value, *, positive=False, integer=False, allow_none=False):
    where = f"{section}.{key}"
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    if positive and value <= 0:
        raise ConfigError(f"{where}: must be > 0, got {value!r}")
    return int(value) if integer else float(value)


@dataclass(frozen=True)
class SweepConfig:
    t_min: float
    t_max: float
    n_points: int


@dataclass(frozen=True)
class SimulationConfig:
    n_traj: int
    dt: float | None
    t_final: float | None
    seed: int
    sample_every: int
    workers: int
    noise_scale: float
    method: str


@dataclass(frozen=True)
class RunConfig:
    osc: OscillatorParams
    drive: LinearDrive
    bath: BathParams
    cool: CoolingParams | None
    sweep: SweepConfig
    simulation: SimulationConfig
    output_path: str
    output_format: str
    corrupt: bool
    raw: dict

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be an object")
        cfg = _merge(DEFAULTS, data)
        try:
            return cls._build(cfg)
        except ConfigError:
            raise
        except ThermoPistonError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def _build(cls, cfg):
        consts = {
            "hbar": _number("constants", "hbar", cfg["constants"]["hbar"], positive=True),
            "k_boltzmann": _number("constants", "k_boltzmann", cfg["constants"]["k_boltzmann"], positive=True),
        }
        o = cfg["oscillator"]
        omega = _number("oscillator", "omega", o["omega"], positive=True)
        if "mass" in o:
            osc = OscillatorParams(_number("oscillator", "mass", o["mass"], positive=True), omega, **consts)
        else:
            osc = OscillatorParams.from_stiffness(
                _number("oscillator", "stiffness", o["stiffness"], positive=True), omega, **consts
            )

        d = cfg["drive"]
        drive = LinearDrive(
            kappa=_number("drive", "kappa", d["kappa"]),
            alpha=_number("drive", "alpha", d["alpha"], positive=True),
            t_ref=_number("drive", "t_ref", d["t_ref"], positive=True),
        )

        default_gm, default_cool = default_regime(osc)
        b = cfg["bath"]
        gamma_m = _number("bath", "gamma_m", b["gamma_m"], allow_none=True)
        bath = BathParams(
            temperature=_number("bath", "t", b["t"], positive=True),
            gamma_m=default_gm if gamma_m is None else gamma_m,
        )

        if cfg["cooling"] is None:
            cool = None
        else:
            gl = _number("cooling", "gamma_l", cfg["cooling"]["gamma_l"], positive=True, allow_none=True)
            cool = default_cool if gl is None else CoolingParams(gl)

        s = cfg["sweep"]
        sweep = SweepConfig(
            t_min=_number("sweep", "t_min", s["t_min"], positive=True),
            t_max=_number("sweep", "t_max", s["t_max"], positive=True),
            n_points=_number("sweep", "n_points", s["n_points"], integer=True),
        )
        if sweep.t_min >= sweep.t_max:
            raise ConfigError("sweep: t_min must be < t_max")
        if sweep.n_points < 2:
            raise ConfigError("sweep.n_points: must be >= 2")

        m = cfg["simulation"]
        method = m["method"]
        if method not in ("exact", "euler"):
            raise ConfigError(f"simulation.method: expected 'exact' or 'euler', got {method!r}")
        sim = SimulationConfig(
            n_traj=_number("simulation", "n_traj", m["n_traj"], positive=True, integer=True),
            dt=_number("simulation", "dt", m["dt"], positive=True, allow_none=True),
            t_final=_number("simulation", "t_final", m["t_final"], positive=True, allow_none=True),
            seed=_number("simulation", "seed", m["seed"], integer=True),
            sample_every=_number("simulation", "sample_every", m["sample_every"], positive=True, integer=True),
            workers=_number("simulation", "workers", m["workers"], positive=True, integer=True),
            noise_scale=_number("simulation", "noise_scale", m["noise_scale"]),
            method=method,
        )
        if sim.seed < 0:
            raise ConfigError("simulation.seed: must be >= 0")
        if sim.noise_scale < 0:
            raise ConfigError("simulation.noise_scale: must be >= 0")

        out = cfg["output"]
        if out["format"] != "csv":
            raise ConfigError(f"output.format: only 'csv' is supported, got {out['format']!r}")
        if not isinstance(out["path"], str) or not out["path"]:
            raise ConfigError("output.path: expected a non-empty string")
        corrupt = cfg["validate"]["corrupt"]
        if not isinstance(corrupt, bool):
            raise ConfigError("validate.corrupt: expected true or false")

        return cls(osc, drive, bath, cool, sweep, sim, out["path"], out["format"], corrupt, cfg)

    def to_dict(self) -> dict:
        """Fully resolved configuration; feeding it back reproduces ``self``."""
        sim = self.simulation
        return {
            "oscillator": {"mass": self.osc.mass, "omega": self.osc.omega},
            "constants": {"hbar": self.osc.hbar, "k_boltzmann": self.osc.k_boltzmann},
            "drive": {"kappa": self.drive.kappa, "alpha": self.drive.alpha, "t_ref": self.drive.t_ref},
            "bath": {"t": self.bath.temperature, "gamma_m": self.bath.gamma_m},
            "cooling": None if self.cool is None else {"gamma_l": self.cool.gamma_l},
            "sweep": {"t_min": self.sweep.t_min, "t_max": self.sweep.t_max, "n_points": self.sweep.n_points},
            "simulation": {
                "n_traj": sim.n_traj, "dt": sim.dt, "t_final": sim.t_final, "seed": sim.seed,
                "sample_every": sim.sample_every, "workers": sim.workers,
                "noise_scale": sim.noise_scale, "method": sim.method,
            },
            "output": {"path": self.output_path, "format": self.output_format},
            "validate": {"corrupt": self.corrupt},
        }

    def equivalent(self, other: "RunConfig") -> bool:
        return self.to_dict() == other.to_dict()


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def apply_override(data: dict, dotted: str, value) -> dict:
    """Set ``data[a][b] = value`` for ``dotted == "a.b"``, creating sections."""
    parts = dotted.split(".")
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"--{dotted}: overrides must look like --section.field")
    section, key = parts
    out = copy.deepcopy(data)
    target = out.setdefault(section, {})
    if target is None:
        target = out[section] = {}
    if not isinstance(target, dict):
        raise ConfigError(f"{section}: expected an object")
    target[key] = value
    return out


def parse_value(text: str):
    """JSON literal if it parses (numbers, true/false/null), else the string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text
