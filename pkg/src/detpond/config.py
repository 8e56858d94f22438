"""Experiment configuration: one JSON document drives every command.

The rain program may be inline (an object), a path relative to the config
file, or "builtin:<name>" for a program shipped with the package. All
randomness used by the CLI derives from the single `seed` here.
"""

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .control import ValveTable, default_valve_table
from .env import PondParams, pond_model
from .errors import ConfigError
from .learning import LearnParams
from .rain import RainProgram, load_program, program_from_dict


@dataclass
class ExperimentConfig:
    pond: PondParams
    valve: ValveTable
    program: RainProgram
    dt_min: float = 0.5
    horizon_min: float = 4320.0
    n_w: int = 150
    n_s: int = 20
    margin_m3: float = 5.0
    dry_bucket_min: float = 60.0
    rain_bucket_min: float = 0.5
    w0_cm: float = 100.0
    s0_mm: float = 0.0
    seed: int = 0
    eval_runs: int = 200
    sim_runs: int = 10
    learn: LearnParams = field(default_factory=LearnParams)


def _data_file(name):
    return resources.files("detpond.data").joinpath(name)


def _resolve_program(ref, base_dir):
    if isinstance(ref, dict):
        return program_from_dict(ref)
    if isinstance(ref, str):
        if ref.startswith("builtin:"):
            src = _data_file(ref.split(":", 1)[1] + ".json")
            try:
                text = src.read_text()
            except OSError as e:
                raise ConfigError(f"unknown builtin rain program {ref!r}") from e
            return program_from_dict(json.loads(text))
        path = Path(base_dir) / ref
        try:
            return load_program(path)
        except OSError as e:
            raise ConfigError(f"cannot read rain program {path}: {e}") from e
    raise ConfigError("rain_program must be an object, a path, or builtin:<name>")


def config_from_dict(data, base_dir="."):
    try:
        pond = PondParams(**data.get("pond", {}))
        vd = data.get("valve", {})
        if "flows_m3_per_min" in vd:
            valve = ValveTable(tuple(vd["flows_m3_per_min"]),
                               float(vd.get("period_min", 60.0)))
        else:
            valve = default_valve_table(float(vd.get("permitted_outflow_l_per_s", 95.0)),
                                        float(vd.get("period_min", 60.0)))
        program = _resolve_program(data.get("rain_program", "builtin:table1_rain"),
                                   base_dir)
        grid = data.get("grid", {})
        init = data.get("initial", {})
        learn = LearnParams(**data.get("learn", {}))
        return ExperimentConfig(
            pond=pond, valve=valve, program=program,
            dt_min=float(data.get("dt_min", 0.5)),
            horizon_min=float(data.get("horizon_min", 4320.0)),
            n_w=int(grid.get("n_w", 150)),
            n_s=int(grid.get("n_s", 20)),
            margin_m3=float(data.get("margin_m3", 5.0)),
            dry_bucket_min=float(data.get("dry_bucket_min", 60.0)),
            rain_bucket_min=float(data.get("rain_bucket_min", 10.0)),
            w0_cm=float(init.get("w0_cm", 100.0)),
            s0_mm=float(init.get("s0_mm", 0.0)),
            seed=int(data.get("seed", 0)),
            eval_runs=int(data.get("eval_runs", 200)),
            sim_runs=int(data.get("sim_runs", 10)),
            learn=learn,
        )
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"bad experiment config: {e}") from e


def load_config(path):
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return config_from_dict(data, base_dir=Path(path).parent)


def default_config():
    """The packaged calibrated pond configuration."""
    data = json.loads(_data_file("default_config.json").read_text())
    return config_from_dict(data, base_dir=".")


def build_model(cfg):
    return pond_model(cfg.pond, cfg.valve.flows_m3_per_min, cfg.program,
                      period_min=cfg.valve.period_min, dt_min=cfg.dt_min,
                      horizon_min=cfg.horizon_min)
