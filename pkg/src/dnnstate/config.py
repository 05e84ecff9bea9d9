"""Experiment configuration: a versioned TOML schema with strict key checking.

A config file has top-level ``schema_version`` and ``name`` plus the tables
``data``, ``net``, ``train`` and optionally ``compare``.  Any key not listed
in ``SCHEMA`` is rejected.  ``[profiles.<name>.<table>]`` tables hold
overrides that are merged on top of the base values when that profile is
selected; the base values are the paper-scale settings.
"""

import copy
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

SCHEMA_VERSION = 1
PROFILES = ("desk", "paper")

# (type, default); default None means required
SCHEMA = {
    "data": {
        "scenario": (str, None),
        "mesh_n": (int, 64),
        "sensors": (str, "uniform16"),
        "n_sensors": (int, 16),
        "sensor_seed": (int, 0),
        "mode": (str, None),
        "n_snapshots": (int, None),
        "n_ghost": (int, None),
        "energy": (float, 0.995),
        "master_seed": (int, 0),
        "sigma2": (float, 1.0),
        "nu": (float, 1.0),
        "lam1": (float, 0.2),
        "lam2": (float, 0.2),
        "a0": (float, 0.0),
        "a1": (float, 1.0),
    },
    "net": {
        "blocks": (int, 1),
        "width": (int, 20),
        "init_std": (float, 0.1),
        "new_block_init": (str, "gaussian"),
    },
    "train": {
        "optimizer": (str, "proximal_adagrad"),
        "lr": (float, None),
        "batch": (int, 100),
        "l1": (float, 1e-5),
        "steps": (int, None),
        "schedules": (list, ["expansion"]),
        "extra_steps": (int, 0),
        "record_every": (int, 100),
        "seed": (int, 0),
    },
    "compare": {
        "sensor_counts": (list, [10, 20, 30, 40, 50]),
        "n_max": (int, 0),
    },
}
TOP_LEVEL = {"schema_version", "name", "profiles", *SCHEMA}
SCENARIOS = ("pwc", "log-normal")
SENSOR_LAYOUTS = ("uniform16", "uniform49", "random")
MODES = ("H1", "L2")


def _check_table(table, values, where):
    spec = SCHEMA[table]
    if not isinstance(values, dict):
        raise ConfigError(f"{where}: expected a table")
    for key, val in values.items():
        if key not in spec:
            raise ConfigError(f"{where}: unknown key {key!r}")
        typ = spec[key][0]
        if typ is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
            values[key] = val
        if not isinstance(val, typ) or isinstance(val, bool):
            raise ConfigError(f"{where}.{key}: expected {typ.__name__}, got {type(val).__name__}")


def parse(raw, profile="desk"):
    """Validate a loaded TOML mapping and resolve ``profile``; returns a nested dict."""
    raw = copy.deepcopy(raw)
    unknown = set(raw) - TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {SCHEMA_VERSION}, got {raw.get('schema_version')!r}"
        )
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    for table in SCHEMA:
        _check_table(table, raw.get(table, {}), table)
    profiles = raw.pop("profiles", {})
    for name, tables in profiles.items():
        if name not in PROFILES:
            raise ConfigError(f"unknown profile {name!r} in [profiles]")
        for table, values in tables.items():
            if table not in SCHEMA:
                raise ConfigError(f"profiles.{name}: unknown table {table!r}")
            _check_table(table, values, f"profiles.{name}.{table}")

    cfg = {"schema_version": SCHEMA_VERSION, "name": str(raw.get("name", "")), "profile": profile}
    for table, spec in SCHEMA.items():
        merged = {k: copy.deepcopy(d) for k, (_, d) in spec.items()}
        merged.update(raw.get(table, {}))
        merged.update(profiles.get(profile, {}).get(table, {}))
        missing = [k for k, v in merged.items() if v is None]
        if missing:
            raise ConfigError(f"[{table}] missing required key(s): {', '.join(missing)}")
        cfg[table] = merged
    _check_values(cfg)
    return cfg


def _check_values(cfg):
    d, t = cfg["data"], cfg["train"]
    if d["scenario"] not in SCENARIOS:
        raise ConfigError(f"data.scenario must be one of {SCENARIOS}, got {d['scenario']!r}")
    if d["sensors"] not in SENSOR_LAYOUTS:
        raise ConfigError(f"data.sensors must be one of {SENSOR_LAYOUTS}, got {d['sensors']!r}")
    if d["mode"] not in MODES:
        raise ConfigError(f"data.mode must be one of {MODES}, got {d['mode']!r}")
    if d["sensors"] == "uniform16" and d["n_sensors"] != 16:
        raise ConfigError("data.n_sensors must be 16 for the uniform16 layout")
    if d["sensors"] == "uniform49" and d["n_sensors"] != 49:
        raise ConfigError("data.n_sensors must be 49 for the uniform49 layout")
    if d["n_sensors"] < 1:
        raise ConfigError("data.n_sensors must be positive")
    if not 0 < d["n_ghost"] < d["n_snapshots"]:
        raise ConfigError("data.n_ghost must satisfy 0 < n_ghost < n_snapshots")
    if d["mesh_n"] < 2:
        raise ConfigError("data.mesh_n must be at least 2")
    if not 0 < d["energy"] < 1:
        raise ConfigError("data.energy must lie in (0, 1)")
    if not (isinstance(d["master_seed"], int) and 0 <= d["master_seed"] < 2**64):
        raise ConfigError("data.master_seed must be an unsigned 64-bit integer")
    bad = [s for s in t["schedules"] if s not in ("global", "expansion", "expansion_plus_global")]
    if bad or not t["schedules"]:
        raise ConfigError(f"train.schedules has invalid entries {bad}")
    if t["optimizer"] not in ("proximal_adagrad", "adam"):
        raise ConfigError(f"train.optimizer {t['optimizer']!r} is not supported")
    if t["steps"] < 1 or t["batch"] < 1 or not t["lr"] > 0:
        raise ConfigError("train.steps, train.batch and train.lr must be positive")
    counts = cfg["compare"]["sensor_counts"]
    if any(not isinstance(c, int) or c < 1 for c in counts):
        raise ConfigError("compare.sensor_counts must be positive integers")


def load(path, profile="desk"):
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    return parse(raw, profile)
