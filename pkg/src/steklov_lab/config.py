"""Run configurations and the CSV/JSON writers shared by the command line."""
from dataclasses import asdict, dataclass, field
import hashlib
import json
import math
import os

import yaml

from . import __version__
from .errors import ConfigError

SUBCOMMANDS = ("spectrum", "compare", "stability", "kernel", "muntz-table")

DEFAULT_FACTOR = {"kind": "constant", "value": 1.0}


@dataclass
class RunConfig:
    subcommand: str
    factor: dict = field(default_factory=lambda: dict(DEFAULT_FACTOR))
    factor_tilde: dict = None
    n: int = 3
    omega: float = 0.0
    m_max: int = 20
    degree: int = 64
    tolerances: dict = field(default_factory=dict)
    out: str = "."
    seed: int = 0
    threads: int = 1
    stability: dict = field(default_factory=dict)
    kernel: dict = field(default_factory=dict)
    muntz: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d.pop("out")      # where results go does not change them
        d.pop("threads")
        return d

    def hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if not isinstance(self.n, int) or self.n < 2:
            raise ConfigError(f"n must be an integer >= 2, got {self.n!r}")
        if not isinstance(self.m_max, int) or self.m_max < 0:
            raise ConfigError(f"m_max must be a non-negative integer, got {self.m_max!r}")
        if not isinstance(self.factor, dict):
            raise ConfigError("factor must be a mapping with a 'kind'")
        if self.subcommand == "compare" and self.factor_tilde is None:
            raise ConfigError("compare needs factor_tilde")
        if self.subcommand == "stability":
            deltas = self.stability.get("deltas", [1e-2, 1e-3, 1e-4])
            if not isinstance(deltas, list) or len(deltas) == 0:
                raise ConfigError("stability.deltas must be a non-empty list")
            mode = self.stability.get("mode", "steklov")
            if mode not in ("steklov", "calderon"):
                raise ConfigError(f"stability.mode must be 'steklov' or 'calderon', got {mode!r}")
        return self


def load_config(path, subcommand, overrides=None):
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        try:
            raw = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
        except (json.JSONDecodeError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        raw = raw or {}
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
    raw = dict(raw)
    if raw.get("subcommand", subcommand) != subcommand:
        raise ConfigError(f"config is for {raw['subcommand']!r}, not {subcommand!r}")
    raw["subcommand"] = subcommand
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    unknown = set(raw) - set(RunConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        cfg = RunConfig(**raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(path, cfg, columns, rows, extra=None):
    """CSV with one '#'-prefixed JSON header line carrying the config hash."""
    meta = {"config_hash": cfg.hash(), "subcommand": cfg.subcommand, "version": __version__,
            "columns": list(columns)}
    if extra:
        meta.update(extra)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("#" + json.dumps(meta, sort_keys=True) + "\n")
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v) for v in r) + "\n")


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return obj


def dump_json(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=1)


def write_json(path, cfg, payload):
    body = {"config_hash": cfg.hash(), "subcommand": cfg.subcommand, "version": __version__}
    body.update(payload)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        fh.write(dump_json(body) + "\n")


def read_csv_header(path):
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise ValueError("missing metadata header")
    return json.loads(first[1:])
