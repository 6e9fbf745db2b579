"""Experiment configuration: JSON ingestion, validation, canonical hashing."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

from ._util import derive_seed


class ConfigError(ValueError):
    """Malformed or invalid configuration; message names the field path."""


@dataclass
class SpectrumConfig:
    dimension: int = 2
    truncation: int = 8
    sigma0: float = 1.0
    decay_p: float = 14.0
    projection: str = "incompressible"
    gamma_coeff: float = 1.0
    gamma_power: float = 2.0
    m: int = 3
    alpha: float = 0.5


@dataclass
class SimulationConfig:
    dt: float = 1e-3
    T: float = 10.0
    ensemble: int = 8
    record_every: int = 1
    seed: int = None  # required: no wall-clock seeding, ever


@dataclass
class ProbeConfig:
    observable: str = "bounded_lipschitz_of_norm"
    component: int = 0
    delta: float | None = None
    eps: float | None = None
    offsets: list = field(default_factory=lambda: [1.0, 0.5, 0.25, 0.125])
    horizons: list = field(default_factory=lambda: [2.5, 10.0])
    R: float = 1.0
    n: int = 1
    chain_x: list = field(default_factory=lambda: [1.0, 1.5, 2.0])
    chain_n_max: int = 12
    mc_paths: int = 20000


@dataclass
class OutputConfig:
    format: str = "csv"
    path: str | None = None


@dataclass
class ExperimentConfig:
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_SECTION_TYPES = {"spectrum": SpectrumConfig, "simulation": SimulationConfig,
                  "probe": ProbeConfig, "output": OutputConfig}

# Documented top-level shorthands for quick configs.
_SHORTHAND = {"dimension": ("spectrum", "dimension"),
              "K": ("spectrum", "truncation"),
              "seed": ("simulation", "seed")}

_SECTION_ALIASES = {("spectrum", "K"): "truncation"}


def _coerce(path: str, value, expected):
    if expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
        return value
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite")
        return value
    if expected is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    if expected is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        return [float(v) for v in value]
    return value


_FIELD_TYPES = {
    "spectrum": {"dimension": int, "truncation": int, "sigma0": float,
                 "decay_p": float, "projection": str, "gamma_coeff": float,
                 "gamma_power": float, "m": int, "alpha": float},
    "simulation": {"dt": float, "T": float, "ensemble": int,
                   "record_every": int, "seed": int},
    "probe": {"observable": str, "component": int, "delta": float,
              "eps": float, "offsets": list, "horizons": list, "R": float,
              "n": int, "chain_x": list, "chain_n_max": int, "mc_paths": int},
    "output": {"format": str, "path": str},
}

_OPTIONAL_NONE = {("probe", "delta"), ("probe", "eps"), ("output", "path")}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON config document; unknown keys are rejected."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    sections = {name: {} for name in _SECTION_TYPES}

    def assign(sec, sub, value):
        if sub in sections[sec]:
            raise ConfigError(f"{sec}.{sub} set twice")
        sections[sec][sub] = value

    for key, value in raw.items():
        if key in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected an object")
            for sub, sv in value.items():
                sub = _SECTION_ALIASES.get((key, sub), sub)
                if sub not in _FIELD_TYPES[key]:
                    raise ConfigError(f"unknown key {key}.{sub}")
                assign(key, sub, sv)
        elif key in _SHORTHAND:
            sec, sub = _SHORTHAND[key]
            assign(sec, sub, value)
        else:
            raise ConfigError(f"unknown key {key}")

    cfg = ExperimentConfig()
    for name, data in sections.items():
        target = getattr(cfg, name)
        for sub, value in data.items():
            path = f"{name}.{sub}"
            if value is None and (name, sub) in _OPTIONAL_NONE:
                setattr(target, sub, None)
                continue
            setattr(target, sub, _coerce(path, value, _FIELD_TYPES[name][sub]))
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    sp, sim, pr, out = cfg.spectrum, cfg.simulation, cfg.probe, cfg.output
    if sp.dimension < 1:
        raise ConfigError("spectrum.dimension: must be >= 1")
    if sp.truncation < 1:
        raise ConfigError("spectrum.truncation: must be >= 1")
    if sp.sigma0 <= 0:
        raise ConfigError("spectrum.sigma0: must be positive")
    if sp.gamma_coeff <= 0:
        raise ConfigError("spectrum.gamma_coeff: must be positive")
    if sp.gamma_power < 1:
        raise ConfigError("spectrum.gamma_power: must be >= 1")
    if sp.projection not in ("full", "incompressible", "potential"):
        raise ConfigError("spectrum.projection: must be full|incompressible|potential")
    if not 0 < sp.alpha < 1:
        raise ConfigError("spectrum.alpha: must lie in (0, 1)")
    if sp.m < 1:
        raise ConfigError("spectrum.m: must be >= 1")
    if sim.dt <= 0:
        raise ConfigError("simulation.dt: must be positive")
    if sim.T < sim.dt:
        raise ConfigError("simulation.T: must be >= simulation.dt")
    if sim.ensemble < 1:
        raise ConfigError("simulation.ensemble: must be >= 1")
    if sim.record_every < 1:
        raise ConfigError("simulation.record_every: must be >= 1")
    if sim.seed is None:
        raise ConfigError("simulation.seed: required (wall-clock seeding is not allowed)")
    if pr.n < 1:
        raise ConfigError("probe.n: must be >= 1")
    if pr.delta is not None and pr.delta <= 0:
        raise ConfigError("probe.delta: must be positive")
    if pr.eps is not None and pr.eps <= 0:
        raise ConfigError("probe.eps: must be positive")
    if len(pr.horizons) >= 2 and sorted(pr.horizons) != list(pr.horizons):
        raise ConfigError("probe.horizons: must be increasing")
    if out.format not in ("csv", "jsonl"):
        raise ConfigError("output.format: must be csv|jsonl")


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical JSON form: sorted keys, minimal separators."""
    return json.dumps(asdict(cfg), sort_keys=True, separators=(",", ":"))


def config_hash(cfg: ExperimentConfig) -> str:
    """64-bit hex digest of the canonical form; stable across processes."""
    digest = hashlib.blake2b(serialize_config(cfg).encode(), digest_size=8)
    return digest.hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    version: str
    master_seed: int
    run_seeds: list
    created: str

    @classmethod
    def build(cls, cfg: ExperimentConfig, version: str, n_runs: int,
              created: str) -> "RunManifest":
        master = cfg.simulation.seed
        return cls(config_hash=config_hash(cfg), version=version,
                   master_seed=master,
                   run_seeds=[derive_seed(master, i) for i in range(n_runs)],
                   created=created)

    def header_lines(self) -> list[str]:
        return [f"config_hash={self.config_hash}",
                f"version={self.version}",
                f"master_seed={self.master_seed}",
                f"run_seeds={','.join(str(s) for s in self.run_seeds)}",
                f"created={self.created}"]
