"""Experiment configuration: a flat ``key = value`` file plus overrides.

Example::

    # n=3 attack run
    n_qubits = 3
    samples_per_class = 3600
    pqc_layers = 1..5
    coupling = linear
    base_seed = 7
    output_dir = runs/n3

``QFP_SEED`` in the environment replaces ``base_seed`` from the file; explicit
``key=value`` overrides on the command line win over both.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .fingerprint import REGISTRY_VERSION
from .transpiler import CouplingMap

DEFENSE_MODES = ("off", "on", "both")
_SECTION = "qfp"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n_qubits: int = 3
    samples_per_class: int = 3600
    pqc_layers: tuple[int, int] = (1, 5)
    coupling: str = "linear"
    base_seed: int = 0
    defense: str = "off"
    output_dir: str = "runs/default"
    epochs: int = 100
    batch_size: int = 200
    learning_rate: float = 1e-3
    hidden: tuple[int, ...] = (25, 10)
    registry_version: int = REGISTRY_VERSION
    workers: int = 1
    defense_samples_per_class: int = 800
    defense_pqc_layers: int = 5
    plots: bool = True
    baseline_barrier: bool = False

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ConfigError("n_qubits must be at least 2 (entangling PQCs need two qubits)")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be non-negative")
        if self.samples_per_class < 25:
            raise ConfigError("samples_per_class must be at least 25")
        lo, hi = self.pqc_layers
        if not 1 <= lo <= hi:
            raise ConfigError(f"pqc_layers range {lo}..{hi} is empty or starts below 1")
        try:
            CouplingMap.preset(self.coupling, self.n_qubits)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.defense not in DEFENSE_MODES:
            raise ConfigError(f"defense must be one of {', '.join(DEFENSE_MODES)}, got {self.defense!r}")
        if self.registry_version != REGISTRY_VERSION:
            raise ConfigError(
                f"registry_version {self.registry_version} is not supported (this build has {REGISTRY_VERSION})"
            )
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ConfigError("epochs, batch_size and learning_rate must be positive")
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigError("hidden must list at least one positive layer width")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0 (0 means one per CPU)")
        if self.defense_samples_per_class < 5 or self.defense_pqc_layers < 1:
            raise ConfigError("defense_samples_per_class must be >= 5 and defense_pqc_layers >= 1")

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @property
    def n_workers(self) -> int:
        return self.workers or os.cpu_count() or 1

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def dataset_fields(self) -> dict:
        """The fields that determine the generated dataset, and nothing else."""
        return {
            "n_qubits": self.n_qubits,
            "samples_per_class": self.samples_per_class,
            "pqc_layers": list(self.pqc_layers),
            "coupling": self.coupling,
            "base_seed": self.base_seed,
            "registry_version": self.registry_version,
            "baseline_barrier": self.baseline_barrier,
        }

    def dataset_hash(self) -> str:
        blob = json.dumps(self.dataset_fields(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_text(self) -> str:
        return "".join(f"{k} = {_format(k, v)}\n" for k, v in dataclasses.asdict(self).items())


def _format(key: str, value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if key == "pqc_layers":
        return f"{value[0]}..{value[1]}"
    if isinstance(value, tuple):
        return ",".join(map(str, value))
    return str(value)


def _parse_range(text: str) -> tuple[int, int]:
    for sep in ("..", "-", ","):
        if sep in text:
            lo, hi = text.split(sep, 1)
            return int(lo), int(hi)
    return int(text), int(text)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_PARSERS = {
    "n_qubits": int,
    "samples_per_class": int,
    "pqc_layers": _parse_range,
    "coupling": str.strip,
    "base_seed": int,
    "defense": lambda s: s.strip().lower(),
    "output_dir": str.strip,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "hidden": lambda s: tuple(int(x) for x in s.replace(" ", "").split(",") if x),
    "registry_version": int,
    "workers": int,
    "defense_samples_per_class": int,
    "defense_pqc_layers": int,
    "plots": _parse_bool,
    "baseline_barrier": _parse_bool,
}


def parse_pairs(pairs: Mapping[str, str], origin: str = "config") -> dict:
    parsed = {}
    for key, raw in pairs.items():
        key = key.strip().lower()
        if key not in _PARSERS:
            raise ConfigError(f"{origin}: unknown key {key!r}")
        try:
            parsed[key] = _PARSERS[key](raw.strip())
        except ValueError as exc:
            raise ConfigError(f"{origin}: bad value for {key}: {exc}") from None
    return parsed


def parse_text(text: str, origin: str = "config") -> dict:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{_SECTION}]\n{text}", source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    return parse_pairs(dict(cp[_SECTION]), origin)


def parse_overrides(items: Iterable[str]) -> dict:
    pairs = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        pairs[key] = value
    return parse_pairs(pairs, "override")


def load_config(
    path: str | Path | None = None,
    overrides: Iterable[str] = (),
    env: Mapping[str, str] | None = None,
) -> ExperimentConfig:
    env = os.environ if env is None else env
    values = {}
    if path is not None:
        values.update(parse_text(Path(path).read_text(), str(path)))
    if env.get("QFP_SEED", "").strip():
        values.update(parse_pairs({"base_seed": env["QFP_SEED"]}, "QFP_SEED"))
    values.update(parse_overrides(overrides))
    return ExperimentConfig(**values)
