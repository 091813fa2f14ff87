"""Training configuration: a flat key-value file (TOML syntax, no
sections) holding exactly the TrainConfig fields. Unknown keys are
rejected so typos fail loudly instead of silently using a default."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from smarlab.errors import ConfigError
from smarlab.model import ModelConfig


@dataclass(frozen=True)
class TrainConfig:
    # model dimensions
    layers: int = 4
    experts: int = 8
    top_k: int = 2
    hidden: int = 64
    ffn_hidden: int = 128
    classes: int = 8
    # routing-distance band and loss weights
    d_min: float = 1.5
    d_max: float = 2.0
    alpha: float = 0.01
    beta: float = 0.01
    # optimization
    learning_rate: float = 0.05
    steps: int = 2000
    batch_size: int = 64
    seed: int = 0
    smar_start_step: int = 200
    # switches
    modality_bias_enabled: bool = True
    load_balance_enabled: bool = False
    # bookkeeping
    log_every: int = 50
    eval_batches: int = 20

    def __post_init__(self):
        if self.d_min < 0 or self.d_min >= self.d_max:
            raise ConfigError(f"need 0 <= d_min < d_max, got [{self.d_min}, {self.d_max}]")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.steps < 1 or self.batch_size < 2 or self.log_every < 1:
            raise ConfigError("steps >= 1, batch_size >= 2 and log_every >= 1 required")
        if self.seed < 0 or self.smar_start_step < 0 or self.eval_batches < 0:
            raise ConfigError("seed, smar_start_step and eval_batches must be >= 0")
        if self.smar_start_step > self.steps:
            raise ConfigError(
                f"smar_start_step={self.smar_start_step} exceeds steps={self.steps}"
            )
        if self.top_k > self.experts:
            raise ConfigError(f"top_k={self.top_k} exceeds experts={self.experts}")

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            layers=self.layers,
            experts=self.experts,
            top_k=self.top_k,
            hidden=self.hidden,
            ffn_hidden=self.ffn_hidden,
            classes=self.classes,
            modality_bias_enabled=self.modality_bias_enabled,
        )


_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}
_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False,
               "yes": True, "no": False}


def _convert(key: str, value):
    """Coerce a parsed or command-line value to the field's type."""
    target = _FIELDS[key].type
    if target in (bool, "bool"):
        if isinstance(value, bool):
            return value
        word = str(value).strip().lower()
        if word not in _BOOL_WORDS:
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        return _BOOL_WORDS[word]
    if target in (int, "int"):
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if target in (float, "float"):
        if isinstance(value, bool):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
    raise ConfigError(f"{key}: unsupported field type {target}")


def load_config(path=None, overrides: dict | None = None) -> TrainConfig:
    """Defaults, then the config file, then explicit overrides."""
    values: dict = {}
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        try:
            parsed = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}")
        for key, value in parsed.items():
            if key not in _FIELDS:
                raise ConfigError(f"{path}: unknown key {key!r}")
            if isinstance(value, dict):
                raise ConfigError(f"{path}: {key} must be a flat value, not a section")
            values[key] = _convert(key, value)
    for key, value in (overrides or {}).items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _convert(key, value)
    try:
        return TrainConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc))


def config_to_toml(cfg: TrainConfig) -> str:
    lines = []
    for name in _FIELDS:
        value = getattr(cfg, name)
        if isinstance(value, bool):
            lines.append(f"{name} = {'true' if value else 'false'}")
        else:
            lines.append(f"{name} = {value}")
    return "\n".join(lines) + "\n"
