"""Experiment configuration: a flat key=value file, every key overridable
from the command line, unknown keys rejected."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Bad configuration file or override."""


@dataclass
class ExperimentConfig:
    """All knobs of one experiment; defaults follow the reference setup."""

    cohort_dir: str = ""
    out_dir: str = "runs/experiment"
    scheme: str = "kfold"          # kfold | loso
    k: int = 10
    epochs: int = 300
    learning_rate: float = 0.01
    weight_decay: float = 5e-5
    dropout: float = 0.2
    cheb_order: int = 3
    n_gcn_layers: int = 4
    hidden_dim: int = 16
    pae_latent_dim: int = 128
    n_heads: int = 4
    ff_expansion: int = 4
    target_dim: int = 2400
    ridge_alpha: float = 1.0
    rfe_drop_fraction: float = 0.1
    edge_policy: str = "complete"  # complete | phenotype-match
    age_threshold: float = 2.0
    modality: str = "multimodal"
    fusion: str = "asymmetric"
    seed: int = 0
    transductive: bool = False


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _convert(name: str, raw: str):
    if name not in _FIELDS:
        raise ConfigError(f"unknown config key: {name}")
    typ = _FIELDS[name].type
    try:
        if typ == "bool" or typ is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if typ == "int" or typ is int:
            return int(raw)
        if typ == "float" or typ is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config_file(path: str | Path) -> dict:
    """Read `key = value` lines; '#' starts a comment, blanks ignored."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        values[key] = _convert(key, raw)
    return values


def apply_overrides(values: dict, overrides: list[str]) -> dict:
    """Merge `--key=value` style overrides into a parsed value dict."""
    out = dict(values)
    for item in overrides:
        token = item.lstrip("-")
        if "=" not in token:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, raw = token.split("=", 1)
        out[key.strip()] = _convert(key.strip(), raw.strip())
    return out


def build_config(path: str | Path | None = None,
                 overrides: list[str] | None = None) -> ExperimentConfig:
    values = parse_config_file(path) if path else {}
    values = apply_overrides(values, overrides or [])
    return ExperimentConfig(**values)
