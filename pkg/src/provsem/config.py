"""Pipeline configuration: one JSON document, validated into dataclasses."""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .artifacts import config_hash
from .errors import ConfigError

CONFIG_VERSION = 1


@dataclass
class NormalizeSection:
    temp_extensions: list[str] = field(default_factory=lambda: [".tmp", ".temp", ".swp", ".swx"])
    benign_sample: int | None = None
    seed: int = 0
    max_failure_rate: float = 0.01


@dataclass
class ExplainSection:
    provider: str = "template"  # "template" | "remote"
    model_id: str = "gpt-4o"
    base_url: str = "https://api.openai.com/v1"
    temperature: float = 0.0
    max_tokens: int = 400
    max_workers: int = 8
    max_retries: int = 3
    seed_worked_examples: bool = True


@dataclass
class EmbedSection:
    provider: str = "local_hash"  # "local_hash" | "remote"
    model_id: str = "text-embedding-3-small"
    base_url: str = "https://api.openai.com/v1"
    width: int = 1536
    batch_size: int = 64
    max_retries: int = 3


@dataclass
class ReduceSection:
    k: int = 256
    gamma: float | None = None
    gamma_heuristic: str = "scale"  # "scale" | "median"


@dataclass
class MlpSection:
    hidden: list[int] = field(default_factory=lambda: [128, 64])
    epochs: int = 50
    learning_rate: float = 1e-3
    batch_size: int = 64
    validation_fraction: float = 0.1


@dataclass
class GbdtSection:
    max_depth: int = 3
    n_rounds: int = 200
    learning_rate: float = 0.1
    max_bins: int = 64


@dataclass
class OutlierSection:
    scorers: list[str] = field(default_factory=lambda: ["knn_max", "knn_mean", "lof", "hbos"])
    knn_k: int = 5
    lof_k: int = 10
    hbos_bins: int = 10
    hbos_max_dims: int = 32


@dataclass
class DetectSection:
    mlp: MlpSection = field(default_factory=MlpSection)
    gbdt: GbdtSection = field(default_factory=GbdtSection)
    # None: fixed config; "default": the built-in grid; or an explicit {param: [values]} mapping
    grid: typing.Any = None
    outliers: OutlierSection = field(default_factory=OutlierSection)


@dataclass
class EvaluateSection:
    modes: list[str] = field(default_factory=lambda: ["supervised_mlp", "supervised_gbdt", "semisupervised_xgbod", "unseen_attack"])
    train_fraction: float = 0.8
    seed: int = 0
    unseen_scenario: str | None = "CVE-2021-44228"
    unseen_test_size: int = 500


@dataclass
class AuditSection:
    per_label: int | None = 500
    seed: int = 0
    tolerance: float = 0.05


@dataclass
class PipelineConfig:
    version: int = CONFIG_VERSION
    inputs: list[str] = field(default_factory=list)
    output_dir: str = "out"
    cache_dir: str | None = None
    normalize: NormalizeSection = field(default_factory=NormalizeSection)
    explain: ExplainSection = field(default_factory=ExplainSection)
    embed: EmbedSection = field(default_factory=EmbedSection)
    reduce: ReduceSection = field(default_factory=ReduceSection)
    detect: DetectSection = field(default_factory=DetectSection)
    evaluate: EvaluateSection = field(default_factory=EvaluateSection)
    audit: AuditSection = field(default_factory=AuditSection)
    base_dir: str = field(default=".", metadata={"internal": True})

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    def section_hash(self, *names: str) -> str:
        d = self.to_dict()
        return config_hash({n: d[n] for n in names})

    @property
    def hash(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("cache_dir")
        return config_hash(d)

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path


_CHOICES = {
    "explain.provider": ("template", "remote"),
    "embed.provider": ("local_hash", "remote"),
    "reduce.gamma_heuristic": ("scale", "median"),
}


def _check_type(value, hint, where):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if hint is typing.Any:
        return value
    if origin in (typing.Union, getattr(__import__("types"), "UnionType", None)):
        if value is None and type(None) in args:
            return None
        for a in args:
            if a is type(None):
                continue
            try:
                return _check_type(value, a, where)
            except ConfigError:
                pass
        raise ConfigError(f"{where}: expected {hint}, got {value!r}")
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {type(value).__name__}")
        return [_check_type(v, args[0], f"{where}[{i}]") for i, v in enumerate(value)]
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint in (str, bool):
        if not isinstance(value, hint):
            raise ConfigError(f"{where}: expected {hint.__name__}, got {value!r}")
        return value
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, where)
    return value


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if not f.metadata.get("internal")}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}: unknown key")
    kwargs = {k: _check_type(v, hints[k], f"{where}.{k}") for k, v in data.items()}
    return cls(**kwargs)


def parse_config(data: dict, base_dir: str | Path = ".") -> PipelineConfig:
    cfg = _build(PipelineConfig, data, "config")
    if cfg.version != CONFIG_VERSION:
        raise ConfigError(f"config.version: unsupported version {cfg.version}")
    for path, allowed in _CHOICES.items():
        sec, key = path.split(".")
        value = getattr(getattr(cfg, sec), key)
        if value not in allowed:
            raise ConfigError(f"config.{path}: {value!r} is not one of {allowed}")
    grid = cfg.detect.grid
    if grid is not None and grid != "default" and not (
        isinstance(grid, dict) and all(isinstance(v, list) and v for v in grid.values())
    ):
        raise ConfigError("config.detect.grid: expected null, \"default\" or {param: [values]}")
    if not 0 < cfg.evaluate.train_fraction < 1:
        raise ConfigError("config.evaluate.train_fraction: must lie in (0, 1)")
    cfg.base_dir = str(base_dir)
    return cfg


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} at line {exc.lineno}") from None
    return parse_config(data, path.parent)
