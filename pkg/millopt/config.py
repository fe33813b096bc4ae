import dataclasses
import hashlib
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, get_type_hints

import yaml

from .errors import ConfigError, SpecError
from .models import FAMILY_DEFAULTS, UNIMPLEMENTED_FAMILIES, RegressorSpec
from .optimize import DeSettings, GaSettings, MethodSpec, OptimizerConfig, PsoSettings

log = logging.getLogger(__name__)

# Keys that affect how a run executes but never what it produces
_EXECUTION_ONLY = ("output_dir", "workers", "log_level")


@dataclass
class DataConfig:
    source: str = "synthetic"  # synthetic | csv
    csv_path: Optional[str] = None
    schema_path: Optional[str] = None
    target_name: str = "throughput"
    n: int = 2000
    synthetic_seed: int = 7
    noise_std: float = 20.0
    stats_bins: int = 20


@dataclass
class CleaningConfig:
    enabled: bool = True


@dataclass
class CvConfig:
    k: int = 10
    seed: Optional[int] = None  # None -> master seed
    mape_epsilon: Optional[float] = None


@dataclass
class RosterEntry:
    name: str
    family: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def to_spec(self) -> RegressorSpec:
        return RegressorSpec(self.family, self.hyperparameters, self.seed)


@dataclass
class RankingConfig:
    metric: str = "pearson_r"


@dataclass
class SelectionConfig:
    pinned: Optional[str] = None  # roster name that overrides the rank winner
    best_of_refits: int = 5
    holdout: float = 0.2


@dataclass
class LofConfig:
    enabled: bool = True
    k: int = 20
    contamination: float = 0.01
    threshold: Optional[float] = None
    min_improvement: float = 0.01


@dataclass
class RfeConfig:
    enabled: bool = True
    trainer: Optional[str] = None  # roster name; None -> the selected model
    k: Optional[int] = None  # fixed K; None -> sweep k_min..k_max
    k_min: int = 10
    k_max: Optional[int] = None
    n_repeats: int = 5
    holdout: float = 0.2


@dataclass
class MethodConfig:
    name: str
    kind: str  # de | ga | pso | uniform | lhs
    population: int = 25
    generations: int = 50
    boundary: str = "clip"
    n_samples: int = 1250
    batch: int = 25
    de: dict = field(default_factory=dict)
    ga: dict = field(default_factory=dict)
    pso: dict = field(default_factory=dict)

    def to_spec(self) -> MethodSpec:
        optimizer = None
        if self.kind in ("de", "ga", "pso"):
            try:
                optimizer = OptimizerConfig(
                    algorithm=self.kind,
                    population=self.population,
                    generations=self.generations,
                    boundary=self.boundary,
                    de=DeSettings(**self.de),
                    ga=GaSettings(**self.ga),
                    pso=PsoSettings(**self.pso),
                )
            except TypeError as e:
                raise ConfigError(f"campaign.methods.{self.name}", str(e)) from e
        return MethodSpec(name=self.name, kind=self.kind, optimizer=optimizer,
                          n_samples=self.n_samples, batch=self.batch)


def _default_roster() -> list:
    return [RosterEntry(name=family, family=family) for family in FAMILY_DEFAULTS]


def _default_methods() -> list:
    return [
        MethodConfig(name="de", kind="de"),
        MethodConfig(name="ga", kind="ga"),
        MethodConfig(name="pso", kind="pso"),
        MethodConfig(name="urs", kind="uniform"),
        MethodConfig(name="lhc", kind="lhs"),
    ]


@dataclass
class CampaignConfig:
    enabled: bool = True
    runs: int = 10
    methods: list = field(default_factory=_default_methods)

    def method_specs(self) -> list:
        return [m.to_spec() for m in self.methods]


@dataclass
class PipelineConfig:
    seed: int = 7
    output_dir: str = "output"
    workers: int = 1
    log_level: str = "INFO"
    data: DataConfig = field(default_factory=DataConfig)
    cleaning: CleaningConfig = field(default_factory=CleaningConfig)
    cv: CvConfig = field(default_factory=CvConfig)
    roster: list = field(default_factory=_default_roster)
    ranking: RankingConfig = field(default_factory=RankingConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    lof: LofConfig = field(default_factory=LofConfig)
    rfe: RfeConfig = field(default_factory=RfeConfig)
    campaign: CampaignConfig = field(default_factory=CampaignConfig)

    @property
    def cv_seed(self) -> int:
        return self.seed if self.cv.seed is None else self.cv.seed

    def roster_entry(self, name: str) -> RosterEntry:
        for entry in self.roster:
            if entry.name == name:
                return entry
        raise ConfigError("roster", f"no roster entry named '{name}'")

    def roster_specs(self) -> dict:
        return {entry.name: entry.to_spec() for entry in self.roster}


# list-valued fields and the dataclass of their items
_LIST_ITEMS = {
    (PipelineConfig, "roster"): RosterEntry,
    (CampaignConfig, "methods"): MethodConfig,
}


def _build(cls, raw: Any, path: str):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(path or "<root>", f"expected a mapping, got {type(raw).__name__}")
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        key = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(key, "unknown key")
    kwargs = {}
    for name, value in raw.items():
        key = f"{path}.{name}" if path else name
        hint = hints[name]
        if (cls, name) in _LIST_ITEMS:
            if not isinstance(value, list):
                raise ConfigError(key, "expected a list")
            item_cls = _LIST_ITEMS[(cls, name)]
            kwargs[name] = [_build(item_cls, item, f"{key}[{i}]") for i, item in enumerate(value)]
        elif dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value, key)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(path or "<root>", str(e)) from e


def _validate(config: PipelineConfig) -> PipelineConfig:
    if config.data.source not in ("synthetic", "csv"):
        raise ConfigError("data.source", "must be 'synthetic' or 'csv'")
    if config.data.source == "csv" and not (config.data.csv_path and config.data.schema_path):
        raise ConfigError("data.csv_path", "csv sources need csv_path and schema_path")
    if config.workers < 1:
        raise ConfigError("workers", "must be >= 1")
    if config.cv.k < 2:
        raise ConfigError("cv.k", "must be >= 2")
    if not config.roster:
        raise ConfigError("roster", "at least one model is required")
    seen = set()
    for i, entry in enumerate(config.roster):
        key = f"roster[{i}]"
        if entry.name in seen:
            raise ConfigError(f"{key}.name", f"duplicate roster name '{entry.name}'")
        seen.add(entry.name)
        if entry.family in UNIMPLEMENTED_FAMILIES:
            raise ConfigError(f"{key}.family",
                              f"'{entry.family}' is an unimplemented roster entry: "
                              f"{UNIMPLEMENTED_FAMILIES[entry.family]}")
        try:
            entry.to_spec()
        except SpecError as e:
            raise ConfigError(f"{key}.{e.key or 'family'}", str(e)) from e
    if config.selection.pinned is not None and config.selection.pinned not in seen:
        raise ConfigError("selection.pinned", f"'{config.selection.pinned}' is not in the roster")
    if config.rfe.trainer is not None and config.rfe.trainer not in seen:
        raise ConfigError("rfe.trainer", f"'{config.rfe.trainer}' is not in the roster")
    if config.selection.best_of_refits < 1:
        raise ConfigError("selection.best_of_refits", "must be >= 1")
    if config.campaign.enabled:
        config.campaign.method_specs()
    return config


def _env_overrides() -> dict:
    overrides = {}
    if os.environ.get("MILLOPT_SEED"):
        overrides["seed"] = os.environ["MILLOPT_SEED"]
    if os.environ.get("MILLOPT_OUTPUT_DIR"):
        overrides["output_dir"] = os.environ["MILLOPT_OUTPUT_DIR"]
    if os.environ.get("MILLOPT_WORKERS"):
        overrides["workers"] = os.environ["MILLOPT_WORKERS"]
    if os.environ.get("LOG_LEVEL"):
        overrides["log_level"] = os.environ["LOG_LEVEL"]
    return overrides


def _apply_overrides(config: PipelineConfig, overrides: dict) -> None:
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("seed", "workers"):
            try:
                value = int(value)
            except (TypeError, ValueError):
                raise ConfigError(key, f"expected an integer, got {value!r}")
        elif key == "output_dir":
            value = str(value)
        elif key == "log_level":
            value = str(value).upper()
        else:
            raise ConfigError(key, "not an overridable key")
        setattr(config, key, value)


def config_from_dict(raw: Optional[dict]) -> PipelineConfig:
    return _validate(_build(PipelineConfig, raw, ""))


def load_config(path=None, overrides: Optional[dict] = None) -> PipelineConfig:
    """File values, then MILLOPT_* / LOG_LEVEL environment variables, then `overrides`."""
    raw = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except FileNotFoundError:
            raise ConfigError("<file>", f"config file not found: {path}")
        except yaml.YAMLError as e:
            raise ConfigError("<file>", f"invalid YAML: {e}") from e
    config = _build(PipelineConfig, raw, "")
    _apply_overrides(config, _env_overrides())
    _apply_overrides(config, overrides or {})
    return _validate(config)


def config_to_dict(config: PipelineConfig) -> dict:
    return dataclasses.asdict(config)


def dump_config(config: PipelineConfig, path=None) -> str:
    text = yaml.safe_dump(config_to_dict(config), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text


def config_hash(config: PipelineConfig) -> str:
    """SHA-256 over the canonical YAML of everything that shapes the artifacts."""
    content = config_to_dict(config)
    for key in _EXECUTION_ONLY:
        content.pop(key, None)
    canonical = yaml.safe_dump(content, sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()
