"""Run configuration: defaults, flat ``key = value`` files and command-line overrides.

Precedence is built-in defaults, then the config file, then explicit flags.
A manifest written by ``RunConfig.to_manifest`` is itself a valid config file.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

from .bench import DEFAULT_METHODS, BenchConfig
from .boost import BoostConfig
from .catalog import get_preset
from .models import Aggregation, CauseRule, ColumnSchema, Method, RmseScope, SplitRule
from .tree import StoppingRule, TreeConfig
from .utils import ConfigurationError, parse_cause_rule, parse_name_list

COMMANDS = ("fit", "predict", "curves", "bench")
NONE_TOKENS = frozenset({"none", "null", ""})
TRUE_TOKENS = frozenset({"true", "yes", "1", "on"})
FALSE_TOKENS = frozenset({"false", "no", "0", "off"})


def _enum_parser(enum: type, label: str) -> Callable[[str], Any]:
    def parse(text: str) -> Any:
        try:
            return enum(text.strip())
        except ValueError:
            valid = ", ".join(member.value for member in enum)
            raise ConfigurationError(f"Unknown {label} {text!r}; valid: {valid}") from None

    return parse


def _enum_list_parser(enum: type, label: str) -> Callable[[str], tuple[Any, ...]]:
    single = _enum_parser(enum, label)

    def parse(text: str) -> tuple[Any, ...]:
        return tuple(single(part) for part in parse_name_list(text))

    return parse


def _int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigurationError(f"Expected an integer, got {text!r}") from None


def _optional_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in NONE_TOKENS else _int(text)


def _float(text: str) -> float:
    try:
        value = float(text.strip())
    except ValueError:
        raise ConfigurationError(f"Expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigurationError(f"Expected a finite number, got {text!r}")
    return value


def _bool(text: str) -> bool:
    token = text.strip().lower()
    if token in TRUE_TOKENS:
        return True
    if token in FALSE_TOKENS:
        return False
    raise ConfigurationError(f"Expected true or false, got {text!r}")


def _optional_str(text: str) -> Optional[str]:
    stripped = text.strip()
    return None if stripped.lower() in NONE_TOKENS else stripped


def _optional_names(text: str) -> Optional[tuple[str, ...]]:
    return None if text.strip().lower() in NONE_TOKENS else parse_name_list(text)


FIELD_PARSERS: dict[str, Callable[[str], Any]] = {
    "data": _optional_str,
    "sheet": _optional_str,
    "preset": _optional_str,
    "time_col": _optional_str,
    "status_col": _optional_str,
    "cause_col": _optional_str,
    "covariates": _optional_names,
    "auxiliary": parse_name_list,
    "cause_rule": _optional_str,
    "time_unit": str.strip,
    "method": _enum_parser(Method, "method"),
    "methods": _enum_list_parser(Method, "method"),
    "aggregation": _enum_parser(Aggregation, "aggregation"),
    "aggregations": _enum_list_parser(Aggregation, "aggregation"),
    "ntree": _int,
    "iterations": _int,
    "mtry": _optional_int,
    "d0": _int,
    "min_child_events": _optional_int,
    "max_depth": _optional_int,
    "tolerance": _float,
    "esf_cutpoints": _int,
    "split_rule": _enum_parser(SplitRule, "split rule"),
    "seed": _int,
    "cause": _optional_str,
    "all_causes": _bool,
    "scope": _enum_parser(RmseScope, "RMSE scope"),
    "test_fraction": _float,
    "stratify": _bool,
    "profile": _optional_str,
    "model": _optional_str,
    "input": _optional_str,
    "out": str.strip,
    "threads": _optional_int,
}


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of one command invocation."""

    command: str
    data: Optional[str] = None
    sheet: Optional[str] = None
    preset: Optional[str] = None
    time_col: Optional[str] = None
    status_col: Optional[str] = None
    cause_col: Optional[str] = None
    covariates: Optional[tuple[str, ...]] = None
    auxiliary: tuple[str, ...] = ()
    cause_rule: Optional[str] = None
    time_unit: str = ""
    method: Method = Method.ADA_ESF
    methods: tuple[Method, ...] = DEFAULT_METHODS
    aggregation: Aggregation = Aggregation.MEAN_OF_MODE
    aggregations: tuple[Aggregation, ...] = (Aggregation.MEAN_OF_MODE,)
    ntree: int = 10
    iterations: int = 10
    mtry: Optional[int] = None
    d0: int = 15
    min_child_events: Optional[int] = None
    max_depth: Optional[int] = None
    tolerance: float = 0.5
    esf_cutpoints: int = 1
    split_rule: SplitRule = SplitRule.LOGRANK
    seed: int = 0
    cause: Optional[str] = None
    all_causes: bool = False
    scope: RmseScope = RmseScope.EVENTS_ONLY
    test_fraction: float = 0.3
    stratify: bool = False
    profile: Optional[str] = None
    model: Optional[str] = None
    input: Optional[str] = None
    out: str = "."
    threads: Optional[int] = None

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigurationError(f"Unknown command {self.command!r}; valid: {', '.join(COMMANDS)}")
        for name in ("ntree", "iterations", "d0", "esf_cutpoints"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be at least 1: {getattr(self, name)}")
        if not self.tolerance > 0:
            raise ConfigurationError(f"tolerance must be positive: {self.tolerance}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigurationError(f"test_fraction must lie in (0, 1): {self.test_fraction}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer: {self.seed}")
        if self.threads is not None and self.threads < 1:
            raise ConfigurationError(f"threads must be at least 1: {self.threads}")
        if self.cause is not None and self.all_causes:
            raise ConfigurationError("Use either cause or all_causes, not both")
        if not self.methods:
            raise ConfigurationError(f"At least one method is required; valid: {', '.join(m.value for m in Method)}")
        if not self.aggregations:
            valid = ", ".join(item.value for item in Aggregation)
            raise ConfigurationError(f"At least one aggregation is required; valid: {valid}")

    @property
    def n_jobs(self) -> int:
        return self.threads or os.cpu_count() or 1

    def dataset_schema(self) -> tuple[ColumnSchema, Optional[CauseRule], str]:
        """Column schema, cause rule and dataset name from the preset or explicit columns."""
        if self.preset:
            preset = get_preset(self.preset)
            rule = parse_cause_rule(self.cause_rule) if self.cause_rule else preset.cause_rule
            return preset.schema, rule, preset.name
        if not self.time_col or not self.status_col:
            raise ConfigurationError("Dataset schema needs --preset or both --time-col and --status-col")
        schema = ColumnSchema(
            time=self.time_col,
            status=self.status_col,
            cause=self.cause_col,
            covariates=self.covariates,
            auxiliary=self.auxiliary,
            time_unit=self.time_unit,
        )
        rule = parse_cause_rule(self.cause_rule) if self.cause_rule else None
        if rule is not None and self.cause_col:
            raise ConfigurationError("Use either a cause column or a cause rule, not both")
        name = Path(self.data).stem if self.data else ""
        return schema, rule, name

    def tree_config(self) -> TreeConfig:
        return TreeConfig(
            stopping=StoppingRule(d0=self.d0, max_depth=self.max_depth, min_child_events=self.min_child_events),
            mtry=self.mtry,
            esf_cutpoints=self.esf_cutpoints,
            split_rule=self.split_rule,
        )

    def boost_config(self) -> BoostConfig:
        return BoostConfig(
            iterations=self.iterations,
            ntree=self.ntree,
            tolerance=self.tolerance,
            variation=self.method if self.method.boosted else Method.ADA_ESF,
            aggregation=self.aggregation,
            seed=self.seed,
            tree=self.tree_config(),
            n_jobs=self.n_jobs,
        )

    def bench_config(self, cause: Optional[int]) -> BenchConfig:
        return BenchConfig(
            methods=self.methods,
            aggregations=self.aggregations,
            iterations=self.iterations,
            ntree=self.ntree,
            tolerance=self.tolerance,
            tree=self.tree_config(),
            seed=self.seed,
            test_fraction=self.test_fraction,
            stratify=self.stratify,
            cause=cause,
            scope=self.scope,
            profile=parse_profile(self.profile) if self.profile not in (None, "mean") else None,
            n_jobs=self.n_jobs,
        )

    def to_manifest(self) -> str:
        """Config-file text that resolves back to this configuration."""
        lines = [f"# survival-boost {self.command} manifest"]
        for item in fields(self):
            if item.name in ("command", "threads"):
                continue
            lines.append(f"{item.name} = {_manifest_value(getattr(self, item.name))}")
        return "\n".join(lines) + "\n"


def _manifest_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_manifest_value(item) for item in value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def parse_profile(text: str) -> tuple[float, ...]:
    """Comma separated covariate values."""
    try:
        values = tuple(float(part) for part in parse_name_list(text))
    except ValueError:
        raise ConfigurationError(f"Profile must be 'mean', 'km-only' or comma separated numbers: {text!r}") from None
    if not values:
        raise ConfigurationError("Profile is empty")
    return values


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment line, keys may use dashes."""
    source = Path(path)
    if not source.is_file():
        raise FileNotFoundError(f"Config file not found: {source}")
    values: dict[str, str] = {}
    for number, raw in enumerate(source.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, separator, value = line.partition("=")
        if not separator:
            raise ConfigurationError(f"Config line {number} is not 'key = value': {raw!r}")
        key = key.strip().replace("-", "_")
        if key not in FIELD_PARSERS:
            raise ConfigurationError(f"Unknown config key {key!r} (line {number})")
        if key in values:
            raise ConfigurationError(f"Config key {key!r} repeated (line {number})")
        values[key] = value.strip()
    return values


def resolve_config(
    command: str,
    file_values: Mapping[str, str],
    flag_values: Mapping[str, Optional[str]],
) -> RunConfig:
    """Merge file text and flag text over the defaults."""
    resolved: dict[str, Any] = {}
    for source in (file_values, flag_values):
        for key, text in source.items():
            if text is None:
                continue
            if key not in FIELD_PARSERS:
                raise ConfigurationError(f"Unknown setting {key!r}")
            resolved[key] = FIELD_PARSERS[key](text)
    return RunConfig(command=command, **resolved)
