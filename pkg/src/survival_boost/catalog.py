"""Column presets for the public competing-risk datasets.

Both presets expect the CSV exports described in ``samples/README.md``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .models import CauseRule, ColumnSchema
from .utils import ConfigurationError, parse_cause_rule


@dataclass(frozen=True)
class DatasetPreset:
    """Schema plus the cause derivation a dataset needs before fitting."""

    name: str
    schema: ColumnSchema
    cause_rule: Optional[CauseRule] = None
    description: str = ""


PRESETS: dict[str, DatasetPreset] = {
    "follic": DatasetPreset(
        name="follic",
        schema=ColumnSchema(
            time="dftime",
            status="status",
            covariates=("age", "hgb", "clinstg", "ch", "rt"),
            auxiliary=("relapse", "death"),
            time_unit="years",
        ),
        cause_rule=parse_cause_rule("relapse@relapse=1; death@death=1"),
        description="Follicular lymphoma: relapse or no response (1), death without relapse (2)",
    ),
    "pbc": DatasetPreset(
        name="pbc",
        schema=ColumnSchema(
            time="years",
            status="event",
            covariates=(
                "age",
                "sex",
                "ascites",
                "hepato",
                "spiders",
                "edema",
                "bili",
                "albumin",
                "protime",
                "stage",
            ),
            auxiliary=("status",),
            time_unit="years",
        ),
        cause_rule=parse_cause_rule("death@status=2; transplant@status=1"),
        description="Primary biliary cirrhosis: death (1), liver transplant (2)",
    ),
}


def get_preset(name: str) -> DatasetPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"Unknown dataset preset {name!r}; valid: {', '.join(sorted(PRESETS))}") from None
