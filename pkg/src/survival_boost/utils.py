"""Error types, string parsers and seed helpers shared across the package."""
from __future__ import annotations

import hashlib
import math
import re
from typing import Iterable, Optional

from .errors import (  # noqa: F401
    ConfigurationError,
    DataMismatchError,
    DomainError,
    ModelDegenerateError,
    ParseError,
    SurvivalBoostError,
    ValidationError,
)
from .models import CauseClause, CauseRule, Status


MISSING_TOKENS = frozenset({"", "na", "nan", "n/a", "null", "."})
STATUS_SYMBOLS: dict[str, Status] = {
    "1": Status.EVENT,
    "0": Status.CENSORED,
    "event": Status.EVENT,
    "censored": Status.CENSORED,
    "true": Status.EVENT,
    "false": Status.CENSORED,
}
CLAUSE_PATTERN = re.compile(r"^(?P<name>[\w\-]+)@(?P<column>[^=]+)=(?P<values>.+)$")


def is_missing(value: Optional[str]) -> bool:
    """Return True for empty cells and the usual NA spellings."""
    return value is None or value.strip().lower() in MISSING_TOKENS


def parse_time(value: str, line: Optional[int] = None) -> float:
    """Parse an observed time; it must be positive and finite."""
    where = f" (line {line})" if line is not None else ""
    try:
        time = float(value)
    except ValueError as exc:
        raise ValidationError(f"Invalid time value{where}: {value!r}") from exc
    if not math.isfinite(time) or time <= 0:
        raise ValidationError(f"Time must be positive and finite{where}: {value!r}")
    return time


def parse_status(value: str, line: Optional[int] = None) -> Status:
    """Map a status symbol onto Status."""
    symbol = value.strip().lower()
    if symbol.endswith(".0") and symbol[:-2] in ("0", "1"):
        symbol = symbol[:-2]
    try:
        return STATUS_SYMBOLS[symbol]
    except KeyError:
        where = f" (line {line})" if line is not None else ""
        accepted = ", ".join(["1", "0", "event", "censored", "TRUE", "FALSE"])
        raise ValidationError(f"Unknown status symbol{where}: {value!r}; accepted: {accepted}") from None


def parse_cause(value: str, line: Optional[int] = None) -> Optional[int]:
    """Parse a cause label; 0 and missing mean no cause."""
    if is_missing(value):
        return None
    try:
        number = float(value)
    except ValueError:
        number = math.nan
    if not number.is_integer() or number < 0:
        where = f" (line {line})" if line is not None else ""
        raise ValidationError(f"Cause label must be a small non-negative integer{where}: {value!r}")
    return int(number) or None


def parse_float(value: str) -> Optional[float]:
    """Parse a numeric cell, returning None when it is not a number."""
    try:
        number = float(value)
    except ValueError:
        return None
    if not math.isfinite(number):
        return None
    return number


def parse_name_list(value: Optional[str]) -> tuple[str, ...]:
    """Split a comma separated list of column names."""
    if not value:
        return ()
    return tuple(part.strip() for part in value.split(",") if part.strip())


def parse_cause_rule(value: str) -> CauseRule:
    """Parse a rule like ``relapse@relapse=1; death@death=1|TRUE``.

    Clause order is precedence order; the first clause becomes cause 1.
    """
    clauses: list[CauseClause] = []
    for raw_clause in (part.strip() for part in value.split(";")):
        if not raw_clause:
            continue
        match = CLAUSE_PATTERN.match(raw_clause)
        if not match:
            raise ParseError(f"Invalid cause clause: {raw_clause!r} (expected name@column=v1|v2)")
        values = tuple(item.strip() for item in match.group("values").split("|") if item.strip())
        clauses.append(
            CauseClause(
                label=len(clauses) + 1,
                name=match.group("name"),
                column=match.group("column").strip(),
                values=values,
            )
        )
    if not clauses:
        raise ParseError(f"Empty cause rule: {value!r}")
    return CauseRule(clauses=tuple(clauses))


def derive_seed(seed: int, *labels: object) -> int:
    """Derive a 64-bit seed for a named component from the master seed."""
    text = "/".join([str(int(seed))] + [str(label) for label in labels])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def stable_mean(values: Iterable[float]) -> float:
    """Mean that returns the common value exactly when all inputs agree."""
    items = [float(value) for value in values]
    if not items:
        raise DomainError("Cannot average an empty collection")
    if all(item == items[0] for item in items):
        return items[0]
    return math.fsum(items) / len(items)
