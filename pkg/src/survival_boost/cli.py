"""Command-line interface: fit, predict, curves and bench."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .bench import run_benchmark, run_directory
from .boost import fit_method
from .competing import cause_curves, fit_all_causes, fit_cause_specific
from .config import FIELD_PARSERS, RunConfig, parse_config_file, parse_profile, resolve_config
from .dataset import drop_causes, load_covariates, load_dataset
from .estimators import kaplan_meier, risk_table_from_arrays
from .export import write_curves, write_predictions_csv, write_report
from .models import Dataset, SurvivalCurve
from .persistence import ModelEnvelope, load_model, save_model
from .utils import ConfigurationError, DataMismatchError, SurvivalBoostError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
MANIFEST_NAME = "manifest.cfg"


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of printing usage and exiting."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigurationError(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config-file", help="Flat key = value settings file (flags win)")
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level on standard error",
    )
    parser.add_argument("--threads", help="Parallel workers for trees and causes (default: all cores)")
    parser.add_argument("--seed", help="Master seed (unsigned 64-bit)")
    parser.add_argument("--out", help="Output directory")


def _add_dataset(parser: argparse.ArgumentParser, required: bool = False) -> None:
    group = parser.add_argument_group("dataset")
    group.add_argument("--data", help="Dataset CSV or .xlsx file" + (" (required)" if required else ""))
    group.add_argument("--sheet", help="Workbook sheet (default: first sheet)")
    group.add_argument("--preset", help="Dataset preset: follic or pbc")
    group.add_argument("--time-col", dest="time_col", help="Observed time column")
    group.add_argument("--status-col", dest="status_col", help="Event status column")
    group.add_argument("--cause-col", dest="cause_col", help="Cause label column (competing risks)")
    group.add_argument("--covariates", help="Comma separated covariate columns (default: all others)")
    group.add_argument("--auxiliary", help="Comma separated columns kept for cause rules")
    group.add_argument("--cause-rule", dest="cause_rule", help="Cause rule, e.g. 'relapse@relapse=1; death@death=1'")
    group.add_argument("--time-unit", dest="time_unit", help="Unit label of observed times")


def _add_model(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    group.add_argument("--method", help="RSF, ESF, ADA-RSF, ADA-ESF or ADA-MIX")
    group.add_argument("--aggregation", help="mean_of_mode or mapped_mean_of_mode")
    group.add_argument("--ntree", help="Trees per forest")
    group.add_argument("--iterations", help="Boosting iterations")
    group.add_argument("--mtry", help="Features tried per node (default: ceil(sqrt(p)))")
    group.add_argument("--d0", help="Stopping parameter: leaves hold at most ceil(0.632 * d0) events")
    group.add_argument("--min-child-events", dest="min_child_events", help="Distinct event times required per child")
    group.add_argument("--max-depth", dest="max_depth", help="Maximum tree depth")
    group.add_argument("--tolerance", help="Correctness band in event-time standard deviations")
    group.add_argument("--esf-cutpoints", dest="esf_cutpoints", help="Random cutpoints per feature for ESF")
    group.add_argument("--split-rule", dest="split_rule", help="logrank or logrank-score")
    group.add_argument("--cause", help="Fit one cause (label or name)")
    group.add_argument(
        "--all-causes", dest="all_causes", action="store_const", const="true", help="Fit every cause"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="survival-boost", description="Survival forests and AdaBoost ensembles")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = commands.add_parser("fit", help="Fit a model and write model.json plus a manifest")
    _add_common(fit)
    _add_dataset(fit, required=True)
    _add_model(fit)

    predict = commands.add_parser("predict", help="Predict times for an input file")
    _add_common(predict)
    predict.add_argument("--model", help="Model JSON written by fit")
    predict.add_argument("--input", help="Input CSV or .xlsx with the model's feature columns")
    predict.add_argument("--sheet", help="Workbook sheet of the input")

    curves = commands.add_parser("curves", help="Write survival curves at a covariate profile")
    _add_common(curves)
    _add_dataset(curves)
    curves.add_argument("--model", help="Model JSON written by fit")
    curves.add_argument("--profile", help="'mean', 'km-only' or comma separated covariate values")

    bench = commands.add_parser("bench", help="Benchmark methods on a train/test split")
    _add_common(bench)
    _add_dataset(bench, required=True)
    _add_model(bench)
    bench.add_argument("--methods", help="Comma separated methods")
    bench.add_argument("--aggregations", help="Comma separated aggregations")
    bench.add_argument("--scope", help="RMSE scope: events_only or all")
    bench.add_argument("--test-fraction", dest="test_fraction", help="Share of records held out")
    bench.add_argument("--stratify", action="store_const", const="true", help="Stratify the split by status")
    bench.add_argument("--profile", help="Curve profile: 'mean' or comma separated covariate values")
    return parser


def parse_run_config(argv: Optional[Sequence[str]] = None) -> tuple[RunConfig, str]:
    """Parse arguments and merge them over the config file; returns the config and log level."""
    args = build_parser().parse_args(argv)
    file_values = parse_config_file(args.config_file) if args.config_file else {}
    flags = {key: value for key, value in vars(args).items() if key in FIELD_PARSERS}
    return resolve_config(args.command, file_values, flags), args.log_level


def _load_data(cfg: RunConfig, encodings: Optional[Mapping[str, Sequence[str]]] = None) -> Dataset:
    if not cfg.data:
        raise ConfigurationError(f"{cfg.command} needs --data")
    schema, rule, name = cfg.dataset_schema()
    return load_dataset(cfg.data, schema, rule, sheet=cfg.sheet, name=name or None, encodings=encodings)


def _write_manifest(cfg: RunConfig, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / MANIFEST_NAME
    path.write_text(cfg.to_manifest(), encoding="utf-8")
    return path


def _resolve_cause(data: Dataset, cause: str) -> int:
    if not data.competing_risk:
        raise ConfigurationError("A cause was requested but the dataset has no causes")
    return data.resolve_cause(cause)


def cmd_fit(cfg: RunConfig) -> Path:
    """Fit the configured engine and write model.json, the manifest and training predictions."""
    data = _load_data(cfg)
    boost_cfg = cfg.boost_config()
    if cfg.cause is not None:
        model = fit_cause_specific(data, _resolve_cause(data, cfg.cause), cfg.method, boost_cfg)
    elif cfg.all_causes:
        if not data.competing_risk:
            raise ConfigurationError("--all-causes needs a competing-risk dataset")
        model = fit_all_causes(data, cfg.method, boost_cfg)
    else:
        model = fit_method(drop_causes(data), cfg.method, boost_cfg)

    envelope = ModelEnvelope(
        model=model,
        method=cfg.method,
        aggregation=cfg.aggregation,
        feature_names=data.feature_names,
        encodings=dict(data.encodings),
        time_unit=data.time_unit,
        dataset=data.name,
    )
    out = Path(cfg.out)
    path = save_model(envelope, out / "model.json")
    _write_manifest(cfg, out)
    _predict_file(envelope, cfg.data, cfg.sheet, out / "train-predictions.csv")
    return path


def _predict_file(envelope: ModelEnvelope, source: str, sheet: Optional[str], target: Path) -> Path:
    X = load_covariates(source, envelope.feature_names, envelope.encodings, sheet=sheet)
    target.parent.mkdir(parents=True, exist_ok=True)
    write_predictions_csv(envelope.predict(X), target)
    return target


def cmd_predict(cfg: RunConfig) -> Path:
    """One prediction row per input row (blank where a covariate is missing)."""
    if not cfg.model or not cfg.input:
        raise ConfigurationError("predict needs --model and --input")
    envelope = load_model(cfg.model)
    return _predict_file(envelope, cfg.input, cfg.sheet, Path(cfg.out) / "predictions.csv")


def _check_features(envelope: ModelEnvelope, data: Dataset) -> None:
    if tuple(data.feature_names) == tuple(envelope.feature_names):
        return
    missing = [name for name in envelope.feature_names if name not in data.feature_names]
    extra = [name for name in data.feature_names if name not in envelope.feature_names]
    raise DataMismatchError(
        f"Dataset columns do not match the model; missing: {', '.join(missing) or 'none'}; "
        f"extra: {', '.join(extra) or 'none'}"
    )


def cmd_curves(cfg: RunConfig) -> list[Path]:
    """Model curves at a profile and, with a dataset, KM plus per-cause curves."""
    profile = cfg.profile or ("mean" if cfg.data else None)
    envelope = load_model(cfg.model) if cfg.model else None
    data = _load_data(cfg, envelope.encodings if envelope else None) if cfg.data else None
    curves: dict[str, SurvivalCurve] = {}

    if profile == "km-only" or envelope is None:
        if data is None:
            raise ConfigurationError("curves needs --data for km-only output, or --model with a profile")
    else:
        if profile == "mean":
            if data is None:
                raise ConfigurationError("The mean profile needs --data")
            _check_features(envelope, data)
            vector = data.X.mean(axis=0)
        elif profile is None:
            raise ConfigurationError("curves needs --profile or --data")
        else:
            vector = np.asarray(parse_profile(profile), dtype=float)
            if vector.size != len(envelope.feature_names):
                raise DataMismatchError(
                    f"Profile has {vector.size} values; model features: {', '.join(envelope.feature_names)}"
                )
        curves.update(envelope.curves(vector))

    if data is not None:
        if data.competing_risk:
            per_cause = cause_curves(data)
            curves["km"] = per_cause.event_free
            for cause, name in per_cause.cause_names.items():
                curves[f"aj-{name}"] = per_cause.incidence[cause]
                curves[f"na-{name}"] = per_cause.hazards[cause]
        else:
            curves["km"] = kaplan_meier(risk_table_from_arrays(data.times, data.events))
    return write_curves(curves, Path(cfg.out))


def cmd_bench(cfg: RunConfig) -> Path:
    """Run the benchmark and write report.{csv,json,xlsx}, curves and the manifest."""
    data = _load_data(cfg)
    cause = _resolve_cause(data, cfg.cause) if cfg.cause is not None else None
    report = run_benchmark(data, cfg.bench_config(cause))
    directory = run_directory(cfg.out, report)
    write_report(report, directory)
    _write_manifest(cfg, directory)
    return directory


COMMAND_HANDLERS = {"fit": cmd_fit, "predict": cmd_predict, "curves": cmd_curves, "bench": cmd_bench}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigurationError, FileNotFoundError)):
        return EXIT_USAGE
    if isinstance(exc, SurvivalBoostError):
        return EXIT_DATA
    return EXIT_INTERNAL


def _report_error(exc: BaseException) -> int:
    code = _exit_code(exc)
    print(f"error: code={code} kind={type(exc).__name__} message={json.dumps(str(exc))}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entrypoint; returns the process exit code."""
    try:
        cfg, log_level = parse_run_config(argv)
        logging.basicConfig(level=log_level, format=LOG_FORMAT, stream=sys.stderr)
        COMMAND_HANDLERS[cfg.command](cfg)
    except Exception as exc:  # noqa: BLE001
        if not isinstance(exc, (SurvivalBoostError, FileNotFoundError)):
            logger.debug("Unhandled error", exc_info=True)
        return _report_error(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
