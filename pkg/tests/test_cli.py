"""End-to-end tests of the command-line entrypoint."""
from __future__ import annotations

import csv
from pathlib import Path

import pytest

from survival_boost.cli import main
from survival_boost.config import parse_config_file
from survival_boost.dataset import write_csv

from factories import random_dataset

QUICK = ["--ntree", "2", "--iterations", "2", "--d0", "5", "--threads", "1", "--seed", "3"]
COLUMNS = ["--time-col", "time", "--status-col", "status"]


@pytest.fixture()
def plain_csv(tmp_path: Path) -> Path:
    path = tmp_path / "toy.csv"
    write_csv(random_dataset(21, n=40), path)
    return path


@pytest.fixture()
def competing_csv(tmp_path: Path) -> Path:
    path = tmp_path / "risks.csv"
    write_csv(random_dataset(22, n=60, n_causes=2), path)
    return path


def _rows(path: Path) -> list[dict[str, str]]:
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def _fit(data: Path, out: Path, *extra: str) -> int:
    return main(["fit", "--data", str(data), *COLUMNS, *QUICK, "--out", str(out), *extra])


def test_fit_writes_model_manifest_and_training_predictions(plain_csv: Path, tmp_path: Path):
    out = tmp_path / "fit"
    assert _fit(plain_csv, out) == 0
    assert (out / "model.json").is_file()
    manifest = parse_config_file(out / "manifest.cfg")
    assert manifest["method"] == "ADA-ESF"
    assert manifest["seed"] == "3"
    rows = _rows(out / "train-predictions.csv")
    assert len(rows) == 40
    assert list(rows[0]) == ["row", "predicted_time"]


def test_fit_is_byte_identical_across_runs(plain_csv: Path, tmp_path: Path):
    assert _fit(plain_csv, tmp_path / "a", "--method", "ADA-MIX") == 0
    assert _fit(plain_csv, tmp_path / "b", "--method", "ADA-MIX", "--threads", "2") == 0
    assert (tmp_path / "a" / "model.json").read_bytes() == (tmp_path / "b" / "model.json").read_bytes()


def test_predict_on_training_file_matches_fit_output(plain_csv: Path, tmp_path: Path):
    out = tmp_path / "fit"
    assert _fit(plain_csv, out, "--method", "RSF") == 0
    code = main(
        ["predict", "--model", str(out / "model.json"), "--input", str(plain_csv), "--out", str(tmp_path / "pred")]
    )
    assert code == 0
    assert (tmp_path / "pred" / "predictions.csv").read_bytes() == (out / "train-predictions.csv").read_bytes()


def test_predict_leaves_incomplete_rows_blank(plain_csv: Path, tmp_path: Path):
    out = tmp_path / "fit"
    assert _fit(plain_csv, out, "--method", "ESF") == 0
    source = tmp_path / "new.csv"
    source.write_text("x2,x1,x0,note\n0.1,0.2,0.3,a\n0.1,,0.3,b\n", encoding="utf-8")
    assert main(["predict", "--model", str(out / "model.json"), "--input", str(source), "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "predictions.csv")
    assert rows[0]["predicted_time"] != ""
    assert rows[1]["predicted_time"] == ""


def test_predict_with_missing_feature_exits_with_data_error(plain_csv: Path, tmp_path: Path, capsys):
    out = tmp_path / "fit"
    assert _fit(plain_csv, out, "--method", "ESF") == 0
    capsys.readouterr()
    source = tmp_path / "partial.csv"
    source.write_text("x0,x1\n1,2\n", encoding="utf-8")
    assert main(["predict", "--model", str(out / "model.json"), "--input", str(source)]) == 3
    err = capsys.readouterr().err
    assert "error: code=3 kind=DataMismatchError" in err
    assert "x2" in err


@pytest.mark.parametrize(
    "argv, kind",
    [
        (["fit", "--data", "missing.csv", *COLUMNS], "FileNotFoundError"),
        (["fit", "--data", "x.csv", *COLUMNS, "--method", "GBM"], "ConfigurationError"),
        (["fit", "--bogus"], "ConfigurationError"),
        (["explode"], "ConfigurationError"),
        (["bench", "--data", "x.csv", *COLUMNS, "--methods", ""], "ConfigurationError"),
    ],
)
def test_usage_errors_exit_with_code_two(argv, kind, capsys):
    assert main(argv) == 2
    assert f"error: code=2 kind={kind}" in capsys.readouterr().err


def test_unknown_config_key_is_a_usage_error(tmp_path: Path):
    config = tmp_path / "run.cfg"
    config.write_text("# settings\nntree = 2\ncolour = blue\n", encoding="utf-8")
    assert main(["fit", "--config-file", str(config)]) == 2


def test_manifest_reproduces_the_fit(plain_csv: Path, tmp_path: Path):
    first = tmp_path / "first"
    assert _fit(plain_csv, first, "--method", "ADA-RSF", "--aggregation", "mapped_mean_of_mode") == 0
    second = tmp_path / "second"
    assert main(["fit", "--config-file", str(first / "manifest.cfg"), "--out", str(second)]) == 0
    assert (first / "model.json").read_bytes() == (second / "model.json").read_bytes()
    assert (first / "train-predictions.csv").read_bytes() == (second / "train-predictions.csv").read_bytes()


def test_curves_from_data_and_model(plain_csv: Path, tmp_path: Path):
    km_only = tmp_path / "km"
    assert main(["curves", "--data", str(plain_csv), *COLUMNS, "--profile", "km-only", "--out", str(km_only)]) == 0
    assert sorted(path.name for path in km_only.iterdir()) == ["curves.json", "km.csv"]

    fit = tmp_path / "fit"
    assert _fit(plain_csv, fit, "--method", "ESF") == 0
    both = tmp_path / "both"
    argv = ["curves", "--data", str(plain_csv), *COLUMNS, "--model", str(fit / "model.json"), "--out", str(both)]
    assert main(argv) == 0
    assert {"km.csv", "model-survival.csv", "model-chf.csv"} <= {path.name for path in both.iterdir()}

    profile = tmp_path / "profile"
    argv = ["curves", "--model", str(fit / "model.json"), "--profile", "0,0,0", "--out", str(profile)]
    assert main(argv) == 0
    assert (profile / "model-survival.csv").is_file()
    argv = ["curves", "--model", str(fit / "model.json"), "--profile", "0,0"]
    assert main(argv) == 3


def test_competing_fits_and_curves(competing_csv: Path, tmp_path: Path):
    cause_columns = [*COLUMNS, "--cause-col", "cause"]
    one = tmp_path / "one"
    argv = ["fit", "--data", str(competing_csv), *cause_columns, *QUICK, "--method", "RSF", "--cause", "2"]
    assert main([*argv, "--out", str(one)]) == 0
    assert list(_rows(one / "train-predictions.csv")[0]) == ["row", "predicted_time_2"]

    every = tmp_path / "every"
    argv = ["fit", "--data", str(competing_csv), *cause_columns, *QUICK, "--method", "ESF", "--all-causes"]
    assert main([*argv, "--out", str(every)]) == 0
    assert list(_rows(every / "train-predictions.csv")[0]) == ["row", "predicted_time_1", "predicted_time_2"]

    curves = tmp_path / "curves"
    assert main(["curves", "--data", str(competing_csv), *cause_columns, "--out", str(curves)]) == 0
    names = {path.name for path in curves.iterdir()}
    assert {"km.csv", "aj-1.csv", "aj-2.csv", "na-1.csv", "na-2.csv"} <= names

    assert main(["fit", "--data", str(competing_csv), *cause_columns, *QUICK, "--cause", "9"]) == 3


def test_bench_writes_run_directory(plain_csv: Path, tmp_path: Path):
    argv = ["bench", "--data", str(plain_csv), *COLUMNS, *QUICK, "--methods", "ADA-ESF,RSF", "--out", str(tmp_path)]
    assert main(argv) == 0
    run = tmp_path / "toy-seed3"
    assert {"report.csv", "report.json", "report.xlsx", "manifest.cfg", "curves"} <= {p.name for p in run.iterdir()}
    rows = _rows(run / "report.csv")
    assert [row["method"] for row in rows] == ["ADA-ESF", "RSF"]
    assert (run / "curves" / "km.csv").is_file()
