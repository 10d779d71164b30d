import csv
import json

import pytest

from failbench.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main, parse_runtime_subset
from failbench.core import table_to_json
from failbench.engine import ConfigError
from failbench.fixtures import table1b


def reciprocal(x, seed):
    return 1.0 / x


@pytest.fixture
def datasets(tmp_path):
    p = tmp_path / "data.json"
    p.write_text(json.dumps({"a": 1.0, "b": 0.0, "c": 4.0}))
    return p


@pytest.fixture
def table_file(tmp_path):
    p = tmp_path / "t1b.json"
    p.write_text(table_to_json(table1b()))
    return p


class TestRun:
    def test_run(self, tmp_path, datasets):
        out = tmp_path / "out"
        rc = main(["run", "--method", "recip=test_cli:reciprocal", "--datasets", str(datasets),
                   "--seed", "5", "--out", str(out)])
        assert rc == EXIT_OK
        rows = list(csv.DictReader((out / "results.csv").open()))
        assert [r["kind"] for r in rows] == ["", "Calculation", ""]
        assert len((out / "cells.ndjson").read_text().splitlines()) == 3
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["stamp"]["master_seed"] == 5

    def test_runtime_subset_flag(self, tmp_path, datasets):
        out = tmp_path / "out"
        rc = main(["run", "--method", "r=test_cli:reciprocal", "--datasets", str(datasets),
                   "--runtime-subset", "method=r,fraction=0.5,seed=1", "--out", str(out)])
        assert rc == EXIT_OK
        meta = json.loads((out / "manifest.json").read_text())["metadata"]
        assert len(meta["runtime_subset"]["r"]["executed"]) == 2

    def test_bad_method_spec(self, tmp_path, datasets):
        assert main(["run", "--method", "nocolon", "--datasets", str(datasets),
                     "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_missing_datasets_file(self, tmp_path):
        assert main(["run", "--method", "r=test_cli:reciprocal", "--datasets",
                     str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_DATA


class TestAggregateReport:
    def test_aggregate(self, tmp_path, table_file):
        assert main(["aggregate", "--table", str(table_file), "--out", str(tmp_path)]) == EXIT_OK
        text = (tmp_path / "aggregate.csv").read_text()
        assert "Method 2,Unconditional,accuracy,0.8375" in text

    def test_aggregate_imputed(self, tmp_path, table_file):
        rc = main(["aggregate", "--table", str(table_file), "--impute", "worst:worst=0",
                   "--out", str(tmp_path)])
        assert rc == EXIT_OK
        assert "WorstValue(0.0)" in (tmp_path / "aggregate.csv").read_text()

    def test_report(self, tmp_path, table_file):
        assert main(["report", "--table", str(table_file), "--out", str(tmp_path)]) == EXIT_OK
        for name in ("threefold.csv", "threefold.json", "failure_summary.json", "boxplot.svg"):
            assert (tmp_path / name).exists()

    def test_data_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["report", "--table", str(bad), "--out", str(tmp_path)]) == EXIT_DATA


class TestStudies:
    def test_study_ci_with_config(self, tmp_path):
        cfg = tmp_path / "ci.ini"
        cfg.write_text("[study ci]\niters = 30\nbeta = 0.3\n")
        rc = main(["study", "ci", "--config", str(cfg), "--seed", "2", "--out", str(tmp_path)])
        assert rc == EXIT_OK
        rows = list(csv.reader((tmp_path / "table5.csv").open()))
        assert rows[0][0] == "method" and len(rows) == 3
        assert len((tmp_path / "iterations.ndjson").read_text().splitlines()) == 30
        assert (tmp_path / "coverage.svg").exists()

    def test_study_or_scenarios_file(self, tmp_path):
        sc = tmp_path / "sc.ini"
        sc.write_text("[s1]\ntrue_or = 5\np_x = 0.25\n[s2]\ntrue_or = 2\np_x = 0.5\n")
        rc = main(["study", "or", "--scenarios", str(sc), "--reps", "500", "--out", str(tmp_path)])
        assert rc == EXIT_OK
        rows = list(csv.DictReader((tmp_path / "zero_proportions.csv").open()))
        assert len(rows) == 2 and rows[0]["n_rep"] == "500"
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert len(manifest["pipelines"]) == 9
        assert (tmp_path / "or_ranks_panel_A.svg").exists()

    def test_bad_config_value(self, tmp_path):
        cfg = tmp_path / "ci.ini"
        cfg.write_text("[study ci]\nunknown_key = 1\n")
        assert main(["study", "ci", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_invalid_parameter(self, tmp_path):
        assert main(["study", "ci", "--iters", "0", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_usage_error(self):
        assert main(["nonsense"]) == EXIT_CONFIG


def test_parse_runtime_subset():
    name, sub = parse_runtime_subset("method=Fisher,fraction=0.25,seed=9")
    assert name == "Fisher" and sub.fraction == 0.25 and sub.selection_seed == 9
    with pytest.raises(ConfigError):
        parse_runtime_subset("method=Fisher")
