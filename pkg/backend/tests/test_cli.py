import csv
import io
import json

import pytest
from click.testing import CliRunner

from app.cli import ExperimentConfig, cli

from tests.conftest import data_path


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


def _rows(output: str):
    return list(csv.DictReader(io.StringIO(output)))


def test_parry_word(runner):
    result = runner.invoke(cli, ["parry", "--graph", data_path("golden_mean.json"), "--word", "a,a"])
    assert result.exit_code == 0, result.stderr
    rows = _rows(result.output)
    assert len(rows) == 1
    assert rows[0]["cylinder"] == "a,a"
    assert float(rows[0]["mass"]) == pytest.approx(0.2763932, abs=1e-7)


def test_parry_with_rays(runner):
    result = runner.invoke(cli, [
        "parry", "--graph", data_path("golden_mean.json"),
        "--x", data_path("point_gm_a.json"), "--y", data_path("point_gm_a.json"),
        "-n", "2", "-m", "1", "--format", "json",
    ])
    assert result.exit_code == 0, result.stderr
    meta = json.loads(result.output)["meta"]
    assert meta["product_check"]["abs_err"] < 1e-12
    assert all(report["conformality_err"] < 1e-12 for report in meta["conformality"])


def test_hetero_series(runner):
    result = runner.invoke(cli, [
        "hetero-series", "--graph", data_path("golden_mean.json"),
        "--x", data_path("point_gm_a.json"), "--y", data_path("point_gm_a.json"),
        "-n", "0", "-m", "0", "--k-max", "30",
    ])
    assert result.exit_code == 0, result.stderr
    lines = result.output.strip().split("\n")
    assert lines[0] == "k,count,scaled,target,abs_err,entropy_est"
    assert len(lines) == 31
    row = _rows(result.output)[14]
    assert row["k"] == "15"
    assert float(row["abs_err"]) < 1e-8


def test_hetero_series_undefined(runner):
    result = runner.invoke(cli, [
        "hetero-series", "--graph", data_path("period_2.json"),
        "--x", data_path("point_p2_pr.json"), "--y", data_path("point_p2_rp.json"),
    ])
    assert result.exit_code == 4
    assert "error" in result.stderr


def test_hetero_count(runner):
    args = [
        "hetero-count", "--graph", data_path("golden_mean.json"),
        "--x", data_path("point_gm_a.json"), "--y", data_path("point_gm_a.json"), "-k", "2",
    ]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.stderr
    assert _rows(result.output) == [{"k": "2", "count": "5"}]

    result = runner.invoke(cli, args + ["--list-paths"])
    assert result.exit_code == 0, result.stderr
    assert [row["middle_path"] for row in _rows(result.output)][:2] == ["a,a,a,a", "a,a,b,c"]


def test_cap_exceeded(runner):
    args = [
        "hetero-count", "--graph", data_path("golden_mean.json"),
        "--x", data_path("point_gm_a.json"), "--y", data_path("point_gm_a.json"), "-k", "2", "--list-paths",
    ]
    assert runner.invoke(cli, args + ["--cap", "0"]).exit_code == 3
    assert runner.invoke(cli, args, env={"SMALE_CAP": "0"}).exit_code == 3


def test_invalid_inputs(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"vertices": ["1"], "edges": [{"id": "a", "from": "1", "to": "2"}]}))
    assert runner.invoke(cli, ["analyze", "--graph", str(bad)]).exit_code == 2

    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert runner.invoke(cli, ["analyze", "--graph", str(broken)]).exit_code == 2

    assert runner.invoke(cli, ["analyze", "--graph", str(tmp_path / "missing.json")]).exit_code == 2
    assert runner.invoke(cli, ["parry", "--graph", data_path("golden_mean.json"), "--l-max", "9"]).exit_code == 2
    assert runner.invoke(cli, ["weak-star", "--graph", data_path("golden_mean.json")]).exit_code == 2


def test_json_is_deterministic(runner):
    args = [
        "weak-star", "--graph", data_path("golden_mean.json"),
        "--x", data_path("point_gm_a.json"), "--x", data_path("point_gm_bc.json"),
        "--y", data_path("point_gm_a.json"), "--y", data_path("point_gm_bc.json"),
        "-k", "20", "--l-max", "2", "--format", "json",
    ]
    first = runner.invoke(cli, args)
    second = runner.invoke(cli, args)
    assert first.exit_code == 0, first.stderr
    assert first.output == second.output
    envelope = json.loads(first.output)
    assert envelope["meta"]["config"]["command"] == "weak-star"
    assert envelope["meta"]["sup_deviation"] < 1e-5
    assert set(envelope["rows"][0]) == {"cylinder", "empirical", "parry", "abs_err"}


def test_irreducible_series(runner):
    result = runner.invoke(cli, [
        "irreducible-series", "--graph", data_path("period_2.json"),
        "--x", data_path("point_p2_pr.json"), "--y", data_path("point_p2_pr.json"),
        "--k-max", "5", "--format", "json",
    ])
    assert result.exit_code == 0, result.stderr
    envelope = json.loads(result.output)
    assert [row["scaled"] for row in envelope["rows"]] == [2.0] * 5
    assert envelope["meta"]["target_x_level"] == pytest.approx(1.0)


def test_analyze_and_perron(runner):
    result = runner.invoke(cli, ["analyze", "--graph", data_path("period_2.json"), "--format", "json"])
    assert result.exit_code == 0, result.stderr
    meta = json.loads(result.output)["meta"]
    assert meta["period"] == 2
    assert meta["cyclic_classes"] == [["1"], ["2"]]

    result = runner.invoke(cli, ["perron", "--graph", data_path("golden_mean.json")])
    assert result.exit_code == 0, result.stderr
    rows = _rows(result.output)
    assert float(rows[0]["u_r"]) == pytest.approx(0.6180340, abs=1e-7)


def test_periodic_and_compare(runner):
    result = runner.invoke(cli, ["periodic", "--graph", data_path("golden_mean.json"), "-P", "4", "--format", "json"])
    assert result.exit_code == 0, result.stderr
    assert json.loads(result.output)["meta"]["total"] == 10

    result = runner.invoke(cli, [
        "compare", "--graph", data_path("golden_mean.json"),
        "--x", data_path("point_gm_a.json"), "--y", data_path("point_gm_a.json"),
        "-k", "12", "-P", "12", "--l-max", "1",
    ])
    assert result.exit_code == 0, result.stderr
    assert len(_rows(result.output)) == 5


def test_code_check(runner):
    result = runner.invoke(cli, ["code-check", "--code", data_path("code_doubling.json"), "-P", "5", "--format", "json"])
    assert result.exit_code == 0, result.stderr
    meta = json.loads(result.output)["meta"]
    assert meta["almost_one_to_one"] is False
    assert meta["min_fiber"] == 2

    result = runner.invoke(cli, ["code-check", "--code", data_path("code_2block.json"), "--format", "json"])
    meta = json.loads(result.output)["meta"]
    assert meta["right_resolving"] is True and meta["almost_one_to_one"] is True


def test_pushforward(runner, tmp_path):
    out = tmp_path / "push.json"
    result = runner.invoke(cli, [
        "pushforward", "--code", data_path("code_2block.json"),
        "--x", data_path("point_gm_a.json"), "--y", data_path("point_gm_a.json"),
        "-k", "4", "--format", "json", "-o", str(out),
    ])
    assert result.exit_code == 0, result.stderr
    assert result.output == ""
    meta = json.loads(out.read_text())["meta"]
    assert meta["sup_deviation"] < 1e-10
    assert meta["stable"]["abs_err"] < 1e-10
    assert meta["unstable"]["abs_err"] < 1e-10
    assert all(row["downstairs"] == row["upstairs"] for row in meta["count_identity"])


def test_unreadable_inputs(runner, tmp_path):
    binary = tmp_path / "binary.json"
    binary.write_bytes(b'{"vertices": ["\xff\xfe"]}')
    result = runner.invoke(cli, ["analyze", "--graph", str(binary)])
    assert result.exit_code == 2
    assert "error" in result.stderr

    result = runner.invoke(cli, ["analyze", "--graph", str(tmp_path)])
    assert result.exit_code == 2
    assert "error" in result.stderr


def test_unwritable_output(runner, tmp_path):
    target = tmp_path / "missing_dir" / "report.csv"
    result = runner.invoke(cli, ["analyze", "--graph", data_path("golden_mean.json"), "-o", str(target)])
    assert result.exit_code == 2
    assert "error" in result.stderr

    result = runner.invoke(cli, ["analyze", "--graph", data_path("golden_mean.json"), "-o", str(tmp_path)])
    assert result.exit_code == 2


@pytest.mark.parametrize("value", ["lots", "-5"])
def test_bad_cap_env(runner, value):
    args = [
        "hetero-count", "--graph", data_path("golden_mean.json"),
        "--x", data_path("point_gm_a.json"), "--y", data_path("point_gm_a.json"), "-k", "2",
    ]
    result = runner.invoke(cli, args, env={"SMALE_CAP": value})
    assert result.exit_code == 2
    assert "SMALE_CAP" in result.stderr
    assert runner.invoke(cli, args + ["--cap", "10"], env={"SMALE_CAP": value}).exit_code == 0


def test_config_lists_are_independent():
    first = ExperimentConfig(command="analyze")
    second = ExperimentConfig(command="analyze")
    first.x.append("point.json")
    assert first.x == ["point.json"]
    assert second.x == [] and second.y == []
