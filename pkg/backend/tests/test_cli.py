import json
from datetime import datetime, timezone

import click
import orjson
import pandas as pd
import pytest
from click.testing import CliRunner
from freezegun import freeze_time

from didlab import __version__
from didlab.cli import cli, main, merge, replace_option
from didlab.model import MCReport, PanelData
from didlab.modules.ingestionLayer import write_panel_csv


def _error(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


def _manifests(settings):
    return sorted(settings.run_dir.glob("*.manifest.json"))


def _walk(command, path=()):
    yield path, command
    if isinstance(command, click.Group):
        for name, sub in command.commands.items():
            yield from _walk(sub, path + (name,))


def test_every_option_is_documented():
    for path, command in _walk(cli):
        assert command.help, f"{' '.join(path)} has no help"
        for param in command.params:
            if isinstance(param, click.Option) and param.name != "help":
                assert param.help, f"{' '.join(path)} {param.opts[0]} has no help"


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_analytic_nabla_is_normalized_at_two_periods(capsys, testing_settings):
    assert main(["analytic", "nabla", "--rho", "0.5", "--T", "2", "--sigma-nu2", "0.75"]) == 0
    assert capsys.readouterr().out.strip() == "1.0"
    (path,) = _manifests(testing_settings)
    manifest = orjson.loads(path.read_bytes())
    assert manifest["status"] == "ok"
    assert manifest["subcommand"] == "analytic nabla"
    assert manifest["resolved_config"] == {"rho": 0.5, "T": 2, "sigma_nu2": 0.75}


def test_analytic_quantities(capsys):
    assert main(["analytic", "rejection", "--kappa", "0"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.05)
    args = ["--mu-gap", "1", "--moment", "2", "--sigma-eps2-treated", "1", "--sigma-eps2-control", "1", "--c", "0.5"]
    assert main(["analytic", "corollary", *args]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1.5)
    assert main(["analytic", "gap", *args]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(2.0)
    assert main(["analytic", "paired", "--sigma-lambda2", "1", "--sigma-delta2", "1", "--n1", "4", "--n0", "4"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1.5)


def test_analytic_design_reports_the_decomposition(capsys):
    assert main(["analytic", "design", "--blocks", "5", "--block-size", "4", "--periods", "4", "--t-star", "2"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["four_term_gap"] == pytest.approx(result["v_corr"] - result["v_uncorr"])
    assert len(result["terms"]) == 4


def test_bad_rho_is_a_usage_error(capsys, testing_settings):
    assert main(["analytic", "nabla", "--rho", "1.2", "--T", "4"]) == 1
    assert _error(capsys)["code"] == "BAD_RHO"
    manifest = orjson.loads(_manifests(testing_settings)[0].read_bytes())
    assert manifest["status"] == "failed"
    assert manifest["error"]["code"] == "BAD_RHO"


def test_missing_data_file(capsys, tmp_path, testing_settings):
    assert main(["estimate", "--data", str(tmp_path / "absent.csv")]) == 2
    error = _error(capsys)
    assert error["code"] == "DATA_NOT_FOUND"
    assert "absent.csv" in error["error"]
    assert orjson.loads(_manifests(testing_settings)[0].read_bytes())["status"] == "failed"


def test_simulate_then_estimate(capsys, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"assignment": {"kind": "fixed", "n_treated": 10}}))
    panel = tmp_path / "panel.csv"
    argv = ["simulate", "--config", str(spec), "--groups", "20", "--periods", "4", "--t-star", "2", "--seed", "3", "--out", str(panel)]
    assert main(argv) == 0

    manifest = orjson.loads((tmp_path / "panel.manifest.json").read_bytes())
    assert manifest["argv"] == argv and manifest["seed"] == 3
    assert manifest["outputs"] == [str(panel)]
    frame = pd.read_csv(panel)
    assert list(frame.columns) == ["group", "time", "outcome", "treated", "treat_start"]
    assert len(frame) == 80

    assert main(["estimate", "--data", str(panel), "--variance", "hc_robust"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["estimator"] == "twfe"
    assert result["n_treated"] == 10 and result["n_control"] == 10
    assert result["variance"]["method"] == "hc_robust"
    assert 0.0 <= result["test"]["p_value"] <= 1.0


def test_estimate_writes_json(tmp_path, staggered_panel):
    path = write_panel_csv(staggered_panel, tmp_path / "staggered.csv")
    out = tmp_path / "estimate.json"
    assert main(["estimate", "--data", str(path), "--estimator", "longdiff", "--horizon", "1", "--out", str(out)]) == 0
    result = orjson.loads(out.read_bytes())
    assert result["estimator"] == "longdiff"
    assert len(result["comparisons"]) == 4


def test_mc_from_toml_with_flag_override(tmp_path):
    config = tmp_path / "tiny.toml"
    config.write_text(
        'name = "tiny"\nn_groups = 20\nreps = 50\nseed = 1\n\n[dgp.assignment]\nkind = "fixed"\nn_treated = 10\n'
    )
    out = tmp_path / "tiny.json"
    assert main(["mc", "--config", str(config), "--reps", "12", "--workers", "1", "--out", str(out)]) == 0
    report = MCReport.model_validate(orjson.loads(out.read_bytes()))
    assert report.name == "tiny" and report.reps == 12 and report.seed == 1
    assert report.cells[0].reps == 12


def test_mc_curve_preset(tmp_path):
    out = tmp_path / "curve.csv"
    assert main(["mc", "--preset", "fig-a1", "--out", str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["rho", "T", "value"]
    assert len(frame) == 4 * 25
    assert frame.loc[frame["T"] == 2, "value"].tolist() == pytest.approx([1.0] * 4)


def test_nabla_curve_command(capsys):
    assert main(["nabla-curve", "--rho", "0.5", "--t-max", "6", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "rho,T,value"
    assert len(lines) == 4


def test_mc_refuses_placebo_presets(capsys):
    assert main(["mc", "--preset", "synthetic-acs-placebo"]) == 1
    assert _error(capsys)["code"] == "INVALID_CONFIG"


def test_invalid_config_values(capsys, tmp_path):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"kind": "pretest_normal_model", "level": 2.0}))
    assert main(["mc", "--config", str(config)]) == 1
    assert _error(capsys)["code"] == "INVALID_CONFIG"


def test_unparseable_config(capsys, tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text("reps = = 3")
    assert main(["mc", "--config", str(config)]) == 2
    assert _error(capsys)["code"] == "PARSE_ERROR"


def test_unknown_preset_is_rejected_by_the_parser(capsys):
    assert main(["mc", "--preset", "table-z9"]) == 1
    assert "table-z9" in capsys.readouterr().err


def test_placebo_on_a_csv(tmp_path):
    panel = PanelData(outcomes=[[0.1, 0.4, 0.2], [0.3, 0.0, 0.9], [1.0, 1.2, 0.7], [0.5, 0.6, 0.8]] * 2, clusters=tuple("aabbccdd"))
    data = write_panel_csv(panel, tmp_path / "panel.csv")
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({"min_groups_per_arm": 2, "schemes": ["cluster_random"]}))
    out = tmp_path / "curve.csv"
    assert main(["placebo", "--config", str(plan), "--data", str(data), "--reps", "2", "--seed", "4", "--out", str(out)]) == 0
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["delta", "scheme", "rate", "mc_se", "n_cells"]
    assert frame.iloc[0][["delta", "scheme", "n_cells"]].tolist() == [1, "cluster_random", 12]


def test_rerun_replays_a_manifest(capsys, testing_settings):
    assert main(["analytic", "rejection", "--kappa", "1"]) == 0
    first = capsys.readouterr().out
    (manifest,) = _manifests(testing_settings)
    assert main(["rerun", str(manifest)]) == 0
    assert capsys.readouterr().out == first


def test_rerun_missing_manifest(capsys, tmp_path):
    assert main(["rerun", str(tmp_path / "nope.manifest.json")]) == 2
    assert _error(capsys)["code"] == "DATA_NOT_FOUND"


def test_manifest_timestamps(testing_settings):
    with freeze_time("2026-03-01 12:00:00"):
        assert main(["analytic", "rejection", "--kappa", "0.5"]) == 0
    (path,) = _manifests(testing_settings)
    assert path.name == "analytic-rejection-20260301T120000000000.manifest.json"
    manifest = orjson.loads(path.read_bytes())
    started = datetime.fromisoformat(manifest["started_at"].replace("Z", "+00:00"))
    assert started == datetime(2026, 3, 1, 12, 0, tzinfo=timezone.utc)
    assert manifest["finished_at"] == manifest["started_at"]


def test_calibrate_command(capsys):
    argv = ["calibrate", "--target", "0.3", "--groups", "20", "--reps", "200", "--tol", "0.03", "--seed", "4"]
    assert main(argv) == 0
    result = json.loads(capsys.readouterr().out)
    assert list(result) == ["0.3"]
    assert result["0.3"] > 0


def test_merge_and_replace_option():
    assert merge({"a": {"b": 1, "c": 2}, "d": 1}, {"a": {"b": 5}}) == {"a": {"b": 5, "c": 2}, "d": 1}
    assert replace_option(["mc", "--out", "x.csv"], "--out", "y.csv") == ["mc", "--out", "y.csv"]
    assert replace_option(["mc", "--out=x.csv"], "--out", "y.csv") == ["mc", "--out=y.csv"]
    assert replace_option(["mc"], "--out", "y.csv") == ["mc", "--out", "y.csv"]


def test_help_lists_every_command():
    result = CliRunner().invoke(cli, ["--help"])
    assert result.exit_code == 0
    for name in ("simulate", "estimate", "mc", "placebo", "analytic", "nabla-curve", "calibrate", "rerun", "serve"):
        assert name in result.output
