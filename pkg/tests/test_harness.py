import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import bandlab.config as cfg
from bandlab.__main__ import main
from bandlab.analyzer.experiment_config import CheckSpec, ExperimentConfig, load_config, resolve_check
from bandlab.analyzer.experiment_runner import ExperimentRunner, jsonable, run_experiment
from bandlab.checks import AlgebraCheck, LimitCheck, SpectralCheck
from bandlab.errors import ConfigInvalidError, ModuleError

SEED = 7

SMALL_CONFIG = {
    "experiment": "smoke",
    "seed": SEED,
    "checks": [
        {"check": "AlgebraCheck.GRASSMANN_DETERMINANT", "arguments": {"count": 5, "max_size": 3}},
        {"check": "SINE_KERNEL", "arguments": {"energies": [0.0], "points": [0.5]}},
        {"check": "SpectralCheck.PARTICIPATION", "arguments": {"n": 16, "W_values": [2, 4], "samples": 2},
         "gating": False},
    ],
}


def small_config(tmp_path, **changes):
    data = json.loads(json.dumps(SMALL_CONFIG))
    data["output_dir"] = str(tmp_path)
    data.update(changes)
    return data


def test_resolve_check_by_qualified_and_bare_name():
    assert resolve_check("LimitCheck.SINE_KERNEL") is LimitCheck.SINE_KERNEL
    assert resolve_check("BOSONIZATION") is AlgebraCheck.BOSONIZATION
    with pytest.raises(ConfigInvalidError):
        resolve_check("AlgebraCheck.SINE_KERNEL")
    with pytest.raises(ConfigInvalidError):
        resolve_check("NO_SUCH_CHECK")


def test_check_spec_rejects_unknown_arguments():
    with pytest.raises(ConfigInvalidError) as info:
        CheckSpec(LimitCheck.LAPLACIAN, {"max_level": 3})
    assert info.value.code == "CONFIG_INVALID"


def test_check_spec_normalizes_complex_arguments():
    spec = CheckSpec.from_dict({"check": "DET_RATIO_TREND", "arguments": {"target": [-1.0, 0.0],
                                                                          "xi": [[0, 0], [0, 0], [0.5, 0], 0.5]}})
    assert spec.arguments["target"] == complex(-1.0, 0.0)
    assert spec.arguments["xi"] == [0j, 0j, 0.5 + 0j, 0.5 + 0j]
    assert spec.to_dict()["arguments"]["target"] == [-1.0, 0.0]


@given(experiment=st.sampled_from(sorted(cfg.experiments)), seed=st.integers(0, 2 ** 64 - 1))
@settings(max_examples=40, deadline=None)
def test_config_round_trip(experiment, seed):
    config = ExperimentConfig.from_experiment(experiment, seed)
    again = ExperimentConfig.from_dict(json.loads(json.dumps(config.to_dict())))
    assert again.to_dict() == config.to_dict()
    assert again.content_hash() == config.content_hash()


def test_content_hash_ignores_output_dir_and_tracks_seed():
    a = ExperimentConfig.from_experiment("A6", 1, output_dir="x")
    b = ExperimentConfig.from_experiment("A6", 1, output_dir="y")
    c = ExperimentConfig.from_experiment("A6", 2, output_dir="x")
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != c.content_hash()


def test_non_gating_experiments_are_marked():
    config = ExperimentConfig.from_experiment("A9")
    assert all(not spec.gating for spec in config.checks)
    assert all(spec.gating for spec in ExperimentConfig.from_experiment("A1").checks)


@pytest.mark.parametrize("data", [
    {},
    {"experiment": "x", "seed": 1, "checks": []},
    {"experiment": "x", "seed": -1, "checks": [{"check": "LAPLACIAN"}]},
    {"experiment": "x", "seed": 2 ** 64, "checks": [{"check": "LAPLACIAN"}]},
    {"experiment": "x", "seed": True, "checks": [{"check": "LAPLACIAN"}]},
    {"experiment": "", "seed": 1, "checks": [{"check": "LAPLACIAN"}]},
    {"experiment": "x", "checks": [{"check": "LAPLACIAN"}]},
    {"experiment": "x", "seed": 1, "checks": [{"check": "LAPLACIAN"}], "colour": "red"},
    {"experiment": "x", "seed": 1, "checks": [{"name": "LAPLACIAN"}]},
])
def test_invalid_configurations(data):
    with pytest.raises(ConfigInvalidError):
        ExperimentConfig.from_dict(data)


def test_empty_configuration_cannot_run():
    with pytest.raises(ConfigInvalidError) as info:
        run_experiment({})
    assert info.value.code == "CONFIG_INVALID"


def test_unknown_default_experiment():
    with pytest.raises(ConfigInvalidError):
        ExperimentConfig.from_experiment("A0")


def test_manifest_is_complete(tmp_path):
    manifest = run_experiment(small_config(tmp_path))
    assert manifest.passed
    assert [entry["check"] for entry in manifest.checks] == [
        "AlgebraCheck.GRASSMANN_DETERMINANT", "LimitCheck.SINE_KERNEL", "SpectralCheck.PARTICIPATION"]
    assert [entry["gating"] for entry in manifest.checks] == [True, True, False]
    assert all(os.path.exists(path) for path in manifest.artifacts)

    with open(os.path.join(str(tmp_path), "bandlab_smoke_{}.json".format(SEED))) as fp:
        stored = json.load(fp)
    assert stored["passed"] is True
    assert stored["seed"] == SEED
    assert stored["config_hash"] == manifest.config_hash
    assert set(stored) >= {"experiment", "config", "version", "wall_time", "checks", "artifacts"}
    assert all("table" not in entry["measured"] for entry in stored["checks"])


def test_tables_are_written_as_csv(tmp_path):
    manifest = run_experiment(small_config(tmp_path))
    tables = sorted(path for path in manifest.artifacts if path.endswith(".csv"))
    assert [os.path.basename(path) for path in tables] == [
        "bandlab_smoke_{}_01_sine_kernel.csv".format(SEED), "bandlab_smoke_{}_02_participation.csv".format(SEED)]
    with open(tables[0]) as fp:
        assert fp.readline().strip() == "E,x,value,error"


def test_runs_are_deterministic(tmp_path):
    first = run_experiment(small_config(tmp_path / "first"))
    second = run_experiment(small_config(tmp_path / "second"))
    for a, b in zip(sorted(first.artifacts), sorted(second.artifacts)):
        if a.endswith(".csv"):
            with open(a, "rb") as fa, open(b, "rb") as fb:
                assert fa.read() == fb.read()
    assert [e["measured"] for e in first.checks] == [e["measured"] for e in second.checks]


def test_failing_gating_check_fails_the_run(tmp_path):
    data = small_config(tmp_path)
    data["checks"][1]["arguments"]["tolerance"] = 0.0
    assert not run_experiment(data).passed


def test_check_errors_are_wrapped_with_provenance(tmp_path):
    data = small_config(tmp_path)
    data["checks"][1]["arguments"]["energies"] = [1.9]
    with pytest.raises(ModuleError) as info:
        run_experiment(data)
    assert info.value.cause.code == "OUT_OF_BULK"
    assert info.value.to_dict()["context"]["check"] == repr("LimitCheck.SINE_KERNEL")


def test_runner_rejects_foreign_checks(tmp_path):
    runner = ExperimentRunner(ExperimentConfig.from_dict(small_config(tmp_path)))
    with pytest.raises(ValueError):
        runner.run_check("SINE_KERNEL")
    runner.run_check(SpectralCheck.COVARIANCE, {"n": 2, "W": 3, "samples": 100})
    assert len(runner.get_results()) == 1
    runner.clear_results()
    assert runner.get_results() == []


def test_jsonable_encodes_numbers():
    assert jsonable({"z": 1 + 2j, "a": np.arange(2), "f": np.float64(0.5), "c": LimitCheck.LAPLACIAN}) == {
        "z": [1.0, 2.0], "a": [0, 1], "f": 0.5, "c": "LAPLACIAN"}


def test_load_json_and_python_configs(tmp_path):
    json_path = tmp_path / "smoke.json"
    json_path.write_text(json.dumps(small_config(tmp_path)))
    assert load_config(str(json_path)).experiment == "smoke"

    py_path = tmp_path / "smoke.py"
    py_path.write_text("from bandlab.checks import LimitCheck\n"
                       "experiment = 'laplace'\n"
                       "seed = 3\n"
                       "checks = [(LimitCheck.LAPLACIAN, {'max_l': 2})]\n")
    config = load_config(str(py_path))
    assert (config.experiment, config.seed, config.checks[0].check) == ("laplace", 3, LimitCheck.LAPLACIAN)

    with pytest.raises(ConfigInvalidError):
        load_config(str(tmp_path / "smoke.yaml"))


def test_cli_exit_codes(tmp_path, capsys):
    passing = tmp_path / "pass.json"
    passing.write_text(json.dumps(small_config(tmp_path / "pass")))
    assert main(["run", "-c", str(passing)]) == 0
    assert "Results stored in:" in capsys.readouterr().out

    failing = small_config(tmp_path / "fail")
    failing["checks"][1]["arguments"]["tolerance"] = 0.0
    path = tmp_path / "fail.json"
    path.write_text(json.dumps(failing))
    assert main(["run", "-c", str(path)]) == 1

    broken = small_config(tmp_path / "broken")
    broken["checks"][1]["arguments"]["energies"] = [1.9]
    path = tmp_path / "broken.json"
    path.write_text(json.dumps(broken))
    assert main(["run", "-c", str(path)]) == 2
    assert "MODULE_ERROR" in capsys.readouterr().err

    assert main(["run", "-e", "A0"]) == 2


def test_cli_seed_override_is_validated(tmp_path, capsys):
    path = tmp_path / "pass.json"
    path.write_text(json.dumps(small_config(tmp_path)))
    assert main(["run", "-c", str(path), "--seed", "-5"]) == 2
    assert "CONFIG_INVALID" in capsys.readouterr().err


def test_cli_lists_experiments(capsys):
    assert main(["list-experiments"]) == 0
    out = capsys.readouterr().out
    assert "A9 (non-gating)" in out
    assert "LimitCheck.SINE_KERNEL" in out


def test_cli_commands_write_outputs(tmp_path, capsys):
    assert main(["ensemble", "--n", "2", "--W", "3", "--samples", "2", "-o", str(tmp_path / "samples")]) == 0
    assert len(list((tmp_path / "samples").glob("*.json"))) == 2
    assert main(["berezin-check", "--count", "5", "--max-size", "3", "--samples", "20000",
                 "--export", str(tmp_path / "coefficients.json")]) == 0
    with open(tmp_path / "coefficients.json") as fp:
        assert "n1*n2*n1p*n2p" in json.load(fp)
    assert main(["sigma-limit", "--x", "0.5"]) == 0


def read_csv(path):
    with open(path) as fp:
        header = fp.readline().strip()
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def test_cli_spectra_writes_plot_ready_tables(tmp_path, capsys):
    out = tmp_path / "spectra"
    assert main(["spectra", "--n", "4", "--W", "8", "--samples", "20", "--min-count", "10", "--min-pairs", "1",
                 "-o", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["pairs"] > 0
    assert summary["output_dir"] == str(out)

    header, rows = read_csv(out / "spectrum.csv")
    assert header == "sample_id,index,eigenvalue"
    assert rows.shape == (20 * 32, 3)
    assert set(rows[:, 0]) == set(range(20))
    assert np.all(np.diff(rows[rows[:, 0] == 0, 2]) >= 0)

    header, rows = read_csv(out / "gap_ratio.csv")
    assert header == "sample_id,index,ratio"
    assert rows.shape[0] == summary["gap_ratio_count"]
    assert rows[:, 2].mean() == pytest.approx(summary["gap_ratio"])

    header, rows = read_csv(out / "r2_histogram.csv")
    assert header == "bin_center,value,stderr"
    assert rows.shape[1] == 3
    assert rows[0, 0] == pytest.approx(0.025)


def test_det_ratio_trend_table_is_written_as_detratio_csv(tmp_path):
    data = small_config(tmp_path, checks=[
        {"check": "DET_RATIO_TREND", "arguments": {"W_values": [2, 4], "samples": 50, "sigmas": 1e6}}])
    manifest = run_experiment(data)
    tables = [path for path in manifest.artifacts if path.endswith(".csv")]
    assert [os.path.basename(path) for path in tables] == ["bandlab_smoke_{}_00_detratio.csv".format(SEED)]
    header, rows = read_csv(tables[0])
    assert header == "W,Re,Im,stderr_Re,stderr_Im"
    assert list(rows[:, 0]) == [2, 4]


@pytest.mark.slow
@pytest.mark.parametrize("experiment", sorted(cfg.experiments))
def test_default_experiments_pass(experiment, tmp_path):
    manifest = run_experiment(ExperimentConfig.from_experiment(experiment, output_dir=str(tmp_path)))
    assert manifest.passed
