"""Command-line interface: exit codes, artifacts, determinism."""

import json
import subprocess
import sys

import pytest

from bridgeda.cli import OUT_ENV, cli_dispatch
from bridgeda.synthdata import read_dataset, read_dataset_groups


def _run(capsys, *argv):
    code = cli_dispatch(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _write_json(path, obj):
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


def _triple_spec(tmp_path, **kw):
    spec = {"n_classes": 3, "n_features": 2, "n_per_domain": 60, "seed": 0}
    spec.update(kw)
    return _write_json(tmp_path / "spec.json", {"triple": spec})


def _run_config(tmp_path, name="run.json", *, train=None, model=None, report=None,
                data=None):
    doc = {
        "data": data or {"triple": {"n_classes": 3, "n_features": 2,
                                    "n_per_domain": 60, "seed": 0}},
        "train": {"seed": 0, "iterations": 25},
    }
    if train:
        doc["train"].update(train)
    if model:
        doc["model"] = model
    if report is not None:
        doc["report"] = report
    return _write_json(tmp_path / name, doc)


class TestUsage:
    def test_no_command_is_usage_error(self, capsys):
        code, _, err = _run(capsys)
        assert code == 1
        assert "usage" in err

    def test_unknown_command_is_usage_error(self, capsys):
        code, _, _ = _run(capsys, "frobnicate")
        assert code == 1

    def test_missing_required_flag_is_usage_error(self, capsys):
        code, _, err = _run(capsys, "gen-data")
        assert code == 1
        assert "--spec" in err

    def test_help_exits_zero(self, capsys):
        code, out, _ = _run(capsys, "--help")
        assert code == 0
        assert "gen-data" in out

    def test_console_module_is_runnable(self):
        proc = subprocess.run(
            [sys.executable, "-m", "bridgeda.cli", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "bridgeda" in proc.stdout


class TestGenData:
    def test_triple_writes_views_and_sealed_labels(self, tmp_path, capsys):
        spec = _triple_spec(tmp_path)
        out = tmp_path / "data"
        code, stdout, _ = _run(capsys, "gen-data", "--spec", spec, "--out", str(out))
        assert code == 0
        written = json.loads(stdout)["written"]
        assert len(written) == 4
        source = read_dataset(out / "source.csv")
        assert source.labels is not None
        assert read_dataset(out / "bridge.csv").labels is None
        sealed = read_dataset_groups(out / "sealed_labels.csv")
        assert set(sealed) == {"bridge", "target"}
        assert all(ds.labels is not None for ds in sealed.values())

    def test_translation_writes_three_point_sets(self, tmp_path, capsys):
        spec = _write_json(tmp_path / "spec.json", {"translation": {
            "source": {"kind": "ring", "radius": 1.0},
            "bridge": {"kind": "ring", "radius": 2.0},
            "target": {"kind": "ring", "radius": 3.0},
            "n_per_domain": 64,
        }})
        out = tmp_path / "pts"
        code, stdout, _ = _run(capsys, "gen-data", "--spec", spec, "--out", str(out))
        assert code == 0
        assert len(json.loads(stdout)["written"]) == 3
        assert read_dataset(out / "target.csv").labels is None

    def test_files_spec_is_rejected(self, tmp_path, capsys):
        spec = _write_json(tmp_path / "spec.json",
                           {"files": {"source": "s", "bridge": "b", "target": "t"}})
        code, _, err = _run(capsys, "gen-data", "--spec", spec, "--out", str(tmp_path))
        assert code == 2
        assert "nothing to generate" in err

    def test_invalid_spec_json_is_validation_error(self, tmp_path, capsys):
        bad = tmp_path / "spec.json"
        bad.write_text("{oops", encoding="utf-8")
        code, _, _ = _run(capsys, "gen-data", "--spec", str(bad), "--out", str(tmp_path))
        assert code == 2

    def test_missing_spec_file_is_validation_error(self, tmp_path, capsys):
        code, _, _ = _run(capsys, "gen-data", "--spec", str(tmp_path / "nope.json"),
                          "--out", str(tmp_path))
        assert code == 2

    def test_out_env_var_is_fallback(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv(OUT_ENV, str(tmp_path / "from-env"))
        code, stdout, _ = _run(capsys, "gen-data", "--spec", _triple_spec(tmp_path))
        assert code == 0
        assert (tmp_path / "from-env" / "source.csv").exists()


class TestMeasure:
    def _dataset(self, tmp_path, capsys):
        out = tmp_path / "data"
        _run(capsys, "gen-data", "--spec", _triple_spec(tmp_path, n_per_domain=120),
             "--out", str(out))
        return out

    def test_self_distance_is_tiny(self, tmp_path, capsys):
        out = self._dataset(tmp_path, capsys)
        src = str(out / "source.csv")
        code, stdout, _ = _run(capsys, "measure", "--a", src, "--b", src,
                               "--metric", "mmd")
        assert code == 0
        doc = json.loads(stdout)
        assert doc["metric"] == "mmd"
        assert len(doc["reports"]) == 1
        assert abs(doc["reports"][0]["mmd2"]) < 1e-8

    def test_three_files_give_bridge_verdict(self, tmp_path, capsys):
        out = self._dataset(tmp_path, capsys)
        code, stdout, _ = _run(
            capsys, "measure",
            "--a", str(out / "source.csv"), "--b", str(out / "bridge.csv"),
            "--c", str(out / "target.csv"), "--metric", "adist",
        )
        assert code == 0
        doc = json.loads(stdout)
        assert len(doc["reports"]) == 3
        assert isinstance(doc["bridge_verdict"], bool)
        pairs = {tuple(r["pair"]) for r in doc["reports"]}
        assert pairs == {("source", "bridge"), ("bridge", "target"), ("source", "target")}

    def test_bad_metric_is_usage_error(self, tmp_path, capsys):
        code, _, _ = _run(capsys, "measure", "--a", "x", "--b", "y",
                          "--metric", "wasserstein")
        assert code == 1


class TestTrain:
    def test_source_only_writes_artifacts(self, tmp_path, capsys):
        cfg = _run_config(tmp_path)
        out = tmp_path / "run"
        code, stdout, _ = _run(capsys, "train", "source-only",
                               "--config", cfg, "--out", str(out))
        assert code == 0
        for name in ("metrics.jsonl", "model.json", "config.json", "curves.svg"):
            assert (out / name).exists(), name
        summary = json.loads(stdout)
        assert summary["records"] == 25
        assert set(summary["accuracy"]) == {"source", "bridge", "target"}

    def test_repeat_runs_are_byte_identical(self, tmp_path, capsys):
        cfg = _run_config(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert _run(capsys, "train", "pada", "--config", cfg, "--out", str(a))[0] == 0
        assert _run(capsys, "train", "pada", "--config", cfg, "--out", str(b))[0] == 0
        for name in ("metrics.jsonl", "model.json", "curves.svg", "config.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_scatter_toggle_adds_figure(self, tmp_path, capsys):
        cfg = _run_config(tmp_path, report={"scatter": True, "curves": False})
        out = tmp_path / "run"
        code, _, _ = _run(capsys, "train", "pada", "--config", cfg, "--out", str(out))
        assert code == 0
        assert (out / "scatter.svg").exists()
        assert not (out / "curves.svg").exists()

    def test_cfgan_on_translation_data(self, tmp_path, capsys):
        cfg = _run_config(
            tmp_path,
            data={"translation": {
                "source": {"kind": "ring", "radius": 1.0},
                "bridge": {"kind": "ring", "radius": 1.5},
                "target": {"kind": "ring", "radius": 2.0},
                "n_per_domain": 64,
            }},
            train={"iterations": 12, "log_every": 6},
        )
        out = tmp_path / "run"
        code, stdout, _ = _run(capsys, "train", "cfgan", "--config", cfg,
                               "--out", str(out))
        assert code == 0
        summary = json.loads(stdout)
        assert "final_losses" in summary
        assert "cycle" in summary["final_losses"]
        doc = json.loads((out / "model.json").read_text(encoding="utf-8"))
        assert doc["kind"] == "translation"

    def test_config_out_dir_and_flag_precedence(self, tmp_path, capsys, monkeypatch):
        monkeypatch.chdir(tmp_path)
        cfg = _run_config(tmp_path, report={"out_dir": "from-config"})
        code, _, _ = _run(capsys, "train", "source-only", "--config", cfg)
        assert code == 0
        assert (tmp_path / "from-config" / "model.json").exists()
        code, _, _ = _run(capsys, "train", "source-only", "--config", cfg,
                          "--out", "from-flag")
        assert code == 0
        assert (tmp_path / "from-flag" / "model.json").exists()

    def test_files_data_round_trip(self, tmp_path, capsys):
        data_dir = tmp_path / "data"
        _run(capsys, "gen-data", "--spec", _triple_spec(tmp_path), "--out", str(data_dir))
        cfg = _run_config(tmp_path, data={"files": {
            "source": str(data_dir / "source.csv"),
            "bridge": str(data_dir / "bridge.csv"),
            "target": str(data_dir / "target.csv"),
        }})
        out = tmp_path / "run"
        code, stdout, _ = _run(capsys, "train", "pada", "--config", cfg,
                               "--out", str(out))
        assert code == 0
        assert json.loads(stdout)["accuracy"]["source"] >= 0.0

    def test_unknown_train_key_is_validation_error(self, tmp_path, capsys):
        cfg = _run_config(tmp_path, train={"alpha": 0.1})
        code, _, err = _run(capsys, "train", "pada", "--config", cfg,
                            "--out", str(tmp_path / "x"))
        assert code == 2
        assert "alpha" in err

    def test_mismatched_method_keys_are_validation_errors(self, tmp_path, capsys):
        cfg = _run_config(tmp_path, train={"cycle_weight": 5.0})
        code, _, err = _run(capsys, "train", "pada", "--config", cfg,
                            "--out", str(tmp_path / "x"))
        assert code == 2
        assert "cycle_weight" in err

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numeric_blowup_is_runtime_error(self, tmp_path, capsys):
        cfg = _run_config(tmp_path, train={"lr": 1e160})
        code, _, err = _run(capsys, "train", "pada", "--config", cfg,
                            "--out", str(tmp_path / "x"))
        assert code == 3
        assert "non-finite" in err


class TestEvalAndPlot:
    @pytest.fixture()
    def trained(self, tmp_path, capsys):
        data_dir = tmp_path / "data"
        _run(capsys, "gen-data", "--spec", _triple_spec(tmp_path), "--out", str(data_dir))
        run_dir = tmp_path / "run"
        cfg = _run_config(tmp_path)
        code, _, _ = _run(capsys, "train", "pada", "--config", cfg, "--out", str(run_dir))
        assert code == 0
        return data_dir, run_dir

    def test_eval_scores_sealed_labels(self, trained, capsys):
        data_dir, run_dir = trained
        code, stdout, _ = _run(capsys, "eval", "--model", str(run_dir),
                               "--data", str(data_dir / "sealed_labels.csv"))
        assert code == 0
        acc = json.loads(stdout)["accuracy"]
        assert set(acc) == {"bridge", "target"}
        assert all(0.0 <= v <= 1.0 for v in acc.values())

    def test_eval_accepts_direct_model_path(self, trained, capsys):
        data_dir, run_dir = trained
        code, _, _ = _run(capsys, "eval", "--model", str(run_dir / "model.json"),
                          "--data", str(data_dir / "sealed_labels.csv"))
        assert code == 0

    def test_eval_rejects_unlabeled_data(self, trained, capsys):
        data_dir, run_dir = trained
        code, _, err = _run(capsys, "eval", "--model", str(run_dir),
                            "--data", str(data_dir / "bridge.csv"))
        assert code == 2
        assert "labeled" in err

    def test_plot_curves_from_log(self, trained, tmp_path, capsys):
        _, run_dir = trained
        out = tmp_path / "curves2.svg"
        code, stdout, _ = _run(capsys, "plot", "--log", str(run_dir / "metrics.jsonl"),
                               "--out", str(out))
        assert code == 0
        assert out.read_text(encoding="utf-8").startswith("<svg")

    def test_plot_scatter_from_dataset(self, trained, tmp_path, capsys):
        data_dir, _ = trained
        out = tmp_path / "scatter2.svg"
        code, _, _ = _run(capsys, "plot", "--log", str(data_dir / "sealed_labels.csv"),
                          "--out", str(out), "--kind", "scatter2d")
        assert code == 0
        assert "data-domain" in out.read_text(encoding="utf-8")

    def test_plot_bars_from_measure_output(self, trained, tmp_path, capsys):
        data_dir, _ = trained
        code, stdout, _ = _run(
            capsys, "measure",
            "--a", str(data_dir / "source.csv"), "--b", str(data_dir / "bridge.csv"),
            "--c", str(data_dir / "target.csv"), "--metric", "adist",
        )
        assert code == 0
        report_path = tmp_path / "measure.json"
        report_path.write_text(stdout, encoding="utf-8")
        out = tmp_path / "bars.svg"
        code, _, _ = _run(capsys, "plot", "--log", str(report_path),
                          "--out", str(out), "--kind", "distance_bars")
        assert code == 0
        assert 'data-metric="adist"' in out.read_text(encoding="utf-8")

    def test_plot_rejects_wrong_payload(self, trained, tmp_path, capsys):
        data_dir, _ = trained
        code, _, _ = _run(capsys, "plot", "--log", str(data_dir / "source.csv"),
                          "--out", str(tmp_path / "x.svg"), "--kind", "distance_bars")
        assert code == 2
