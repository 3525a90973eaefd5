import csv
import json

import pytest

from recourse_forge.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One trained pipeline on disk shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["demo-data", "--out", str(root / "blobs.csv"), "--rows", "400"]) == 0
    config = {
        "data_csv": "blobs.csv",
        "artifacts_dir": "artifacts",
        "blackbox": {"hidden": [8], "epochs": 200, "learning_rate": 0.5, "seed": 7},
        "autoencoder": {"latent_dim": 2, "hidden": [], "epochs": 300,
                        "learning_rate": 0.5, "seed": 7},
        "surrogate": {"seed": 11},
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config))
    assert main(["train", "--config", str(config_path)]) == 0
    assert main(["fit", "--config", str(config_path)]) == 0
    assert main(["demo-data", "--out", str(root / "test.csv"), "--rows", "40",
                 "--seed", "9"]) == 0
    return root, config_path


def bundle_path(workspace):
    return str(workspace[0] / "artifacts" / "bundle.json")


class TestTrainFit:
    def test_artifacts_written(self, workspace):
        root, _ = workspace
        outdir = root / "artifacts"
        for name in ("schema.json", "blackbox.json", "autoencoder.json",
                     "manifest.json", "bundle.json"):
            assert (outdir / name).exists()

    def test_train_idempotent_same_hashes(self, workspace, capsys):
        root, config_path = workspace
        manifest_before = (root / "artifacts" / "manifest.json").read_bytes()
        assert main(["train", "--config", str(config_path)]) == 0
        manifest_after = (root / "artifacts" / "manifest.json").read_bytes()
        assert manifest_before == manifest_after

    def test_missing_csv_exits_2(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"data_csv": "missing.csv"}))
        assert main(["train", "--config", str(config)]) == 2

    def test_missing_config_exits_2(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope.json")]) == 2

    def test_fit_prints_quality_table(self, workspace, capsys):
        root, config_path = workspace
        assert main(["fit", "--config", str(config_path)]) == 0
        out = capsys.readouterr().out
        assert "prediction" in out
        assert "f1" in out and "f2" in out

    def test_fit_refuses_stale_blackbox(self, workspace, tmp_path):
        root, config_path = workspace
        bb_path = root / "artifacts" / "blackbox.json"
        original = bb_path.read_text()
        doc = json.loads(original)
        doc["meta"] = {"stale": True}
        bb_path.write_text(json.dumps(doc))
        try:
            assert main(["fit", "--config", str(config_path)]) == 2
        finally:
            bb_path.write_text(original)
            assert main(["fit", "--config", str(config_path)]) == 0


class TestExplainCommand:
    def test_inline_row_valid_json(self, workspace, capsys):
        row = json.dumps({"f1": 0.32, "f2": 0.31})
        code = main(["explain", "--bundle", bundle_path(workspace), "--row-json", row])
        out = capsys.readouterr().out
        doc = json.loads(out)
        assert code == 0
        assert doc["valid"] is True
        assert doc["counterfactual"] is not None
        assert doc["elapsed_us"] >= 0

    def test_csv_row_by_index(self, workspace, capsys):
        root, _ = workspace
        code = main([
            "explain", "--bundle", bundle_path(workspace),
            "--csv", str(root / "test.csv"), "--index", "3",
        ])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["valid"] is True

    def test_ce2_sparsity_contract(self, workspace, capsys):
        root, _ = workspace
        seen_valid = False
        for idx in range(6):
            code = main([
                "explain", "--bundle", bundle_path(workspace),
                "--csv", str(root / "test.csv"), "--index", str(idx),
                "--variant", "ce2", "--feature", "f2",
            ])
            doc = json.loads(capsys.readouterr().out)
            if code == 0:
                seen_valid = True
                assert doc["valid"] is True
                assert doc["sparsity"] == 1
        assert seen_valid

    def test_unknown_feature_usage_error(self, workspace, capsys):
        code = main([
            "explain", "--bundle", bundle_path(workspace),
            "--row-json", json.dumps({"f1": 0.3, "f2": 0.3}),
            "--variant", "ce2", "--feature", "ghost",
        ])
        assert code == 2

    def test_ce3_free_list(self, workspace, capsys):
        code = main([
            "explain", "--bundle", bundle_path(workspace),
            "--row-json", json.dumps({"f1": 0.35, "f2": 0.3}),
            "--variant", "ce3", "--free", "f1,f2",
        ])
        doc = json.loads(capsys.readouterr().out)
        assert code == 0
        assert set(doc["changed_features"]) <= {"f1", "f2"}
        assert doc["diagnostics"]["input_label"] != doc["diagnostics"]["output_label"]

    def test_missing_row_source(self, workspace):
        assert main(["explain", "--bundle", bundle_path(workspace)]) == 2


class TestEvaluateCommand:
    def test_table_report_and_files(self, workspace, capsys, tmp_path):
        root, _ = workspace
        out = tmp_path / "report"
        code = main([
            "evaluate", "--bundle", bundle_path(workspace),
            "--test-csv", str(root / "test.csv"), "--out", str(out),
        ])
        assert code == 0
        text = capsys.readouterr().out
        assert "validity" in text
        assert (out / "report.json").exists()
        assert (out / "report.txt").exists()
        assert (out / "report_per_case.csv").exists()
        assert (out / "report.png").exists()
        doc = json.loads((out / "report.json").read_text())
        assert doc["validity_pct"] == 100.0

    def test_repeats_prints_mean_and_spread(self, workspace, capsys):
        root, _ = workspace
        code = main([
            "evaluate", "--bundle", bundle_path(workspace),
            "--test-csv", str(root / "test.csv"), "--repeats", "2",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "+-" in out

    def test_robustness_sweep_monotone_and_files(self, workspace, capsys, tmp_path):
        root, _ = workspace
        out = tmp_path / "sweep"
        code = main([
            "evaluate", "--bundle", bundle_path(workspace),
            "--test-csv", str(root / "test.csv"),
            "--d-eps", "0.05,0.3,1.0", "--json", "--out", str(out),
        ])
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        grid = sorted(float(k) for k in doc)
        robustness = [doc[str(d)]["robustness_pct"] for d in grid]
        assert robustness == sorted(robustness)
        assert (out / "robustness.csv").exists()
        assert (out / "robustness.png").exists()
        with (out / "robustness.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["d_eps", "robustness_pct", "mean_proximity", "n_valid"]
        assert len(rows) == 4

    def test_empty_test_csv_exits_2(self, workspace, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("f1,f2,label\n")
        assert main([
            "evaluate", "--bundle", bundle_path(workspace), "--test-csv", str(empty),
        ]) == 2

    def test_misconfigured_variant_fails_fast(self, workspace):
        root, _ = workspace
        code = main([
            "evaluate", "--bundle", bundle_path(workspace),
            "--test-csv", str(root / "test.csv"),
            "--variant", "ce2", "--feature", "ghost",
        ])
        assert code == 2

    def test_env_var_overrides_artifacts_dir(self, workspace, tmp_path, monkeypatch):
        root, config_path = workspace
        override = tmp_path / "elsewhere"
        monkeypatch.setenv("RECOURSE_FORGE_DIR", str(override))
        assert main(["train", "--config", str(config_path)]) == 0
        assert (override / "manifest.json").exists()
