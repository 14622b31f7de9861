import json
import subprocess
import sys

import pytest

TINY = {
    "schema": "blrhac-config-v1",
    "prefs_per_split": {"train": 2, "eval": 2, "test": 2},
    "episodes_per_pref": {"train": 3, "eval": 2, "test": 2},
    "hidden_dim": 16,
    "num_layers": 2,
    "num_heads": 2,
    "history_len": 5,
    "max_epochs": 2,
    "episodes": 3,
    "switch_at": 1,
}


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "blrhac.cli", *map(str, args)],
        capture_output=True, text=True,
    )


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    out = root / "out"
    base = ["--config", cfg, "--seed", 1, "--out", out]
    assert run_cli("gen-pop", *base).returncode == 0
    assert run_cli("gen-demos", *base).returncode == 0
    assert run_cli("pretrain", *base, "--family", "causal_transformer").returncode == 0
    return cfg, out


class TestPipeline:
    def test_artifacts_and_manifests_exist(self, workdir):
        _, out = workdir
        for name in ("population.json", "demos_train.ndjson", "demos_eval.ndjson",
                     "demos_test.ndjson", "checkpoint_causal_transformer_prior.json"):
            assert (out / name).exists()
            manifest = json.loads((out / (name + ".manifest.json")).read_text())
            assert manifest["seed"] == 1
            assert "duration_s" in manifest and "argv" in manifest

    def test_eval_zero_shot(self, workdir):
        cfg, out = workdir
        r = run_cli("eval-zero-shot", "--config", cfg, "--seed", 1, "--out", out,
                    "--checkpoint", out / "checkpoint_causal_transformer_prior.json")
        assert r.returncode == 0
        report = json.loads((out / "zero_shot_report.json").read_text())
        assert 0.0 <= report["accuracy"] <= 1.0

    def test_adapt_both_protocols(self, workdir):
        cfg, out = workdir
        ckpt = out / "checkpoint_causal_transformer_prior.json"
        for protocol, agents in (("stationary", "linear,blr_hac"), ("nonstationary", "linear")):
            r = run_cli("adapt", "--config", cfg, "--seed", 1, "--out", out,
                        "--protocol", protocol, "--agents", agents, "--checkpoint", ckpt)
            assert r.returncode == 0, r.stderr
            rows = (out / f"adapt_{protocol}.csv").read_text().strip().splitlines()
            assert len(rows) > 1

    def test_flops_report(self, workdir):
        cfg, out = workdir
        assert run_cli("flops", "--config", cfg, "--out", out, "--agent", "linear").returncode == 0
        report = json.loads((out / "flops_report.json").read_text())
        assert report["inference"] == 25 and report["update"] == 50

    def test_sweep(self, workdir):
        cfg, out = workdir
        r = run_cli("sweep", "--config", cfg, "--seed", 1, "--out", out,
                    "--families", "shallow_linear", "--lrs", "0.5")
        assert r.returncode == 0
        rows = (out / "sweep_results.csv").read_text().strip().splitlines()
        assert len(rows) == 3  # header + prior/no-prior
        assert (out / "best_shallow_linear_prior.json").exists()


class TestDeterminism:
    def test_population_and_demos_byte_identical(self, workdir, tmp_path):
        cfg, out = workdir
        rerun = tmp_path / "rerun"
        assert run_cli("gen-pop", "--config", cfg, "--seed", 1, "--out", rerun).returncode == 0
        assert run_cli("gen-demos", "--config", cfg, "--seed", 1, "--out", rerun).returncode == 0
        assert (rerun / "population.json").read_bytes() == (out / "population.json").read_bytes()
        for split in ("train", "eval", "test"):
            name = f"demos_{split}.ndjson"
            assert (rerun / name).read_bytes() == (out / name).read_bytes()

    def test_different_seed_differs(self, workdir, tmp_path):
        cfg, out = workdir
        other = tmp_path / "other"
        assert run_cli("gen-pop", "--config", cfg, "--seed", 2, "--out", other).returncode == 0
        assert (other / "population.json").read_bytes() != (out / "population.json").read_bytes()


class TestExitCodes:
    def test_missing_config_is_config_error(self, tmp_path):
        r = run_cli("gen-pop", "--config", tmp_path / "nope.json", "--out", tmp_path)
        assert r.returncode == 2
        assert "config error" in r.stderr

    def test_missing_checkpoint_is_config_error(self, tmp_path):
        r = run_cli("eval-zero-shot", "--checkpoint", tmp_path / "nope.json", "--out", tmp_path)
        assert r.returncode == 2

    def test_bad_schema_rejected(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"schema": "other-v9"}))
        r = run_cli("gen-pop", "--config", cfg, "--out", tmp_path)
        assert r.returncode == 2

    def test_divergence_is_numeric_error(self, workdir, tmp_path):
        cfg, out = workdir
        r = run_cli("pretrain", "--config", cfg, "--seed", 1, "--out", tmp_path,
                    "--family", "mlp", "--lr", "nan",
                    "--demos-train", out / "demos_train.ndjson",
                    "--demos-eval", out / "demos_eval.ndjson")
        assert r.returncode == 3
        assert "numeric failure" in r.stderr

    def test_unknown_subcommand(self):
        assert run_cli("frobnicate").returncode == 2

    def test_version(self):
        r = run_cli("--version")
        assert r.returncode == 0
