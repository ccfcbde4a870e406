"""End-to-end CLI behaviour via subprocesses: outputs, determinism, exit codes."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

CLI = [sys.executable, "-m", "qsla"]


def run_cli(*args, **kwargs):
    return subprocess.run(CLI + list(args), capture_output=True, text=True,
                          **kwargs)


def tree_bytes(root: Path, exclude=("timings.jsonl",)) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name not in exclude
    }


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "tiny.sigds"
    result = run_cli("gen", "--out", str(out), "--classes", "BPSK,QPSK",
                     "--snrs", "0,18", "--frames-per-cell", "16", "--seed", "5")
    assert result.returncode == 0, result.stderr
    return out


@pytest.fixture(scope="module")
def run_dir(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "r1"
    result = run_cli("train", "--dataset", str(dataset), "--out", str(out),
                     "--variant", "qsla", "--width-scale", "0.0625",
                     "--batch-size", "16", "--max-epochs", "2", "--seed", "3",
                     "--threads", "1")
    assert result.returncode == 0, result.stderr
    return out


class TestHelp:
    @pytest.mark.parametrize("cmd", ["gen", "train", "eval", "gradcheck",
                                     "report"])
    def test_help_lists_flags_with_defaults(self, cmd):
        result = run_cli(cmd, "--help")
        assert result.returncode == 0
        assert "--seed" in result.stdout
        assert "--config" in result.stdout

    def test_top_level_help(self):
        result = run_cli("--help")
        assert result.returncode == 0
        for cmd in ("gen", "train", "eval", "gradcheck", "report"):
            assert cmd in result.stdout


class TestGen:
    def test_outputs_and_crc_printed(self, dataset):
        assert dataset.exists()
        assert dataset.with_suffix(".splits").exists()
        assert Path(str(dataset) + ".run.json").exists()

    def test_same_seed_identical_bytes(self, dataset, tmp_path):
        out = tmp_path / "again.sigds"
        result = run_cli("gen", "--out", str(out), "--classes", "BPSK,QPSK",
                         "--snrs", "0,18", "--frames-per-cell", "16",
                         "--seed", "5")
        assert result.returncode == 0
        assert out.read_bytes() == dataset.read_bytes()
        assert out.with_suffix(".splits").read_bytes() == \
            dataset.with_suffix(".splits").read_bytes()
        assert "crc32: 0x" in result.stdout

    def test_class_filter(self, tmp_path):
        out = tmp_path / "two.sigds"
        result = run_cli("gen", "--out", str(out), "--classes", "BPSK,QPSK",
                         "--snrs", "0", "--frames-per-cell", "10")
        assert result.returncode == 0
        assert "2 classes" in result.stdout

    def test_unknown_class_exits_2(self, tmp_path):
        result = run_cli("gen", "--out", str(tmp_path / "x.sigds"),
                         "--classes", "FOO", "--snrs", "0",
                         "--frames-per-cell", "10")
        assert result.returncode == 2
        assert "config error" in result.stderr


class TestTrain:
    def test_run_directory_contents(self, run_dir):
        assert (run_dir / "config.json").exists()
        assert (run_dir / "final.qslaw").exists()
        assert (run_dir / "final.qslaw.json").exists()
        records = (run_dir / "epochs.jsonl").read_text().splitlines()
        assert len(records) == 2
        assert json.loads(records[0])["epoch"] == 1

    def test_variant_recorded_in_manifest_sidecar(self, run_dir):
        meta = json.loads((run_dir / "final.qslaw.json").read_text())
        assert meta["variant"] == "qsla"
        assert meta["config"]["width_scale"] == 0.0625

    def test_deterministic_rerun(self, dataset, run_dir, tmp_path):
        out = tmp_path / "r2"
        result = run_cli("train", "--dataset", str(dataset), "--out", str(out),
                         "--variant", "qsla", "--width-scale", "0.0625",
                         "--batch-size", "16", "--max-epochs", "2", "--seed", "3",
                         "--threads", "1")
        assert result.returncode == 0, result.stderr
        a = tree_bytes(run_dir)
        b = tree_bytes(out)
        assert set(a) == set(b)
        for name in a:
            assert a[name] == b[name], f"{name} differs between reruns"

    def test_missing_dataset_exits_3_without_outputs(self, tmp_path):
        out = tmp_path / "r3"
        result = run_cli("train", "--dataset", str(tmp_path / "nope.sigds"),
                         "--out", str(out), "--max-epochs", "1")
        assert result.returncode == 3
        assert not out.exists()

    def test_refcnn_variant(self, dataset, tmp_path):
        out = tmp_path / "ref"
        result = run_cli("train", "--dataset", str(dataset), "--out", str(out),
                         "--variant", "refcnn", "--batch-size", "16",
                         "--max-epochs", "1", "--seed", "1")
        assert result.returncode == 0, result.stderr

    def test_unknown_config_key_exits_2(self, dataset, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"model": {"bogus_knob": 3}}))
        result = run_cli("train", "--dataset", str(dataset),
                         "--out", str(tmp_path / "r4"), "--config", str(cfg),
                         "--max-epochs", "1")
        assert result.returncode == 2


class TestEval:
    def test_eval_outputs_and_determinism(self, dataset, run_dir, tmp_path):
        outs = []
        for name in ("e1", "e2"):
            out = tmp_path / name
            result = run_cli("eval", "--manifest", str(run_dir / "final.qslaw"),
                             "--dataset", str(dataset), "--out", str(out),
                             "--threads", "1")
            assert result.returncode == 0, result.stderr
            assert "overall accuracy" in result.stdout
            outs.append(tree_bytes(out))
        assert outs[0].keys() == outs[1].keys()
        for name in outs[0]:
            assert outs[0][name] == outs[1][name], name

    def test_eval_snr_flag(self, dataset, run_dir, tmp_path):
        out = tmp_path / "e_snr"
        result = run_cli("eval", "--manifest", str(run_dir / "final.qslaw"),
                         "--dataset", str(dataset), "--out", str(out),
                         "--snr", "18")
        assert result.returncode == 0, result.stderr
        assert (out / "confusion_18.json").exists()
        assert not (out / "confusion_0.json").exists()
        assert (out / "confusion_all.json").exists()

    def test_wrong_manifest_for_dataset_exits_3(self, dataset, run_dir,
                                                tmp_path):
        # a manifest trained for 2 classes cannot score a 3-class dataset
        other = tmp_path / "three.sigds"
        run_cli("gen", "--out", str(other), "--classes", "BPSK,QPSK,8PSK",
                "--snrs", "0", "--frames-per-cell", "10")
        result = run_cli("eval", "--manifest", str(run_dir / "final.qslaw"),
                         "--dataset", str(other), "--out", str(tmp_path / "e3"))
        assert result.returncode in (2, 3)


class TestGradcheckCommand:
    def test_layer_scope_passes(self):
        result = run_cli("gradcheck", "--scope", "layer", "--seed", "0")
        assert result.returncode == 0
        assert "gradcheck passed" in result.stdout
        for op in ("conv1d", "bilstm", "attention", "batchnorm1d"):
            assert op in result.stdout

    def test_model_scope_passes(self):
        result = run_cli("gradcheck", "--scope", "model", "--seed", "1")
        assert result.returncode == 0
        assert "qsla-reduced-width" in result.stdout

    def test_deterministic_output(self):
        a = run_cli("gradcheck", "--scope", "layer", "--seed", "7")
        b = run_cli("gradcheck", "--scope", "layer", "--seed", "7")
        assert a.stdout == b.stdout


class TestReportCommand:
    def test_full_width_table(self, tmp_path):
        result = run_cli("report", "--width-scale", "1.0", "--out",
                         str(tmp_path))
        assert result.returncode == 0
        blocks = json.loads((tmp_path / "complexity.json").read_text())
        by_variant = {b["variant"]: b for b in blocks}
        assert by_variant["only-attention"]["trainable_parameters"] < \
            by_variant["qsla"]["trainable_parameters"] < \
            by_variant["only-bilstm"]["trainable_parameters"]

    def test_single_variant(self):
        result = run_cli("report", "--variant", "qsla", "--width-scale", "0.5",
                         "--num-classes", "4")
        assert result.returncode == 0
        assert "qsla" in result.stdout


class TestOutputRoot:
    def test_env_var_resolves_relative_paths(self, tmp_path, monkeypatch):
        env = {"QSLA_OUTPUT_ROOT": str(tmp_path)}
        import os

        full_env = dict(os.environ, **env)
        result = subprocess.run(
            CLI + ["gen", "--out", "sub/ds.sigds", "--classes", "BPSK,QPSK",
                   "--snrs", "0", "--frames-per-cell", "10"],
            capture_output=True, text=True, env=full_env)
        assert result.returncode == 0, result.stderr
        assert (tmp_path / "sub" / "ds.sigds").exists()
