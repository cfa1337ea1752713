"""
Tests for harness/cli.py and analytics/export.py.
"""

import subprocess

import pytest

from analytics import export
from analytics.export import read_csv_body, render_csv, version_string
from harness.cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, FLOPS_FIELDS, TRAIN_FIELDS, main
from harness.scaling import RECORD_FIELDS, TIMING_FIELDS
from storage.datasets import load_dataset
from storage.weights import PACKAGE_VERSION, load_model

TRAIN_ARGS = ["--steps", "4", "--train-count", "6", "--eval-count", "4", "--batch-size", "2", "--c", "4"]


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


class TestExport:
    def test_layout(self):
        """Comment line, header, rows; None renders empty; lists join with ';'."""
        text = render_csv(["a", "b"], [{"a": 1, "b": None}], {"d": [8, 8]})
        lines = text.split("\n")
        assert lines[0].startswith("# version=")
        assert lines[0].endswith("d=8;8")
        assert lines[1:] == ["a,b", "1,", ""]

    def test_version_fallback(self, monkeypatch):
        """Without git the package version is used."""
        def broken(*args, **kwargs):
            raise OSError("no git")

        monkeypatch.setattr(export.subprocess, "run", broken)
        assert version_string() == PACKAGE_VERSION

    def test_version_from_git(self, monkeypatch):
        monkeypatch.setattr(
            export.subprocess,
            "run",
            lambda *a, **k: subprocess.CompletedProcess(a, 0, stdout="v1.2-3-gabc\n", stderr=""),
        )
        assert version_string() == "v1.2-3-gabc"


# ---------------------------------------------------------------------------
# flops
# ---------------------------------------------------------------------------


class TestFlopsCommand:
    def test_single_kernel_anchor(self, tmp_path):
        """c=1024, c_r=256, d=100: context parameters 101,138."""
        out = tmp_path / "flops.csv"
        code = main(["flops", "--n", "16384", "--c", "1024", "--cr", "256", "--d", "100", "--out", str(out)])
        assert code == EXIT_OK
        (row,) = read_csv_body(out)
        assert list(row) == FLOPS_FIELDS
        assert row["params_context"] == "101138"
        assert float(row["ratio"]) == pytest.approx(int(row["dense_flops"]) / int(row["latent_flops"]), rel=1e-6)

    def test_stdout(self, capsys):
        """Without --out the CSV goes to stdout."""
        assert main(["flops", "--n", "1,2", "--c", "1", "--cr", "1", "--d", "1"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("# version=")
        assert lines[1] == ",".join(FLOPS_FIELDS)
        assert lines[2].startswith("1,1,1,1,1,14,")

    def test_kernels_repeat_d(self, tmp_path):
        out = tmp_path / "flops.csv"
        assert main(["flops", "--n", "64", "--c", "8", "--d", "4", "--kernels", "3", "--out", str(out)]) == EXIT_OK
        assert read_csv_body(out)[0]["d"] == "4;4;4"

    def test_kernel_count_mismatch(self):
        assert main(["flops", "--d", "4,4", "--kernels", "3"]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


class TestVerifyCommand:
    def test_small_run_passes(self, tmp_path, capsys):
        out = tmp_path / "verify.csv"
        assert main(["verify", "--trials", "4", "--seed", "3", "--out", str(out)]) == EXIT_OK
        assert "max equivalence err" in capsys.readouterr().out
        rows = read_csv_body(out)
        assert len(rows) == 4 + 1 + 2 + 1
        assert all(r["passed"] == "1" for r in rows)

    def test_zero_tolerance_fails(self):
        assert main(["verify", "--trials", "1", "--suites", "gradients", "--tolerance", "0"]) == EXIT_FAILED

    def test_threads(self):
        assert main(["verify", "--trials", "4", "--suites", "equivalence", "--threads", "2"]) == EXIT_OK

    @pytest.mark.parametrize(
        "argv",
        [
            ["verify", "--trials", "0"],
            ["verify", "--suites", "nonsense"],
            ["verify", "--tolerance", "-1"],
            ["verify", "--threads", "0"],
            ["frobnicate"],
        ],
    )
    def test_usage_errors(self, argv):
        assert main(argv) == EXIT_USAGE


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


class TestBenchCommand:
    ARGS = ["bench", "--n", "32,64,128", "--dense-n", "16,32", "--c", "4", "--d", "2", "--repeats", "5"]

    def test_writes_records(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        assert main(self.ARGS + ["--out", str(out)]) == EXIT_OK
        rows = read_csv_body(out)
        assert list(rows[0]) == RECORD_FIELDS
        assert [(r["variant"], r["n"]) for r in rows] == [
            ("latentgnn", "32"), ("latentgnn", "64"), ("latentgnn", "128"), ("dense", "16"), ("dense", "32"),
        ]
        assert "latentgnn log-log slope" in capsys.readouterr().out

    def test_deterministic_apart_from_timings(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        main(self.ARGS + ["--out", str(first)])
        main(self.ARGS + ["--out", str(second)])
        assert read_csv_body(first, TIMING_FIELDS) == read_csv_body(second, TIMING_FIELDS)

    def test_variant_filter(self, tmp_path):
        out = tmp_path / "bench.csv"
        assert main(self.ARGS + ["--variant", "dense", "--out", str(out)]) == EXIT_OK
        assert {r["variant"] for r in read_csv_body(out)} == {"dense"}

    def test_dense_cap(self, tmp_path):
        out = tmp_path / "bench.csv"
        assert main(self.ARGS + ["--variant", "dense", "--dense-cap", "16", "--out", str(out)]) == EXIT_OK
        assert [r["n"] for r in read_csv_body(out)] == ["16"]

    def test_too_few_repeats(self):
        assert main(["bench", "--n", "32", "--repeats", "4"]) == EXIT_USAGE

    def test_unwritable_output(self, tmp_path):
        out = tmp_path / "missing" / "bench.csv"
        assert main(["bench", "--n", "32", "--variant", "latentgnn", "--c", "4", "--d", "2", "--out", str(out)]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


class TestTrainCommand:
    def test_loss_curve_csv(self, tmp_path):
        out = tmp_path / "train.csv"
        assert main(["train", *TRAIN_ARGS, "--out", str(out)]) == EXIT_OK
        rows = read_csv_body(out)
        assert list(rows[0]) == TRAIN_FIELDS
        assert [r["step"] for r in rows] == ["0", "1", "2", "3"]
        assert rows[-1]["eval_accuracy"] != ""

    def test_deterministic(self, tmp_path):
        """Same seed and flags → byte-identical CSV."""
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["train", *TRAIN_ARGS, "--seed", "7", "--out", str(first)])
        main(["train", *TRAIN_ARGS, "--seed", "7", "--out", str(second)])
        assert first.read_text(encoding="utf-8") == second.read_text(encoding="utf-8")

    def test_weights_and_dataset(self, tmp_path):
        weights, data = tmp_path / "model", tmp_path / "data"
        argv = ["train", *TRAIN_ARGS, "--kernels", "2", "--d", "3",
                "--out", str(tmp_path / "t.csv"), "--weights", str(weights), "--save-dataset", str(data)]
        assert main(argv) == EXIT_OK
        model = load_model(weights)
        assert model.variant == "+latentgnn"
        assert model.stages[0].context.latent_dims == (3, 3)
        assert len(load_dataset(data)) == 6
        assert len(load_dataset(f"{data}-eval")) == 4

    @pytest.mark.parametrize("variant", ["local-only", "+dense-nl"])
    def test_variants(self, tmp_path, variant):
        assert main(["train", *TRAIN_ARGS, "--variant", variant, "--out", str(tmp_path / "t.csv")]) == EXIT_OK

    def test_unknown_preset(self):
        assert main(["train", "--preset", "no-such-preset"]) == EXIT_USAGE

    def test_invalid_config(self):
        """A negative learning rate fails validation with exit code 2."""
        assert main(["train", *TRAIN_ARGS, "--lr", "-1"]) == EXIT_USAGE

    @pytest.mark.parametrize(
        "flags",
        [["--c", "2"], ["--task", "clusters", "--c", "2"]],
    )
    def test_shape_flags_validated(self, flags):
        """Channel counts the task cannot encode are usage errors, not crashes."""
        assert main(["train", *TRAIN_ARGS, *flags]) == EXIT_USAGE

    def test_divergence_exit_code(self, tmp_path):
        """A run that overflows ends with exit code 1 and writes no CSV."""
        out = tmp_path / "t.csv"
        assert main(["train", *TRAIN_ARGS, "--lr", "1e200", "--out", str(out)]) == EXIT_FAILED
        assert not out.exists()
