"""
Tests for harness/verify.py and harness/scaling.py.
"""

import math

import numpy as np
import pytest

from config.settings import settings
from harness.scaling import (
    MIN_REPEATS,
    RECORD_FIELDS,
    bench_dense,
    bench_latent,
    dense_bytes,
    fit_slope,
    run_bench,
    slopes,
    time_call,
)
from harness.verify import (
    SUITES,
    check_bridge,
    check_dense_oracle,
    check_equivalence,
    check_gradients,
    format_report,
    run_suite,
    suite_trials,
    verify,
)
from layers.complexity import dense_flops, flops


# ---------------------------------------------------------------------------
# Verification suites
# ---------------------------------------------------------------------------


class TestChecks:
    @pytest.mark.parametrize("seed", range(5))
    def test_each_check_passes(self, seed):
        """Every suite's check should pass its default tolerance on small seeds."""
        assert check_equivalence(seed, 1e-10).passed
        assert check_bridge(seed, 1e-10).passed
        assert check_dense_oracle(seed, 1e-12).passed
        assert check_gradients(seed, 1e-6).passed

    def test_zero_tolerance_fails_gradients(self):
        """FD never matches to the last bit, so tolerance 0 must fail."""
        assert not check_gradients(0, 0.0).passed

    def test_detail_names_shapes(self):
        assert "N=" in check_equivalence(1, 1e-10).detail


class TestRunSuite:
    def test_trial_counts(self):
        """trials=200 → 200 / 50 / 100 / 50."""
        assert suite_trials(200) == {"equivalence": 200, "bridge": 50, "dense-oracle": 100, "gradients": 50}
        assert suite_trials(1) == {"equivalence": 1, "bridge": 1, "dense-oracle": 1, "gradients": 1}

    def test_threads_keep_seed_order(self):
        """A thread pool must report the same trials, in seed order, as a serial run."""
        serial = run_suite("equivalence", 10, 8, 1e-10, threads=1)
        pooled = run_suite("equivalence", 10, 8, 1e-10, threads=4)
        assert [t.seed for t in pooled.trials] == list(range(10, 18))
        assert [t.error for t in pooled.trials] == [t.error for t in serial.trials]

    def test_verify_all_suites(self):
        """A small run of every suite passes and reports each suite once."""
        report = verify(seed=0, trials=4)
        assert report.passed
        assert [s.name for s in report.suites] == list(SUITES)
        assert len(report.suite("equivalence").trials) == 4
        assert len(report.trials()) == 4 + 1 + 2 + 1

    def test_verify_subset(self):
        report = verify(seed=2, trials=2, suites=("dense-oracle",))
        assert [s.name for s in report.suites] == ["dense-oracle"]

    def test_tolerance_override(self):
        """An explicit tolerance replaces every suite default."""
        report = verify(seed=0, trials=1, tolerance=0.0, suites=("gradients",))
        assert not report.passed
        assert report.suite("gradients").failures[0].seed == 0

    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError):
            verify(seed=0, trials=0)

    def test_format_report(self):
        """The report lists each suite and the combined equivalence/gradient line."""
        text = format_report(verify(seed=0, trials=1, suites=("equivalence", "gradients")))
        assert "equivalence: 1 trials" in text
        assert "PASS" in text
        assert text.splitlines()[-1].startswith("max equivalence err ")

    def test_format_report_lists_failures(self):
        text = format_report(verify(seed=5, trials=1, tolerance=0.0, suites=("gradients",)))
        assert "FAIL" in text
        assert "failing seeds: 5" in text


# ---------------------------------------------------------------------------
# Timing and slope fits
# ---------------------------------------------------------------------------


class TestTiming:
    def test_time_call_warms_up(self):
        """One discarded warm-up call, then ``repeats`` timed calls, sorted."""
        calls = []
        samples = time_call(lambda: calls.append(1), repeats=6)
        assert len(calls) == 7
        assert len(samples) == 6
        assert samples == sorted(samples)

    def test_time_call_needs_five_repeats(self):
        with pytest.raises(ValueError):
            time_call(lambda: None, repeats=MIN_REPEATS - 1)

    def test_fit_slope_exact_power_law(self):
        """t = 3·N² fits slope 2."""
        ns = [64, 128, 256, 512]
        assert fit_slope(ns, [3 * n * n for n in ns]) == pytest.approx(2.0)

    def test_fit_slope_drops_smallest_n(self):
        """An outlier at the smallest N must not bend the fit."""
        ns = [16, 32, 64, 128]
        times = [10**9, 32 * 5, 64 * 5, 128 * 5]
        assert fit_slope(ns, times) == pytest.approx(1.0)

    def test_fit_slope_too_few_points(self):
        assert math.isnan(fit_slope([1, 2], [1, 2]))


class TestBench:
    def test_latent_record(self):
        """Records carry the shape, repeats and the analytic FLOP count."""
        rec = bench_latent(128, 8, 2, [4, 3], repeats=5, seed=0)
        assert (rec.variant, rec.n, rec.kernels, rec.d) == ("latentgnn", 128, 2, "4;3")
        assert rec.analytic_flops == flops(128, 8, 2, [4, 3])
        assert rec.wall_min_ns <= rec.wall_time_ns <= rec.wall_max_ns
        assert list(rec.row()) == RECORD_FIELDS

    def test_dense_record(self):
        rec = bench_dense(64, 4, "lap", repeats=5, seed=0)
        assert rec.analytic_flops == dense_flops(64, 4, "lap")
        assert rec.bytes_peak_estimate > 0

    def test_dense_always_blocked(self, monkeypatch):
        """Dense timing uses row blocks, so the memory estimate holds one block of A."""
        monkeypatch.setattr(settings, "dense_block_rows", 16)
        rec = bench_dense(64, 4, "sim", repeats=5, seed=0)
        assert rec.bytes_peak_estimate == dense_bytes(64, 4, "sim", block_rows=16)
        assert rec.bytes_peak_estimate < dense_bytes(64, 4, "sim")
        small = bench_dense(8, 4, "sim", repeats=5, seed=0)
        assert small.bytes_peak_estimate == dense_bytes(8, 4, "sim")

    def test_run_bench_skips_above_cap(self):
        """Dense sizes over the cap are skipped, latent sizes never are."""
        records = run_bench([32, 64], [16, 64], c=4, c_r=2, latent_dims=[2], repeats=5, dense_cap=32)
        assert [(r.variant, r.n) for r in records] == [("latentgnn", 32), ("latentgnn", 64), ("dense", 16)]

    def test_slopes_per_variant(self):
        records = run_bench([32, 64, 128], [], c=4, c_r=2, latent_dims=[2], repeats=5)
        assert set(slopes(records)) == {"latentgnn"}


@pytest.mark.slow
class TestScalingClaims:
    def test_latent_is_linear(self):
        """Latent forward time grows linearly in N (slope within [0.85, 1.15])."""
        ns = [1024, 2048, 4096, 8192, 16384, 32768, 65536]
        records = run_bench(ns, [], c=64, c_r=16, latent_dims=[64], repeats=5)
        assert 0.85 <= slopes(records)["latentgnn"] <= 1.15

    def test_dense_is_quadratic(self):
        """Dense forward time grows quadratically in N (slope within [1.8, 2.2])."""
        ns = [256, 512, 1024, 2048, 4096]
        records = run_bench([], ns, c=64, c_r=16, latent_dims=[64], repeats=5)
        assert 1.8 <= slopes(records)["dense"] <= 2.2

    def test_speedup_at_16k(self):
        """At N=16384, c=c_r=d=64 the dense block is ≥ 0.05·N/d slower."""
        n, d = 16384, 64
        latent = bench_latent(n, 64, 64, [d], repeats=5, seed=0)
        dense = bench_dense(n, 64, "sim", repeats=5, seed=0, cap=n)
        assert dense.wall_time_ns / latent.wall_time_ns >= 0.05 * n / d
        assert np.isfinite(dense.wall_time_ns)
