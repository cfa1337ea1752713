"""Wall-clock scaling of the latent layer against the dense block.

Each measurement runs one warm-up call that is discarded, then ``repeats``
timed calls on the monotonic ``perf_counter_ns`` clock; the median is the
reported time. Slopes are least-squares fits of log t against log N with
the smallest N left out.
"""

import logging
import time
from collections.abc import Callable
from dataclasses import asdict, dataclass

import numpy as np

from config.settings import settings
from layers.complexity import dense_flops, flops
from layers.dense_nonlocal import dense_forward, init_dense_params
from layers.latent_gnn import LayerDims, forward_stepwise, init_params
from tensor.rng import make_rng

logger = logging.getLogger(__name__)

MIN_REPEATS = 5
BYTES_PER_FLOAT = 8
RECORD_FIELDS = [
    "variant",
    "n",
    "c",
    "c_r",
    "d",
    "kernels",
    "repeats",
    "wall_time_ns",
    "wall_min_ns",
    "wall_max_ns",
    "analytic_flops",
    "bytes_peak_estimate",
]
TIMING_FIELDS = ("wall_time_ns", "wall_min_ns", "wall_max_ns")


@dataclass
class BenchRecord:
    variant: str
    n: int
    c: int
    c_r: int
    d: str
    kernels: int
    repeats: int
    wall_time_ns: int
    wall_min_ns: int
    wall_max_ns: int
    analytic_flops: int
    bytes_peak_estimate: int

    def row(self) -> dict:
        return asdict(self)


def time_call(fn: Callable[[], object], repeats: int) -> list[int]:
    """Warm up once, then time ``repeats`` calls; returns sorted nanoseconds."""
    if repeats < MIN_REPEATS:
        raise ValueError(f"repeats must be ≥ {MIN_REPEATS}, got {repeats}")
    fn()
    samples = []
    for _ in range(repeats):
        start = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - start)
    return sorted(samples)


def latent_bytes(n: int, c: int, c_r: int, latent_dims: list[int]) -> int:
    """Forward working set: X, X_r, messages, context, per-kernel pre/Ψ, X̃ and X_aug."""
    floats = n * c + 3 * n * c_r + sum(2 * n * d + 2 * d * c_r for d in latent_dims) + 2 * n * c
    return floats * BYTES_PER_FLOAT


def dense_bytes(n: int, c: int, variant: str, block_rows: int | None = None) -> int:
    """Forward working set: the affinity (or one row block of it) plus five N×c buffers."""
    rows = n if block_rows is None else min(block_rows, n)
    affinity = rows * n * (2 if variant == "lap" else 1)
    return (affinity + 5 * n * c) * BYTES_PER_FLOAT


def _median(samples: list[int]) -> int:
    return int(np.median(samples))


def bench_latent(
    n: int, c: int, c_r: int, latent_dims: list[int], repeats: int, seed: int
) -> BenchRecord:
    dims = LayerDims(c=c, c_r=c_r, latent_dims=tuple(latent_dims), latent_kind="free")
    params = init_params(make_rng(seed, 0), dims)
    params.lam[...] = 1.0
    x = make_rng(seed, 1, n).normal(size=(n, c))
    samples = time_call(lambda: forward_stepwise(x, params), repeats)
    return BenchRecord(
        variant="latentgnn",
        n=n,
        c=c,
        c_r=c_r,
        d=";".join(str(d) for d in latent_dims),
        kernels=len(latent_dims),
        repeats=repeats,
        wall_time_ns=_median(samples),
        wall_min_ns=samples[0],
        wall_max_ns=samples[-1],
        analytic_flops=flops(n, c, c_r, latent_dims),
        bytes_peak_estimate=latent_bytes(n, c, c_r, latent_dims),
    )


def bench_dense(
    n: int, c: int, variant: str, repeats: int, seed: int, cap: int | None = None
) -> BenchRecord:
    """Time the dense block; every N runs row-blocked (``settings.dense_block_rows``)."""
    cap = settings.dense_max_nodes if cap is None else cap
    block_rows = min(settings.dense_block_rows, n)
    params = init_dense_params(make_rng(seed, 2), c, variant)
    params.lam[...] = 1.0
    x = make_rng(seed, 1, n).normal(size=(n, c))
    samples = time_call(lambda: dense_forward(x, params, max_nodes=cap, block_rows=block_rows), repeats)
    return BenchRecord(
        variant="dense",
        n=n,
        c=c,
        c_r=0,
        d="",
        kernels=0,
        repeats=repeats,
        wall_time_ns=_median(samples),
        wall_min_ns=samples[0],
        wall_max_ns=samples[-1],
        analytic_flops=dense_flops(n, c, variant),
        bytes_peak_estimate=dense_bytes(n, c, variant, block_rows),
    )


def fit_slope(ns: list[int], times_ns: list[int]) -> float:
    """Log-log least-squares slope, excluding the smallest N (timer noise floor).

    Returns NaN when fewer than two points remain.
    """
    pairs = sorted(zip(ns, times_ns))[1:]
    if len(pairs) < 2:
        return float("nan")
    log_n = np.log([p[0] for p in pairs])
    log_t = np.log([max(p[1], 1) for p in pairs])
    return float(np.polyfit(log_n, log_t, 1)[0])


def run_bench(
    latent_ns: list[int],
    dense_ns: list[int],
    c: int,
    c_r: int,
    latent_dims: list[int],
    affinity: str = "sim",
    repeats: int | None = None,
    seed: int = 0,
    dense_cap: int | None = None,
) -> list[BenchRecord]:
    """One record per (variant, N); dense sizes above the cap are skipped."""
    repeats = settings.bench_repeats if repeats is None else repeats
    cap = settings.dense_max_nodes if dense_cap is None else dense_cap
    records = []
    for n in latent_ns:
        rec = bench_latent(n, c, c_r, latent_dims, repeats, seed)
        logger.info(f"latentgnn N={n}: {rec.wall_time_ns / 1e6:.3f} ms", extra={"seed": seed})
        records.append(rec)
    for n in dense_ns:
        if n > cap:
            logger.warning(f"Skipping dense N={n}: above the dense cap {cap}")
            continue
        rec = bench_dense(n, c, affinity, repeats, seed, cap)
        logger.info(f"dense N={n}: {rec.wall_time_ns / 1e6:.3f} ms", extra={"seed": seed})
        records.append(rec)
    return records


def slopes(records: list[BenchRecord]) -> dict[str, float]:
    out = {}
    for variant in ("latentgnn", "dense"):
        rows = [r for r in records if r.variant == variant]
        if rows:
            out[variant] = fit_slope([r.n for r in rows], [r.wall_time_ns for r in rows])
    return out
