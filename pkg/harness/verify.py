"""Verification suites behind ``main.py verify``.

Each suite maps a seed to one ``TrialResult``; a suite passes when every
trial's error is within its tolerance. Trials are independent, so they may
run on a thread pool; results are always reported in seed order.
"""

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from autograd.backward import backward_matrix_form
from autograd.gradcheck import fd_check_layer
from config.settings import settings
from harness.instances import bridge_instance, dense_instance, fd_instance, random_instance
from layers.dense_nonlocal import dense_forward, dense_forward_reference
from layers.latent_gnn import forward_matrix_form, forward_stepwise
from tensor.matrix import max_abs_diff

logger = logging.getLogger(__name__)

SUITES = ("equivalence", "bridge", "dense-oracle", "gradients")


@dataclass
class TrialResult:
    suite: str
    seed: int
    error: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.error <= self.tolerance


@dataclass
class SuiteReport:
    name: str
    tolerance: float
    trials: list[TrialResult] = field(default_factory=list)

    @property
    def worst(self) -> TrialResult | None:
        return max(self.trials, key=lambda t: t.error, default=None)

    @property
    def max_error(self) -> float:
        return self.worst.error if self.trials else 0.0

    @property
    def failures(self) -> list[TrialResult]:
        return [t for t in self.trials if not t.passed]

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass
class VerifyReport:
    suites: list[SuiteReport]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def suite(self, name: str) -> SuiteReport:
        for s in self.suites:
            if s.name == name:
                return s
        raise KeyError(name)

    def trials(self) -> list[TrialResult]:
        return [t for s in self.suites for t in s.trials]


def check_equivalence(seed: int, tolerance: float) -> TrialResult:
    """Stepwise vs matrix form on a random instance (all kinds, both activations)."""
    inst = random_instance(seed)
    p = inst.params
    err = max_abs_diff(forward_stepwise(inst.x, p).x_aug, forward_matrix_form(inst.x, p))
    kinds = ",".join(k.latent.kind for k in p.kernels)
    detail = f"N={inst.x.shape[0]} c={p.c} c_r={p.c_r} d={list(p.latent_dims)} kinds={kinds} act={p.activation}"
    return TrialResult("equivalence", seed, err, tolerance, detail)


def check_bridge(seed: int, tolerance: float) -> TrialResult:
    """Latent layer with d = N built to reproduce the dense A_sim block."""
    inst = bridge_instance(seed)
    err = max_abs_diff(forward_stepwise(inst.x, inst.latent).x_aug, dense_forward(inst.x, inst.dense))
    return TrialResult("bridge", seed, err, tolerance, f"N={inst.x.shape[0]} {inst.construction}")


def check_dense_oracle(seed: int, tolerance: float) -> TrialResult:
    """Node-by-node scalar loops vs the matrix path of the dense block."""
    inst = dense_instance(seed)
    err = max_abs_diff(dense_forward_reference(inst.x, inst.params), dense_forward(inst.x, inst.params))
    n, c = inst.x.shape
    return TrialResult("dense-oracle", seed, err, tolerance, f"N={n} c={c} {inst.params.variant}")


def check_gradients(seed: int, tolerance: float) -> TrialResult:
    """Analytic backward vs central differences on a kink-guarded instance.

    The error is the worst relative FD error; the two analytic paths
    (stepwise and matrix form) must also agree to within the same bound.
    """
    inst, grads = fd_instance(seed)
    report = fd_check_layer(inst.x, inst.params, inst.upstream, grads)
    other = backward_matrix_form(inst.x, inst.params, inst.upstream)
    path_gap = max(
        float(np.max(np.abs(value - other[name]) / np.maximum(np.abs(value), 1.0)))
        for name, value in grads.with_input().items()
    )
    err = max(report.max_rel_error, path_gap)
    detail = f"worst={report.worst_param}{list(report.worst_index)} entries={report.entries} redraws={inst.redraws}"
    return TrialResult("gradients", seed, err, tolerance, detail)


CHECKS: dict[str, Callable[[int, float], TrialResult]] = {
    "equivalence": check_equivalence,
    "bridge": check_bridge,
    "dense-oracle": check_dense_oracle,
    "gradients": check_gradients,
}


def default_tolerances() -> dict[str, float]:
    return {
        "equivalence": settings.equivalence_tolerance,
        "bridge": settings.equivalence_tolerance,
        "dense-oracle": settings.dense_oracle_tolerance,
        "gradients": settings.gradient_tolerance,
    }


def suite_trials(trials: int) -> dict[str, int]:
    """Trial count per suite: 200 → 200 equivalence, 50 bridge, 100 dense, 50 gradients."""
    return {
        "equivalence": trials,
        "bridge": math.ceil(trials / 4),
        "dense-oracle": math.ceil(trials / 2),
        "gradients": math.ceil(trials / 4),
    }


def run_suite(name: str, seed: int, trials: int, tolerance: float, threads: int = 1) -> SuiteReport:
    check = CHECKS[name]
    seeds = [seed + i for i in range(trials)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: check(s, tolerance), seeds))
    else:
        results = [check(s, tolerance) for s in seeds]
    report = SuiteReport(name=name, tolerance=tolerance, trials=results)
    for t in results:
        logger.debug(f"{name} seed {t.seed}: err {t.error:.3e} {t.detail}", extra={"trial": t.seed})
    for t in report.failures:
        logger.warning(f"{name} failed at seed {t.seed}: err {t.error:.3e} > {tolerance:g} ({t.detail})")
    return report


def verify(
    seed: int,
    trials: int,
    tolerance: float | None = None,
    threads: int = 1,
    suites: tuple[str, ...] = SUITES,
) -> VerifyReport:
    """Run the suites; ``tolerance`` overrides every suite's default."""
    if trials < 1:
        raise ValueError(f"trials must be ≥ 1, got {trials}")
    tolerances = default_tolerances()
    counts = suite_trials(trials)
    reports = []
    for name in suites:
        tol = tolerances[name] if tolerance is None else tolerance
        reports.append(run_suite(name, seed, counts[name], tol, threads))
        logger.info(f"{name}: {counts[name]} trials, max err {reports[-1].max_error:.3e} (tol {tol:g})")
    return VerifyReport(suites=reports)


def format_report(report: VerifyReport) -> str:
    lines = []
    for s in report.suites:
        status = "PASS" if s.passed else "FAIL"
        worst = s.worst
        where = f" at seed {worst.seed} ({worst.detail})" if worst else ""
        lines.append(f"{s.name}: {len(s.trials)} trials, max err {s.max_error:.3e}, tol {s.tolerance:g} {status}{where}")
        if s.failures:
            lines.append(f"  failing seeds: {' '.join(str(t.seed) for t in s.failures)}")
    names = {s.name for s in report.suites}
    if {"equivalence", "gradients"} <= names:
        eq = report.suite("equivalence").max_error
        grad = report.suite("gradients").max_error
        lines.append(f"max equivalence err {eq:.3e}, max grad rel err {grad:.3e}")
    return "\n".join(lines)
