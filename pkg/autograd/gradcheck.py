"""Central finite differences as an independent referee for backward."""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from config.settings import settings
from layers.dense_nonlocal import DenseNonLocalParams, dense_forward
from layers.latent_gnn import LatentGnnParams, forward_stepwise

logger = logging.getLogger(__name__)

REL_FLOOR = 1e-8


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_FLOOR)


@dataclass
class FDReport:
    per_param: dict[str, float] = field(default_factory=dict)
    worst_param: str | None = None
    worst_index: tuple = ()
    entries: int = 0

    @property
    def max_rel_error(self) -> float:
        return max(self.per_param.values(), default=0.0)

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error <= tolerance


def fd_check(
    f: Callable[[dict[str, np.ndarray]], float],
    params: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    step: float | None = None,
) -> FDReport:
    """Compare ``analytic`` against central differences of ``f``.

    Args:
        f: Scalar function of a dict of named arrays.
        params: Point of evaluation (never mutated).
        analytic: Gradients keyed like ``params``.
        step: Perturbation size (defaults to ``settings.fd_step``).

    Returns:
        Per-parameter max relative error, rel = |a−n| / max(|a|, |n|, 1e-8).
    """
    step = settings.fd_step if step is None else step
    if step <= 0:
        raise ValueError(f"FD step must be positive, got {step}")
    point = {name: np.array(value, dtype=np.float64, copy=True) for name, value in params.items()}
    report = FDReport()
    worst = -1.0
    for name, value in point.items():
        grad = np.asarray(analytic[name], dtype=np.float64)
        if grad.shape != value.shape:
            raise ValueError(f"{name}: analytic shape {grad.shape} != parameter shape {value.shape}")
        param_worst = 0.0
        for index in np.ndindex(value.shape):
            original = value[index]
            value[index] = original + step
            f_plus = f(point)
            value[index] = original - step
            f_minus = f(point)
            value[index] = original
            numeric = (f_plus - f_minus) / (2.0 * step)
            err = relative_error(float(grad[index]), numeric)
            report.entries += 1
            if err > param_worst:
                param_worst = err
            if err > worst:
                worst = err
                report.worst_param = name
                report.worst_index = index
        report.per_param[name] = param_worst
    logger.debug(f"FD check: {report.entries} entries, max rel err {report.max_rel_error:.3e}")
    return report


def _weighted_sum(upstream: np.ndarray) -> Callable[[np.ndarray], float]:
    return lambda out: float(np.sum(upstream * out))


def fd_check_layer(x: np.ndarray, p: LatentGnnParams, upstream: np.ndarray, analytic, step: float | None = None) -> FDReport:
    """FD check of every layer parameter and the input for loss Σ(upstream ⊙ X_aug)."""
    loss = _weighted_sum(upstream)
    template = p.copy()

    def f(arrays):
        layer = template.with_arrays({k: v for k, v in arrays.items() if k != "x"})
        return loss(forward_stepwise(arrays["x"], layer).x_aug)

    point = {**{k: v for k, v in p.named_arrays().items()}, "x": x}
    return fd_check(f, point, analytic.with_input(), step)


def fd_check_dense(x: np.ndarray, p: DenseNonLocalParams, upstream: np.ndarray, analytic, step: float | None = None) -> FDReport:
    loss = _weighted_sum(upstream)

    def f(arrays):
        layer = DenseNonLocalParams(
            w_msg=arrays["w_msg"], variant=p.variant, activation=p.activation, lam=arrays["lambda"]
        )
        return loss(dense_forward(arrays["x"], layer))

    point = {"w_msg": p.w_msg, "lambda": p.lam, "x": x}
    return fd_check(f, point, analytic.with_input(), step)
