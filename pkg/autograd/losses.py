"""Scalar losses over a node-feature matrix."""

from dataclasses import dataclass

import numpy as np

from tensor.errors import DimensionError

LOSS_KINDS = ("sum", "sum-of-squares", "cross-entropy")


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


@dataclass(frozen=True)
class LossFn:
    """``sum``: Σ out; ``sum-of-squares``: Σ out²; ``cross-entropy``: mean
    per-row softmax cross-entropy of logits against integer targets."""

    kind: str = "sum"

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"Unknown loss: {self.kind!r} (expected one of {LOSS_KINDS})")

    def value_and_grad(self, out: np.ndarray, targets: np.ndarray | None = None) -> tuple[float, np.ndarray]:
        if self.kind == "sum":
            return float(out.sum()), np.ones_like(out)
        if self.kind == "sum-of-squares":
            return float(np.sum(out * out)), 2.0 * out
        if targets is None:
            raise ValueError("cross-entropy needs integer targets")
        targets = np.asarray(targets)
        if targets.shape != (out.shape[0],):
            raise DimensionError(f"targets shape {targets.shape} does not match {out.shape[0]} rows")
        logp = log_softmax(out)
        rows = np.arange(out.shape[0])
        loss = -float(logp[rows, targets].mean())
        grad = np.exp(logp)
        grad[rows, targets] -= 1.0
        return loss, grad / out.shape[0]

    def value(self, out: np.ndarray, targets: np.ndarray | None = None) -> float:
        return self.value_and_grad(out, targets)[0]
