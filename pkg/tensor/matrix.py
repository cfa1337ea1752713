"""Dense 2-D float64 matrix helpers.

Matrices are plain row-major ``numpy.ndarray`` objects of dtype float64.
Every helper validates shapes, returns a fresh array and never mutates its
inputs, so values can be shared freely across threads.
"""

import numpy as np

from tensor.errors import DimensionError, NonFiniteError

DTYPE = np.float64


def as_matrix(a, name: str = "matrix", check_finite: bool = True) -> np.ndarray:
    """Coerce ``a`` to a C-contiguous float64 2-D array.

    Raises:
        DimensionError: If ``a`` is not 2-D.
        NonFiniteError: If ``check_finite`` and ``a`` holds NaN/Inf.
    """
    arr = np.ascontiguousarray(a, dtype=DTYPE)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if check_finite and not np.isfinite(arr).all():
        raise NonFiniteError(f"{name} contains non-finite entries")
    return arr


def check_finite(a: np.ndarray, name: str) -> None:
    if not np.isfinite(a).all():
        raise NonFiniteError(f"{name} contains non-finite entries")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Standard product of an m×k and a k×n matrix."""
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    return a @ b


def matmul_tn(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``aᵀ · b`` without materializing the transpose."""
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"matmul_tn row counts differ: {a.shape} vs {b.shape}")
    return a.T @ b


def transpose(a: np.ndarray) -> np.ndarray:
    """Materialized transpose (row-major copy)."""
    return np.ascontiguousarray(a.T)


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise DimensionError(f"add shapes differ: {a.shape} vs {b.shape}")
    return a + b


def scale(a: np.ndarray, s: float) -> np.ndarray:
    return a * float(s)


def row_sums(a: np.ndarray) -> np.ndarray:
    if a.ndim != 2:
        raise DimensionError(f"row_sums needs a 2-D matrix, got {a.shape}")
    return a.sum(axis=1)


def relu(a: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(a, 0.0)


def relu_mask(pre: np.ndarray) -> np.ndarray:
    """Derivative of relu at ``pre``; the subgradient at 0 is 0."""
    return (pre > 0.0).astype(DTYPE)


ACTIVATIONS = ("relu", "identity")


def activate(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return relu(a)
    if kind == "identity":
        return a.copy()
    raise ValueError(f"Unknown activation: {kind!r} (expected one of {ACTIVATIONS})")


def activation_grad(pre: np.ndarray, upstream: np.ndarray, kind: str) -> np.ndarray:
    """Pull ``upstream`` back through ``activate(pre, kind)``."""
    if kind == "relu":
        return upstream * relu_mask(pre)
    if kind == "identity":
        return upstream
    raise ValueError(f"Unknown activation: {kind!r} (expected one of {ACTIVATIONS})")


def max_abs_diff(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise DimensionError(f"cannot compare shapes {a.shape} and {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))
