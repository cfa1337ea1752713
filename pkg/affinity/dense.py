"""Dense pairwise affinities for the fully-connected non-local oracle.

``sim`` is the raw Gram matrix M = X Xᵀ. ``lap`` is the random-walk
normalization D⁻¹M with D_ii = Σ_j M_ij. No softmax anywhere: the raw
products keep the low-rank equivalence exact.
"""

import logging
from dataclasses import dataclass

import numpy as np

from config.settings import settings
from tensor.errors import DimensionError
from tensor.matrix import as_matrix

logger = logging.getLogger(__name__)

VARIANTS = ("sim", "lap")


@dataclass(frozen=True)
class DenseAffinity:
    variant: str
    a: np.ndarray

    @property
    def n(self) -> int:
        return self.a.shape[0]


def gram(x: np.ndarray) -> np.ndarray:
    """M = X Xᵀ, symmetrized bit-exactly from its upper triangle."""
    m = x @ x.T
    upper = np.triu(m)
    return upper + np.triu(m, 1).T


def guarded_degrees(m: np.ndarray, eps: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(degree, keep)`` where ``keep`` marks rows with degree ≥ eps.

    Rows failing the guard are zeroed by the caller instead of being divided
    by a tiny or negative number.
    """
    eps = settings.degree_epsilon if eps is None else eps
    degree = m.sum(axis=1)
    keep = degree >= eps
    return degree, keep


def normalize_rows(m: np.ndarray, eps: float | None = None) -> np.ndarray:
    """D⁻¹M with the degree guard applied.

    A row whose degree D_ii falls below ``eps`` comes out all zero. This is
    not the same as dividing by max(D_ii, eps): that clamp would keep such a
    row, scaled up by 1/eps.
    """
    degree, keep = guarded_degrees(m, eps)
    safe = np.where(keep, degree, 1.0)
    out = m / safe[:, None]
    out[~keep] = 0.0
    dropped = int((~keep).sum())
    if dropped:
        logger.debug(f"A_lap: {dropped} row(s) below the degree guard set to zero")
    return out


def dense_affinity(x, variant: str = "sim", eps: float | None = None) -> DenseAffinity:
    """Build the N×N affinity of a feature set.

    Args:
        x: N×c features.
        variant: ``"sim"`` or ``"lap"``.
        eps: Degree guard for ``lap`` (defaults to ``settings.degree_epsilon``).
    """
    x = as_matrix(x, "x")
    if x.shape[0] < 1:
        raise DimensionError("dense_affinity needs at least one node")
    if variant not in VARIANTS:
        raise ValueError(f"Unknown affinity variant: {variant!r} (expected one of {VARIANTS})")
    m = gram(x)
    if variant == "lap":
        m = normalize_rows(m, eps)
    return DenseAffinity(variant=variant, a=m)
