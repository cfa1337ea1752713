"""Visible↔latent and latent↔latent affinities.

ψ(x, θ_k) is a linear map followed by an elementwise activation, so the
whole visible-to-latent affinity is Ψ(X) = act(X·θ) with θ of shape c×d.
The latent-to-latent matrix F is data independent and comes in three
kinds: ``identity`` (implicit I_d), ``free`` (any d×d matrix) and
``symmetric-factor`` (F = Φ·Φᵀ, PSD by construction).
"""

from dataclasses import dataclass

import numpy as np

from tensor.errors import DimensionError
from tensor.matrix import ACTIVATIONS, activate, as_matrix, check_finite, matmul

LATENT_KINDS = ("identity", "free", "symmetric-factor")


@dataclass
class PsiParams:
    theta: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.theta = as_matrix(self.theta, "theta")
        if min(self.theta.shape) < 1:
            raise DimensionError(f"theta needs c ≥ 1 and d ≥ 1, got {self.theta.shape}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"Unknown psi activation: {self.activation!r}")

    @property
    def d(self) -> int:
        return self.theta.shape[1]


@dataclass
class LatentAffinity:
    kind: str
    d: int
    factor: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in LATENT_KINDS:
            raise ValueError(f"Unknown latent kind: {self.kind!r} (expected one of {LATENT_KINDS})")
        if self.d < 1:
            raise DimensionError(f"latent dimension must be ≥ 1, got {self.d}")
        if self.kind == "identity":
            if self.factor is not None:
                raise ValueError("identity latent affinity takes no factor")
            return
        if self.factor is None:
            raise ValueError(f"{self.kind} latent affinity needs a factor matrix")
        self.factor = as_matrix(self.factor, "latent factor")
        if self.kind == "free" and self.factor.shape != (self.d, self.d):
            raise DimensionError(f"free F must be {self.d}×{self.d}, got {self.factor.shape}")
        if self.kind == "symmetric-factor" and self.factor.shape[0] != self.d:
            raise DimensionError(f"Phi must have {self.d} rows, got {self.factor.shape}")

    @classmethod
    def identity(cls, d: int) -> "LatentAffinity":
        return cls(kind="identity", d=d)

    @classmethod
    def free(cls, f) -> "LatentAffinity":
        f = as_matrix(f, "F")
        return cls(kind="free", d=f.shape[0], factor=f)

    @classmethod
    def symmetric_factor(cls, phi) -> "LatentAffinity":
        phi = as_matrix(phi, "Phi")
        return cls(kind="symmetric-factor", d=phi.shape[0], factor=phi)


def psi(x: np.ndarray, p: PsiParams) -> np.ndarray:
    """Ψ = activation(X·θ), one column per latent node."""
    return activate(psi_preactivation(x, p), p.activation)


def psi_preactivation(x: np.ndarray, p: PsiParams) -> np.ndarray:
    if x.shape[1] != p.theta.shape[0]:
        raise DimensionError(
            f"psi: features have {x.shape[1]} channels but theta expects {p.theta.shape[0]}"
        )
    return matmul(x, p.theta)


def latent_matrix(a: LatentAffinity) -> np.ndarray:
    """Materialize the d×d latent-to-latent matrix F."""
    if a.kind == "identity":
        return np.eye(a.d)
    if a.kind == "free":
        return a.factor.copy()
    phi = a.factor
    f = phi @ phi.T
    # bit-exact symmetry
    return np.triu(f) + np.triu(f, 1).T


def apply_latent(a: LatentAffinity, z: np.ndarray) -> np.ndarray:
    """Z̃ = F·Z without building F for the identity kind."""
    if z.shape[0] != a.d:
        raise DimensionError(f"latent features have {z.shape[0]} rows, F is {a.d}×{a.d}")
    if a.kind == "identity":
        return z.copy()
    if a.kind == "symmetric-factor":
        return a.factor @ (a.factor.T @ z)
    return a.factor @ z


def expand_low_rank(psi_m: np.ndarray, f: np.ndarray, psi_out: np.ndarray | None = None) -> np.ndarray:
    """Dense A = Ψ_out·F·Ψᵀ (Ψ_out defaults to Ψ); rank ≤ d."""
    psi_out = psi_m if psi_out is None else psi_out
    if f.shape != (psi_m.shape[1], psi_m.shape[1]) or psi_out.shape != psi_m.shape:
        raise DimensionError(
            f"expand_low_rank: Ψ {psi_m.shape}, Ψ_out {psi_out.shape}, F {f.shape} are inconsistent"
        )
    check_finite(f, "F")
    return (psi_out @ f) @ psi_m.T
