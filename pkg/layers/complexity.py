"""Analytic operation and parameter counts.

FLOPs follow the 2-per-multiply-add convention and count only the matrix
products of a forward pass (activations, mixture scaling and the residual
add are not counted). The formulas below are the contract that the
benchmark's ``analytic_flops`` column reports.

Latent layer, per forward::

    2·N·c·c_r          bottleneck in   (X·w_in)
  + 2·N·c_r·c          bottleneck out  (h(C)·w_out)
  + 2·N·c_r²           message map     (X_r·w_msg)
  + Σ_m 2·N·c_r·d_m    Ψ^(m) = ψ(X_r·θ_m)
      + 2·N·d_m·c_r    Z = Ψᵀ·M        (collect)
      + 2·d_m²·c_r     Z̃ = F·Z         (latent)
      + 2·N·d_m·c_r    Ψ·Z̃             (scatter)

Dense non-local block, per forward::

    2·N²·c (A = X·Xᵀ) + 2·N·c² (X·W) + 2·N²·c (A·XW) [+ N² for the lap normalization]
"""

from dataclasses import dataclass

from tensor.errors import FlopOverflowError

INT64_MAX = (1 << 63) - 1


def _checked(value: int, what: str) -> int:
    if value > INT64_MAX:
        raise FlopOverflowError(f"{what} count {value} exceeds signed 64-bit range")
    return value


def _require_positive(**dims) -> None:
    for name, value in dims.items():
        if value < 1:
            raise ValueError(f"{name} must be positive, got {value}")


def flops(n: int, c: int, c_r: int, latent_dims: tuple[int, ...] | list[int]) -> int:
    """FLOPs of one stepwise latent-layer forward pass (see module docstring)."""
    _require_positive(n=n, c=c, c_r=c_r, kernels=len(latent_dims))
    for d in latent_dims:
        _require_positive(d=d)
    total = 2 * n * c * c_r + 2 * n * c_r * c + 2 * n * c_r * c_r
    for d in latent_dims:
        total += 2 * n * c_r * d + 2 * n * d * c_r + 2 * d * d * c_r + 2 * n * d * c_r
    return _checked(total, "latent FLOP")


def dense_flops(n: int, c: int, variant: str = "sim") -> int:
    """FLOPs of one dense non-local forward pass."""
    _require_positive(n=n, c=c)
    total = 2 * n * n * c + 2 * n * c * c + 2 * n * n * c
    if variant == "lap":
        total += n * n
    return _checked(total, "dense FLOP")


@dataclass(frozen=True)
class ParamCount:
    bottleneck: int
    context: int

    @property
    def total(self) -> int:
        return self.bottleneck + self.context


def param_count(
    c: int,
    c_r: int,
    latent_dims: tuple[int, ...] | list[int],
    latent_kind: str = "free",
    factor_rank: int | None = None,
    shared_psi: bool = True,
) -> ParamCount:
    """Trainable scalars of one latent layer.

    ``bottleneck`` covers w_in and w_out; ``context`` is everything else
    (θ, latent factors, w_msg, mixture weights, λ).
    """
    _require_positive(c=c, c_r=c_r, kernels=len(latent_dims))
    bottleneck = 2 * c * c_r
    context = c_r * c_r + len(latent_dims) + 1
    for d in latent_dims:
        context += c_r * d * (1 if shared_psi else 2)
        if latent_kind == "free":
            context += d * d
        elif latent_kind == "symmetric-factor":
            context += d * (factor_rank or d)
    return ParamCount(bottleneck=_checked(bottleneck, "parameter"), context=_checked(context, "parameter"))


def dense_param_count(c: int) -> int:
    """W (c×c) plus λ."""
    _require_positive(c=c)
    return c * c + 1
