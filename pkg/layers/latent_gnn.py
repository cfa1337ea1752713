"""The latent graph layer.

One forward pass runs a fixed three-step schedule over reduced channels
X_r = X·w_in, for every kernel m:

    Z^(m)  = Ψ^(m)ᵀ · (X_r·w_msg)          visible → latent
    Z̃^(m) = F^(m) · Z^(m)                  latent → latent
    C     += w_m · Ψ_out^(m) · Z̃^(m)       latent → visible

then X̃ = h(C)·w_out and X_aug = λ·X̃ + X. The stepwise path never builds an
N×N matrix; the matrix-form path builds A = Σ_m w_m Ψ_out F Ψᵀ explicitly
and exists for verification on small N.
"""

import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from affinity.latent import (
    LATENT_KINDS,
    LatentAffinity,
    PsiParams,
    apply_latent,
    expand_low_rank,
    latent_matrix,
    psi_preactivation,
)
from config.settings import settings
from tensor.errors import CapacityError, DimensionError
from tensor.matrix import ACTIVATIONS, activate, as_matrix, check_finite

logger = logging.getLogger(__name__)

INIT_SCHEMES = ("kaiming-uniform", "small-normal")
SMALL_NORMAL_STD = 0.05


@dataclass
class KernelParams:
    """One low-rank term of the mixture."""

    psi: PsiParams
    latent: LatentAffinity
    psi_out: PsiParams | None = None

    def __post_init__(self):
        if self.latent.d != self.psi.d:
            raise DimensionError(f"psi has d={self.psi.d} but latent affinity has d={self.latent.d}")
        if self.psi_out is not None and self.psi_out.theta.shape != self.psi.theta.shape:
            raise DimensionError(
                f"theta_out {self.psi_out.theta.shape} must match theta {self.psi.theta.shape}"
            )

    @property
    def d(self) -> int:
        return self.psi.d

    @property
    def shared(self) -> bool:
        return self.psi_out is None


@dataclass
class LatentGnnParams:
    w_in: np.ndarray
    kernels: list[KernelParams]
    w_msg: np.ndarray
    mixture_w: np.ndarray
    w_out: np.ndarray
    lam: np.ndarray = field(default_factory=lambda: np.array(0.0))
    activation: str = "relu"
    fixed_lambda: bool = False

    def __post_init__(self):
        self.w_in = as_matrix(self.w_in, "w_in")
        self.w_msg = as_matrix(self.w_msg, "w_msg")
        self.w_out = as_matrix(self.w_out, "w_out")
        self.mixture_w = np.ascontiguousarray(self.mixture_w, dtype=np.float64).reshape(-1)
        self.lam = np.array(self.lam, dtype=np.float64).reshape(())
        check_finite(self.mixture_w, "mixture_w")
        check_finite(self.lam, "lambda")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation: {self.activation!r}")
        if not self.kernels:
            raise ValueError("At least one kernel is required")
        if len(self.mixture_w) != len(self.kernels):
            raise DimensionError(
                f"mixture_w has {len(self.mixture_w)} weights for {len(self.kernels)} kernels"
            )
        c, c_r = self.w_in.shape
        if c_r < 1:
            raise DimensionError("Reduced channel count c_r must be ≥ 1")
        if self.w_msg.shape != (c_r, c_r):
            raise DimensionError(f"w_msg must be {c_r}×{c_r}, got {self.w_msg.shape}")
        if self.w_out.shape != (c_r, c):
            raise DimensionError(f"w_out must be {c_r}×{c}, got {self.w_out.shape}")
        for m, kernel in enumerate(self.kernels):
            if kernel.psi.theta.shape[0] != c_r:
                raise DimensionError(
                    f"kernel {m}: theta has {kernel.psi.theta.shape[0]} rows, expected c_r={c_r}"
                )

    @property
    def c(self) -> int:
        return self.w_in.shape[0]

    @property
    def c_r(self) -> int:
        return self.w_in.shape[1]

    @property
    def latent_dims(self) -> tuple[int, ...]:
        return tuple(k.d for k in self.kernels)

    def named_arrays(self) -> dict[str, np.ndarray]:
        """Live references to every trainable array, in serialization order."""
        arrays = {"w_in": self.w_in}
        for m, kernel in enumerate(self.kernels):
            arrays[f"kernel{m}.theta"] = kernel.psi.theta
            if kernel.psi_out is not None:
                arrays[f"kernel{m}.theta_out"] = kernel.psi_out.theta
            if kernel.latent.factor is not None:
                arrays[f"kernel{m}.latent"] = kernel.latent.factor
        arrays["w_msg"] = self.w_msg
        arrays["mixture_w"] = self.mixture_w
        arrays["w_out"] = self.w_out
        arrays["lambda"] = self.lam
        return arrays

    def trainable_names(self) -> list[str]:
        names = list(self.named_arrays())
        if self.fixed_lambda:
            names.remove("lambda")
        return names

    def copy(self) -> "LatentGnnParams":
        return copy.deepcopy(self)

    def with_arrays(self, arrays: dict[str, np.ndarray]) -> "LatentGnnParams":
        """A deep copy with the named arrays replaced (missing names keep their values)."""
        clone = self.copy()
        live = clone.named_arrays()
        for name, value in arrays.items():
            if name not in live:
                raise KeyError(f"Unknown parameter: {name}")
            value = np.asarray(value, dtype=np.float64)
            if value.shape != live[name].shape:
                raise DimensionError(f"{name}: expected shape {live[name].shape}, got {value.shape}")
            live[name][...] = value
        return clone


@dataclass
class LayerDims:
    """Shape and flavor of one layer, as consumed by ``init_params``."""

    c: int
    c_r: int | None = None
    latent_dims: tuple[int, ...] = (8,)
    latent_kind: str = "identity"
    factor_rank: int | None = None
    activation: str = "relu"
    psi_activation: str = "relu"
    shared_psi: bool = True
    fixed_lambda: bool = False

    def __post_init__(self):
        if self.c_r is None:
            # conventional 4× bottleneck
            self.c_r = max(1, self.c // 4)
        self.latent_dims = tuple(int(d) for d in self.latent_dims)
        if self.c < 1 or self.c_r < 1 or not self.latent_dims or min(self.latent_dims) < 1:
            raise ValueError(f"Layer dims must be positive: {self}")
        if self.latent_kind not in LATENT_KINDS:
            raise ValueError(f"Unknown latent kind: {self.latent_kind!r}")
        if self.factor_rank is not None and self.factor_rank < 1:
            raise ValueError("factor_rank must be ≥ 1")


@dataclass
class KernelTrace:
    pre: np.ndarray
    psi: np.ndarray
    pre_out: np.ndarray | None
    psi_out: np.ndarray | None
    z: np.ndarray
    z_tilde: np.ndarray

    @property
    def receiver(self) -> np.ndarray:
        """The Ψ used by the latent-to-visible step."""
        return self.psi if self.psi_out is None else self.psi_out


@dataclass
class ForwardTrace:
    x: np.ndarray
    x_r: np.ndarray
    msg: np.ndarray
    kernels: list[KernelTrace]
    context: np.ndarray
    hidden: np.ndarray
    x_tilde: np.ndarray
    x_aug: np.ndarray


@dataclass
class MatrixFormTrace:
    x: np.ndarray
    x_r: np.ndarray
    msg: np.ndarray
    kernels: list[KernelTrace]
    terms: list[np.ndarray]
    affinity: np.ndarray
    context: np.ndarray
    hidden: np.ndarray
    x_tilde: np.ndarray
    x_aug: np.ndarray


def _check_input(x, p: LatentGnnParams) -> np.ndarray:
    x = as_matrix(x, "x")
    if x.shape[1] != p.c:
        raise DimensionError(f"x has {x.shape[1]} channels, layer expects c={p.c}")
    return x


def _kernel_front(x_r: np.ndarray, kernel: KernelParams) -> tuple:
    pre = psi_preactivation(x_r, kernel.psi)
    psi_m = activate(pre, kernel.psi.activation)
    if kernel.psi_out is None:
        return pre, psi_m, None, None
    pre_out = psi_preactivation(x_r, kernel.psi_out)
    return pre, psi_m, pre_out, activate(pre_out, kernel.psi_out.activation)


def forward_stepwise(x, p: LatentGnnParams) -> ForwardTrace:
    """Three-step latent message passing; peak extra memory O(N·d + N·c_r)."""
    x = _check_input(x, p)
    x_r = x @ p.w_in
    msg = x_r @ p.w_msg
    context = np.zeros_like(msg)
    traces = []
    for w_m, kernel in zip(p.mixture_w, p.kernels):
        pre, psi_m, pre_out, psi_out = _kernel_front(x_r, kernel)
        z = psi_m.T @ msg
        z_tilde = apply_latent(kernel.latent, z)
        trace = KernelTrace(pre, psi_m, pre_out, psi_out, z, z_tilde)
        context += w_m * (trace.receiver @ z_tilde)
        traces.append(trace)
    hidden = activate(context, p.activation)
    x_tilde = hidden @ p.w_out
    x_aug = p.lam * x_tilde + x
    return ForwardTrace(x, x_r, msg, traces, context, hidden, x_tilde, x_aug)


def forward_matrix_form_trace(x, p: LatentGnnParams, max_nodes: int | None = None) -> MatrixFormTrace:
    x = _check_input(x, p)
    cap = settings.matrix_form_max_nodes if max_nodes is None else max_nodes
    if x.shape[0] > cap:
        raise CapacityError("forward_matrix_form", x.shape[0], cap)
    x_r = x @ p.w_in
    msg = x_r @ p.w_msg
    n = x.shape[0]
    affinity = np.zeros((n, n))
    traces, terms = [], []
    for w_m, kernel in zip(p.mixture_w, p.kernels):
        pre, psi_m, pre_out, psi_out = _kernel_front(x_r, kernel)
        term = expand_low_rank(psi_m, latent_matrix(kernel.latent), psi_out)
        affinity += w_m * term
        terms.append(term)
        traces.append(KernelTrace(pre, psi_m, pre_out, psi_out, z=np.empty((0, 0)), z_tilde=np.empty((0, 0))))
    context = affinity @ msg
    hidden = activate(context, p.activation)
    x_tilde = hidden @ p.w_out
    x_aug = p.lam * x_tilde + x
    return MatrixFormTrace(x, x_r, msg, traces, terms, affinity, context, hidden, x_tilde, x_aug)


def forward_matrix_form(x, p: LatentGnnParams, max_nodes: int | None = None) -> np.ndarray:
    """Same layer through the explicit N×N affinity; refuses N above the cap."""
    return forward_matrix_form_trace(x, p, max_nodes).x_aug


def matrix_form_affinity(x, p: LatentGnnParams, max_nodes: int | None = None) -> np.ndarray:
    return forward_matrix_form_trace(x, p, max_nodes).affinity


def _draw(rng: np.random.Generator, rows: int, cols: int, scheme: str) -> np.ndarray:
    if scheme == "kaiming-uniform":
        bound = np.sqrt(6.0 / rows)
        return rng.uniform(-bound, bound, size=(rows, cols))
    if scheme == "small-normal":
        return rng.normal(0.0, SMALL_NORMAL_STD, size=(rows, cols))
    raise ValueError(f"Unknown init scheme: {scheme!r} (expected one of {INIT_SCHEMES})")


def init_params(rng: np.random.Generator, dims: LayerDims, scheme: str = "kaiming-uniform") -> LatentGnnParams:
    """Fresh layer parameters.

    θ and the W matrices follow ``scheme``; latent factors start at the
    identity, mixture weights at 1/kernels and λ at 0 so the layer is an
    exact identity map until trained.
    """
    c, c_r = dims.c, dims.c_r
    w_in = _draw(rng, c, c_r, scheme)
    kernels = []
    for d in dims.latent_dims:
        theta = PsiParams(_draw(rng, c_r, d, scheme), dims.psi_activation)
        theta_out = None if dims.shared_psi else PsiParams(_draw(rng, c_r, d, scheme), dims.psi_activation)
        if dims.latent_kind == "identity":
            latent = LatentAffinity.identity(d)
        elif dims.latent_kind == "free":
            latent = LatentAffinity.free(np.eye(d))
        else:
            latent = LatentAffinity.symmetric_factor(np.eye(d, dims.factor_rank or d))
        kernels.append(KernelParams(theta, latent, theta_out))
    w_msg = _draw(rng, c_r, c_r, scheme)
    w_out = _draw(rng, c_r, c, scheme)
    k = len(kernels)
    return LatentGnnParams(
        w_in=w_in,
        kernels=kernels,
        w_msg=w_msg,
        mixture_w=np.full(k, 1.0 / k),
        w_out=w_out,
        lam=np.array(0.0),
        activation=dims.activation,
        fixed_lambda=dims.fixed_lambda,
    )
