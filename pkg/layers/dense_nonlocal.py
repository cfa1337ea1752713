"""Fully-connected non-local block, the quadratic-cost oracle.

X_aug = λ·h(A(X)·X·W) + X with A = A_sim or A_lap built from the raw
features. The same λ-residual wrapper as the latent layer keeps timing and
accuracy comparisons like-for-like.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from affinity.dense import VARIANTS, gram as gram_matrix, normalize_rows
from config.settings import settings
from tensor.errors import CapacityError, DimensionError
from tensor.matrix import ACTIVATIONS, activate, as_matrix, check_finite

logger = logging.getLogger(__name__)


@dataclass
class DenseNonLocalParams:
    w_msg: np.ndarray
    variant: str = "sim"
    activation: str = "relu"
    lam: np.ndarray = field(default_factory=lambda: np.array(0.0))
    fixed_lambda: bool = False

    def __post_init__(self):
        self.w_msg = as_matrix(self.w_msg, "w_msg")
        self.lam = np.array(self.lam, dtype=np.float64).reshape(())
        check_finite(self.lam, "lambda")
        if self.w_msg.shape[0] != self.w_msg.shape[1]:
            raise DimensionError(f"w_msg must be square, got {self.w_msg.shape}")
        if self.variant not in VARIANTS:
            raise ValueError(f"Unknown affinity variant: {self.variant!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation: {self.activation!r}")

    @property
    def c(self) -> int:
        return self.w_msg.shape[0]

    def named_arrays(self) -> dict[str, np.ndarray]:
        return {"w_msg": self.w_msg, "lambda": self.lam}

    def trainable_names(self) -> list[str]:
        return ["w_msg"] if self.fixed_lambda else ["w_msg", "lambda"]


@dataclass
class DenseTrace:
    x: np.ndarray
    gram: np.ndarray
    affinity: np.ndarray
    msg: np.ndarray
    context: np.ndarray
    hidden: np.ndarray
    x_aug: np.ndarray


def init_dense_params(
    rng: np.random.Generator,
    c: int,
    variant: str = "sim",
    activation: str = "relu",
) -> DenseNonLocalParams:
    bound = np.sqrt(6.0 / c)
    return DenseNonLocalParams(
        w_msg=rng.uniform(-bound, bound, size=(c, c)),
        variant=variant,
        activation=activation,
        lam=np.array(0.0),
    )


def _check(x, p: DenseNonLocalParams, max_nodes: int | None) -> np.ndarray:
    x = as_matrix(x, "x")
    if x.shape[1] != p.c:
        raise DimensionError(f"x has {x.shape[1]} channels, W is {p.c}×{p.c}")
    cap = settings.dense_max_nodes if max_nodes is None else max_nodes
    if x.shape[0] > cap:
        raise CapacityError("dense_forward", x.shape[0], cap)
    return x


def dense_forward_trace(
    x, p: DenseNonLocalParams, max_nodes: int | None = None, eps: float | None = None
) -> DenseTrace:
    x = _check(x, p, max_nodes)
    gram = gram_matrix(x)
    affinity = normalize_rows(gram, eps) if p.variant == "lap" else gram
    msg = x @ p.w_msg
    context = affinity @ msg
    hidden = activate(context, p.activation)
    return DenseTrace(x, gram, affinity, msg, context, hidden, p.lam * hidden + x)


def dense_forward(
    x,
    p: DenseNonLocalParams,
    max_nodes: int | None = None,
    block_rows: int | None = None,
    eps: float | None = None,
) -> np.ndarray:
    """Materialize A and return X_aug.

    With ``block_rows`` the affinity is built one row block at a time, so
    memory stays at O(block_rows·N) while the work is unchanged.
    """
    if block_rows is None:
        return dense_forward_trace(x, p, max_nodes, eps).x_aug
    x = _check(x, p, max_nodes)
    msg = x @ p.w_msg
    context = np.empty_like(msg)
    for start in range(0, x.shape[0], block_rows):
        rows = slice(start, start + block_rows)
        block = x[rows] @ x.T
        if p.variant == "lap":
            block = normalize_rows(block, eps)
        context[rows] = block @ msg
    return p.lam * activate(context, p.activation) + x


def dense_forward_reference(x, p: DenseNonLocalParams, eps: float | None = None) -> np.ndarray:
    """Node-by-node evaluation of x̃_i = h((1/Z_i) Σ_j g(x_i, x_j)·Wᵀx_j).

    Plain Python loops over nodes and channels; used only as an oracle for
    the matrix path on small inputs.
    """
    x = as_matrix(x, "x")
    eps = settings.degree_epsilon if eps is None else eps
    n, c = x.shape
    w = p.w_msg
    messages = []
    for j in range(n):
        messages.append([sum(w[k, o] * x[j, k] for k in range(c)) for o in range(c)])
    out = np.empty_like(x)
    for i in range(n):
        g = [sum(x[i, k] * x[j, k] for k in range(c)) for j in range(n)]
        if p.variant == "lap":
            z_i = sum(g)
            g = [gij / z_i for gij in g] if z_i >= eps else [0.0] * n
        acc = [0.0] * c
        for j in range(n):
            for o in range(c):
                acc[o] += g[j] * messages[j][o]
        out[i] = activate(np.array(acc)[None, :], p.activation)[0]
    return float(p.lam) * out + x
