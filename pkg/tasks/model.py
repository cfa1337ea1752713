"""Per-node classifier with optional context layers.

Each stage is a per-node linear map + relu (a 1×1 convolution on the
flattened graph, so no information crosses nodes), optionally followed by
a LatentGNN layer or the dense non-local block. A linear head produces
per-node class logits. The local-only variant has zero receptive field
beyond the node, so any accuracy gain comes from the context layers.
"""

import logging
from dataclasses import dataclass

import numpy as np

from autograd.backward import backward, dense_backward
from layers.dense_nonlocal import DenseNonLocalParams, dense_forward_trace, init_dense_params
from layers.latent_gnn import LatentGnnParams, LayerDims, forward_stepwise, init_params
from tensor.matrix import as_matrix, relu, relu_mask
from tensor.rng import make_rng

logger = logging.getLogger(__name__)

VARIANTS = ("local-only", "+latentgnn", "+dense-nl")

# rng stream tags under make_rng(seed, MODEL_TAG, ...); dataset samples use (seed, index)
MODEL_TAG = 0x5EED
BASE_STREAM = 1
CONTEXT_STREAM = 2
BATCH_STREAM = 3


@dataclass
class Stage:
    u: np.ndarray
    b: np.ndarray
    context: LatentGnnParams | DenseNonLocalParams | None = None


@dataclass
class NodeClassifier:
    stages: list[Stage]
    head_w: np.ndarray
    head_b: np.ndarray
    variant: str = "local-only"

    def named_arrays(self) -> dict[str, np.ndarray]:
        arrays = {}
        for s, stage in enumerate(self.stages):
            arrays[f"stage{s}.u"] = stage.u
            arrays[f"stage{s}.b"] = stage.b
            if stage.context is not None:
                for name, value in stage.context.named_arrays().items():
                    arrays[f"stage{s}.ctx.{name}"] = value
        arrays["head.w"] = self.head_w
        arrays["head.b"] = self.head_b
        return arrays

    def trainable_arrays(self) -> dict[str, np.ndarray]:
        arrays = self.named_arrays()
        for s, stage in enumerate(self.stages):
            if stage.context is not None and stage.context.fixed_lambda:
                arrays.pop(f"stage{s}.ctx.lambda")
        return arrays

    @property
    def classes(self) -> int:
        return self.head_w.shape[1]

    def forward(self, x) -> tuple[np.ndarray, list]:
        """Logits (N×K) and the per-stage cache needed by ``backward``."""
        h = as_matrix(x, "x")
        cache = []
        for stage in self.stages:
            h_in = h
            pre = h @ stage.u + stage.b
            h = relu(pre)
            trace = None
            if isinstance(stage.context, LatentGnnParams):
                trace = forward_stepwise(h, stage.context)
                h = trace.x_aug
            elif isinstance(stage.context, DenseNonLocalParams):
                trace = dense_forward_trace(h, stage.context)
                h = trace.x_aug
            cache.append((h_in, pre, trace))
        cache.append(h)
        return h @ self.head_w + self.head_b, cache

    def backward(self, cache: list, d_logits: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients for ``named_arrays`` given dLoss/dlogits."""
        grads: dict[str, np.ndarray] = {}
        h_last = cache[-1]
        grads["head.w"] = h_last.T @ d_logits
        grads["head.b"] = d_logits.sum(axis=0)
        dh = d_logits @ self.head_w.T
        for s in reversed(range(len(self.stages))):
            stage = self.stages[s]
            h_in, pre, trace = cache[s]
            if isinstance(stage.context, LatentGnnParams):
                store = backward(trace.x, stage.context, dh, trace)
            elif isinstance(stage.context, DenseNonLocalParams):
                store = dense_backward(trace.x, stage.context, dh, trace)
            else:
                store = None
            if store is not None:
                for name, value in store.items():
                    grads[f"stage{s}.ctx.{name}"] = value
                dh = store.dx
            d_pre = dh * relu_mask(pre)
            grads[f"stage{s}.u"] = h_in.T @ d_pre
            grads[f"stage{s}.b"] = d_pre.sum(axis=0)
            dh = d_pre @ stage.u.T
        return grads

    def predict(self, x) -> np.ndarray:
        logits, _ = self.forward(x)
        return np.argmax(logits, axis=1)


@dataclass
class StageSpec:
    hidden: int
    c_r: int | None = None
    latent_dims: tuple[int, ...] = (8,)
    latent_kind: str = "identity"


def build_classifier(
    seed: int,
    in_channels: int,
    classes: int,
    stages: list[StageSpec],
    variant: str = "local-only",
    dense_variant: str = "sim",
    init_scheme: str = "kaiming-uniform",
) -> NodeClassifier:
    """Fresh classifier; base weights depend only on ``seed`` and the stage layout."""
    if variant not in VARIANTS:
        raise ValueError(f"Unknown model variant: {variant!r} (expected one of {VARIANTS})")
    base = make_rng(seed, MODEL_TAG, BASE_STREAM)
    built = []
    width = in_channels
    for s, spec in enumerate(stages):
        bound = np.sqrt(6.0 / width)
        u = base.uniform(-bound, bound, size=(width, spec.hidden))
        b = np.zeros(spec.hidden)
        context = None
        if variant == "+latentgnn":
            dims = LayerDims(
                c=spec.hidden, c_r=spec.c_r, latent_dims=tuple(spec.latent_dims), latent_kind=spec.latent_kind
            )
            context = init_params(make_rng(seed, MODEL_TAG, CONTEXT_STREAM, s + 1), dims, init_scheme)
        elif variant == "+dense-nl":
            context = init_dense_params(make_rng(seed, MODEL_TAG, CONTEXT_STREAM, s + 1), spec.hidden, dense_variant)
        built.append(Stage(u=u, b=b, context=context))
        width = spec.hidden
    bound = np.sqrt(6.0 / width)
    head_w = base.uniform(-bound, bound, size=(width, classes))
    return NodeClassifier(stages=built, head_w=head_w, head_b=np.zeros(classes), variant=variant)
