"""Layer and classifier weight files.

Array order inside a bundle: w_in, then per kernel θ (θ_out when the
kernel is two-sided) followed by its latent factor, then w_msg,
mixture_w, w_out and λ.
"""

import logging
from pathlib import Path

import numpy as np

from affinity.latent import LatentAffinity, PsiParams
from layers.dense_nonlocal import DenseNonLocalParams
from layers.latent_gnn import KernelParams, LatentGnnParams
from storage.bundle import read_bundle, write_bundle
from tasks.model import NodeClassifier, Stage

logger = logging.getLogger(__name__)

PACKAGE_VERSION = "0.1.0"


def latent_header(p: LatentGnnParams, prefix: str = "") -> dict[str, object]:
    header: dict[str, object] = {
        f"{prefix}layer": "latentgnn",
        f"{prefix}c": p.c,
        f"{prefix}c_r": p.c_r,
        f"{prefix}activation": p.activation,
        f"{prefix}fixed_lambda": int(p.fixed_lambda),
        f"{prefix}mixture_length": len(p.mixture_w),
    }
    for m, kernel in enumerate(p.kernels):
        header[f"{prefix}kernel{m}.d"] = kernel.d
        header[f"{prefix}kernel{m}.kind"] = kernel.latent.kind
        header[f"{prefix}kernel{m}.psi_activation"] = kernel.psi.activation
        header[f"{prefix}kernel{m}.shared_psi"] = int(kernel.shared)
    return header


def latent_from(header: dict[str, str], arrays: dict[str, np.ndarray], prefix: str = "") -> LatentGnnParams:
    kernels = []
    for m in range(int(header[f"{prefix}mixture_length"])):
        key = f"{prefix}kernel{m}"
        act = header[f"{key}.psi_activation"]
        kind = header[f"{key}.kind"]
        d = int(header[f"{key}.d"])
        theta = PsiParams(arrays[f"{key}.theta"], act)
        theta_out = None if header[f"{key}.shared_psi"] == "1" else PsiParams(arrays[f"{key}.theta_out"], act)
        factor = arrays.get(f"{key}.latent") if kind != "identity" else None
        kernels.append(KernelParams(theta, LatentAffinity(kind=kind, d=d, factor=factor), theta_out))
    return LatentGnnParams(
        w_in=arrays[f"{prefix}w_in"],
        kernels=kernels,
        w_msg=arrays[f"{prefix}w_msg"],
        mixture_w=arrays[f"{prefix}mixture_w"],
        w_out=arrays[f"{prefix}w_out"],
        lam=arrays[f"{prefix}lambda"],
        activation=header[f"{prefix}activation"],
        fixed_lambda=header[f"{prefix}fixed_lambda"] == "1",
    )


def dense_header(p: DenseNonLocalParams, prefix: str = "") -> dict[str, object]:
    return {
        f"{prefix}layer": "dense",
        f"{prefix}c": p.c,
        f"{prefix}variant": p.variant,
        f"{prefix}activation": p.activation,
        f"{prefix}fixed_lambda": int(p.fixed_lambda),
    }


def dense_from(header: dict[str, str], arrays: dict[str, np.ndarray], prefix: str = "") -> DenseNonLocalParams:
    return DenseNonLocalParams(
        w_msg=arrays[f"{prefix}w_msg"],
        variant=header[f"{prefix}variant"],
        activation=header[f"{prefix}activation"],
        lam=arrays[f"{prefix}lambda"],
        fixed_lambda=header[f"{prefix}fixed_lambda"] == "1",
    )


def prefixed(arrays: dict[str, np.ndarray], prefix: str) -> dict[str, np.ndarray]:
    return {f"{prefix}{name}": value for name, value in arrays.items()}


def save_params(path: str | Path, p: LatentGnnParams) -> Path:
    header = {"kind": "latentgnn-layer", "version": PACKAGE_VERSION, **latent_header(p)}
    manifest = write_bundle(path, header, p.named_arrays())
    logger.info(f"Saved layer weights to {manifest}")
    return manifest


def load_params(path: str | Path) -> LatentGnnParams:
    header, arrays = read_bundle(path)
    if header.get("kind") != "latentgnn-layer":
        raise ValueError(f"{path} does not hold a latent layer (kind={header.get('kind')!r})")
    return latent_from(header, arrays)


def save_model(path: str | Path, model: NodeClassifier) -> Path:
    """Classifier weights: per-stage u/b, context layer headers under ``stage{s}.ctx.``, then the head."""
    header: dict[str, object] = {
        "kind": "node-classifier",
        "version": PACKAGE_VERSION,
        "variant": model.variant,
        "stages": len(model.stages),
    }
    for s, stage in enumerate(model.stages):
        if isinstance(stage.context, LatentGnnParams):
            header.update(latent_header(stage.context, f"stage{s}.ctx."))
        elif isinstance(stage.context, DenseNonLocalParams):
            header.update(dense_header(stage.context, f"stage{s}.ctx."))
    manifest = write_bundle(path, header, model.named_arrays())
    logger.info(f"Saved {model.variant} classifier weights to {manifest}")
    return manifest


def load_model(path: str | Path) -> NodeClassifier:
    header, arrays = read_bundle(path)
    if header.get("kind") != "node-classifier":
        raise ValueError(f"{path} does not hold a classifier (kind={header.get('kind')!r})")
    stages = []
    for s in range(int(header["stages"])):
        prefix = f"stage{s}.ctx."
        layer = header.get(f"{prefix}layer")
        if layer == "latentgnn":
            context = latent_from(header, arrays, prefix)
        elif layer == "dense":
            context = dense_from(header, arrays, prefix)
        else:
            context = None
        stages.append(Stage(u=arrays[f"stage{s}.u"], b=arrays[f"stage{s}.b"], context=context))
    return NodeClassifier(
        stages=stages, head_w=arrays["head.w"], head_b=arrays["head.b"], variant=header["variant"]
    )
