"""
Shared pytest fixtures for the latent graph layer test suite.

Test dependencies: pytest
"""

import numpy as np
import pytest

from affinity.latent import LatentAffinity, PsiParams
from harness.instances import random_instance
from layers.latent_gnn import KernelParams, LatentGnnParams, LayerDims, init_params
from tasks.training import StageConfig, TrainConfig
from tensor.rng import make_rng


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

@pytest.fixture
def rng() -> np.random.Generator:
    """A fixed-seed generator for ad-hoc draws inside a test."""
    return make_rng(1234)


# ---------------------------------------------------------------------------
# Layer instances
# ---------------------------------------------------------------------------

@pytest.fixture
def layer_instance():
    """A random layer with input and upstream gradient (N ≤ 64, c ≤ 16, ≤ 3 kernels)."""
    return random_instance(7)


@pytest.fixture
def two_kernel_params(rng) -> LatentGnnParams:
    """The N=32, c=8, c_r=4, d=3, two-kernel relu layer with λ = 0.5."""
    params = init_params(rng, LayerDims(c=8, c_r=4, latent_dims=(3, 3), latent_kind="free"))
    params.lam[...] = 0.5
    for kernel in params.kernels:
        kernel.latent.factor[...] = rng.normal(0.0, 0.5, size=(3, 3))
    return params


@pytest.fixture
def features(rng) -> np.ndarray:
    """32×8 standard-normal features."""
    return rng.normal(size=(32, 8))


def make_layer(
    theta: np.ndarray,
    latent: LatentAffinity | None = None,
    c: int | None = None,
    activation: str = "identity",
    psi_activation: str = "identity",
    lam: float = 1.0,
    w_msg: np.ndarray | None = None,
) -> LatentGnnParams:
    """Single-kernel layer with identity bottleneck maps (c = c_r)."""
    c_r = theta.shape[0]
    c = c_r if c is None else c
    d = theta.shape[1]
    return LatentGnnParams(
        w_in=np.eye(c, c_r),
        kernels=[KernelParams(PsiParams(theta, psi_activation), latent or LatentAffinity.identity(d))],
        w_msg=np.eye(c_r) if w_msg is None else w_msg,
        mixture_w=np.ones(1),
        w_out=np.eye(c_r, c),
        lam=lam,
        activation=activation,
    )


# ---------------------------------------------------------------------------
# Training configs
# ---------------------------------------------------------------------------

@pytest.fixture
def tiny_config() -> TrainConfig:
    """A beacon run small enough for unit tests (4×4 grid, a few steps)."""
    return TrainConfig(
        task="beacon",
        variant="+latentgnn",
        stages=[StageConfig(hidden=8, c_r=4, latent_dims=[2])],
        steps=6,
        batch_size=2,
        lr=0.05,
        h=4,
        w=4,
        c=4,
        classes=3,
        train_count=10,
        eval_count=6,
        eval_every=3,
        log_every=2,
    )
