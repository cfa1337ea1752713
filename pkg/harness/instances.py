"""Seeded random problem instances for the verification suites.

Every instance is a pure function of its seed, so a failing trial can be
replayed with ``main.py verify --seed S --trials 1``.
"""

import logging
from dataclasses import dataclass

import numpy as np

from affinity.latent import LATENT_KINDS, LatentAffinity, PsiParams
from autograd.backward import GradStore, backward
from config.settings import settings
from layers.dense_nonlocal import DenseNonLocalParams
from layers.latent_gnn import KernelParams, LatentGnnParams, forward_stepwise
from tensor.matrix import ACTIVATIONS
from tensor.rng import make_rng

logger = logging.getLogger(__name__)

MAX_FD_ATTEMPTS = 500
# FD-safe shapes stay small; at N=16, c=8 some gradient entries shrink to
# central-difference roundoff and the relative error stops meaning anything.
FD_MAX_NODES = 6
FD_MAX_CHANNELS = 4
FD_MAX_KERNELS = 3
FD_MAX_LATENT = 3


@dataclass
class LayerInstance:
    seed: int
    x: np.ndarray
    params: LatentGnnParams
    upstream: np.ndarray
    redraws: int = 0


@dataclass
class DenseInstance:
    seed: int
    x: np.ndarray
    params: DenseNonLocalParams


@dataclass
class BridgeInstance:
    seed: int
    x: np.ndarray
    latent: LatentGnnParams
    dense: DenseNonLocalParams
    construction: str


def _scaled(rng: np.random.Generator, rows: int, cols: int, scale: float = 1.0) -> np.ndarray:
    return scale * rng.uniform(-1.0, 1.0, size=(rows, cols)) / np.sqrt(rows)


def _random_latent(rng: np.random.Generator, d: int, kind: str) -> LatentAffinity:
    if kind == "identity":
        return LatentAffinity.identity(d)
    if kind == "free":
        return LatentAffinity.free(rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d)))
    rank = int(rng.integers(1, d + 1))
    return LatentAffinity.symmetric_factor(rng.normal(0.0, 1.0 / np.sqrt(rank), size=(d, rank)))


def random_layer(
    rng: np.random.Generator,
    c: int,
    c_r: int,
    latent_dims: list[int],
    two_sided_rate: float = 0.25,
    scale: float = 1.0,
) -> LatentGnnParams:
    """Random parameters of every flavor: kinds, activations and ψ sidedness drawn per kernel."""
    kernels = []
    for d in latent_dims:
        kind = LATENT_KINDS[int(rng.integers(len(LATENT_KINDS)))]
        act = ACTIVATIONS[int(rng.integers(len(ACTIVATIONS)))]
        theta = PsiParams(_scaled(rng, c_r, d, scale), act)
        theta_out = PsiParams(_scaled(rng, c_r, d, scale), act) if rng.random() < two_sided_rate else None
        kernels.append(KernelParams(theta, _random_latent(rng, d, kind), theta_out))
    return LatentGnnParams(
        w_in=_scaled(rng, c, c_r, scale),
        kernels=kernels,
        w_msg=_scaled(rng, c_r, c_r, scale),
        mixture_w=rng.uniform(-1.0, 1.0, size=len(latent_dims)),
        w_out=_scaled(rng, c_r, c, scale),
        lam=rng.uniform(-1.0, 1.0),
        activation=ACTIVATIONS[int(rng.integers(len(ACTIVATIONS)))],
    )


def random_instance(
    seed: int,
    max_n: int = 64,
    max_c: int = 16,
    max_kernels: int = 3,
    max_d: int = 8,
    two_sided_rate: float = 0.25,
    scale: float = 1.0,
    stream: tuple[int, ...] = (),
) -> LayerInstance:
    """A layer, an input and an upstream gradient with randomized shapes."""
    rng = make_rng(seed, *stream)
    n = int(rng.integers(2, max_n + 1))
    c = int(rng.integers(1, max_c + 1))
    c_r = int(rng.integers(1, c + 1))
    kernels = int(rng.integers(1, max_kernels + 1))
    # d may reach or exceed N on small graphs
    latent_dims = [int(rng.integers(1, max_d + 1)) for _ in range(kernels)]
    params = random_layer(rng, c, c_r, latent_dims, two_sided_rate, scale)
    x = rng.normal(0.0, scale, size=(n, c))
    upstream = rng.uniform(-1.0, 1.0, size=(n, c))
    return LayerInstance(seed=seed, x=x, params=params, upstream=upstream)


def _pre_activations(inst: LayerInstance) -> list[np.ndarray]:
    trace = forward_stepwise(inst.x, inst.params)
    pres = []
    for kernel, kt in zip(inst.params.kernels, trace.kernels):
        if kernel.psi.activation == "relu":
            pres.append(kt.pre)
            if kt.pre_out is not None:
                pres.append(kt.pre_out)
    if inst.params.activation == "relu":
        pres.append(trace.context)
    return pres


def near_kink(inst: LayerInstance, margin: float | None = None) -> bool:
    """True if any relu input sits within ``margin`` of 0."""
    margin = settings.kink_margin if margin is None else margin
    return any(np.any(np.abs(pre) < margin) for pre in _pre_activations(inst))


def ill_conditioned(grads: GradStore, floor: float | None = None) -> bool:
    """True if some gradient entry is nonzero but below ``floor`` in magnitude."""
    floor = settings.grad_floor if floor is None else floor
    for value in grads.with_input().values():
        magnitude = np.abs(value)
        if np.any((magnitude > 0.0) & (magnitude < floor)):
            return True
    return False


def fd_instance(seed: int, max_attempts: int = MAX_FD_ATTEMPTS) -> tuple[LayerInstance, GradStore]:
    """A small instance safe for central differences, with its analytic gradients.

    Draws are redrawn (stream ``attempt``) until no relu input is near its
    kink and no gradient entry is vanishingly small.
    """
    for attempt in range(max_attempts):
        inst = random_instance(
            seed,
            max_n=FD_MAX_NODES,
            max_c=FD_MAX_CHANNELS,
            max_kernels=FD_MAX_KERNELS,
            max_d=FD_MAX_LATENT,
            scale=0.7,
            stream=(attempt,),
        )
        if near_kink(inst):
            continue
        grads = backward(inst.x, inst.params, inst.upstream)
        if ill_conditioned(grads):
            continue
        inst.redraws = attempt
        return inst, grads
    raise RuntimeError(f"No FD-safe instance for seed {seed} after {max_attempts} draws")


def dense_instance(seed: int, max_n: int = 32, max_c: int = 4) -> DenseInstance:
    rng = make_rng(seed)
    n = int(rng.integers(1, max_n + 1))
    c = int(rng.integers(1, max_c + 1))
    variant = ("sim", "lap")[int(rng.integers(2))]
    if variant == "lap":
        # positive features keep every degree well above the guard
        x = rng.uniform(0.05, 0.5, size=(n, c))
    else:
        x = rng.normal(0.0, 0.5, size=(n, c))
    params = DenseNonLocalParams(
        w_msg=rng.normal(0.0, 1.0 / np.sqrt(c), size=(c, c)),
        variant=variant,
        activation=ACTIVATIONS[int(rng.integers(len(ACTIVATIONS)))],
        lam=rng.uniform(-1.0, 1.0),
    )
    return DenseInstance(seed=seed, x=x, params=params)


def bridge_instance(seed: int, max_n: int = 24) -> BridgeInstance:
    """A single-kernel latent layer with d = N whose Ψ F Ψᵀ equals A_sim(X_r).

    ``features``: c = c_r = d = N, θ = I, F = I, so Ψ = X_r and ΨΨᵀ = X_r X_rᵀ.
    ``identity-psi``: θ = X⁻¹ makes Ψ = I_N and F = A_sim(X) carries the graph.
    Bottleneck maps are identities so the dense block sees the same features.
    """
    rng = make_rng(seed)
    n = int(rng.integers(2, max_n + 1))
    activation = ACTIVATIONS[int(rng.integers(len(ACTIVATIONS)))]
    lam = rng.uniform(-1.0, 1.0)
    w_msg = rng.normal(0.0, 1.0 / np.sqrt(n), size=(n, n))
    if rng.random() < 0.5:
        construction = "features"
        x = rng.normal(0.0, 1.0 / np.sqrt(n), size=(n, n))
        theta = np.eye(n)
        latent = LatentAffinity.identity(n)
    else:
        construction = "identity-psi"
        # well-conditioned X = Q·diag(s) so that θ = X⁻¹ is exact to rounding
        q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        s = rng.uniform(1.0, 2.0, size=n) / np.sqrt(n)
        x = q * s
        theta = (q / s).T
        gram = x @ x.T
        latent = LatentAffinity.free(np.triu(gram) + np.triu(gram, 1).T)
    layer = LatentGnnParams(
        w_in=np.eye(n),
        kernels=[KernelParams(PsiParams(theta, "identity"), latent)],
        w_msg=w_msg,
        mixture_w=np.ones(1),
        w_out=np.eye(n),
        lam=lam,
        activation=activation,
    )
    dense = DenseNonLocalParams(w_msg=w_msg, variant="sim", activation=activation, lam=lam)
    return BridgeInstance(seed=seed, x=x, latent=layer, dense=dense, construction=construction)
