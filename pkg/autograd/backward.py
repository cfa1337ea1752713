"""Hand-written reverse mode for the latent layer and the dense block.

Every backward returns the gradient of Σ(upstream ⊙ X_aug) with respect to
each parameter and the input. The relu subgradient at 0 is 0.
``backward`` follows the stepwise schedule in reverse; ``backward_matrix_form``
differentiates through the explicit affinity and serves as an independent
chain-rule path.
"""

import logging
from dataclasses import dataclass

import numpy as np

from affinity.dense import guarded_degrees
from affinity.latent import LatentAffinity, latent_matrix
from layers.dense_nonlocal import DenseNonLocalParams, DenseTrace, dense_forward_trace
from layers.latent_gnn import (
    ForwardTrace,
    LatentGnnParams,
    MatrixFormTrace,
    forward_matrix_form_trace,
    forward_stepwise,
)
from tensor.errors import DimensionError, TraceMismatchError
from tensor.matrix import activation_grad, as_matrix

logger = logging.getLogger(__name__)


@dataclass
class GradStore:
    """Gradients keyed exactly like the parameters' ``named_arrays``, plus dX."""

    grads: dict[str, np.ndarray]
    dx: np.ndarray

    def __getitem__(self, name: str) -> np.ndarray:
        if name == "x":
            return self.dx
        return self.grads[name]

    def items(self):
        return self.grads.items()

    def with_input(self) -> dict[str, np.ndarray]:
        return {**self.grads, "x": self.dx}


def _latent_backward(latent: LatentAffinity, z: np.ndarray, d_z_tilde: np.ndarray):
    """Pull dZ̃ back through Z̃ = F·Z; returns (dZ, d_factor or None)."""
    if latent.kind == "identity":
        return d_z_tilde, None
    d_f = d_z_tilde @ z.T
    if latent.kind == "free":
        return latent.factor.T @ d_z_tilde, d_f
    phi = latent.factor
    return phi @ (phi.T @ d_z_tilde), (d_f + d_f.T) @ phi


def _factor_grad(latent: LatentAffinity, d_f: np.ndarray) -> np.ndarray | None:
    if latent.kind == "identity":
        return None
    if latent.kind == "free":
        return d_f
    return (d_f + d_f.T) @ latent.factor


def _check_trace(x: np.ndarray, p: LatentGnnParams, trace) -> None:
    if trace.x.shape != x.shape or not np.array_equal(trace.x, x):
        raise TraceMismatchError("trace was recorded for a different input")
    if len(trace.kernels) != len(p.kernels):
        raise TraceMismatchError(
            f"trace has {len(trace.kernels)} kernels, parameters have {len(p.kernels)}"
        )
    if trace.x_r.shape[1] != p.c_r:
        raise TraceMismatchError(f"trace has c_r={trace.x_r.shape[1]}, parameters have c_r={p.c_r}")
    for m, (kt, kernel) in enumerate(zip(trace.kernels, p.kernels)):
        if kt.psi.shape[1] != kernel.d or (kt.psi_out is None) != kernel.shared:
            raise TraceMismatchError(f"kernel {m} of the trace does not match the parameters")


def _upstream(upstream, x_aug: np.ndarray) -> np.ndarray:
    g = as_matrix(upstream, "upstream")
    if g.shape != x_aug.shape:
        raise DimensionError(f"upstream {g.shape} does not match output {x_aug.shape}")
    return g


def _head(p, trace, g: np.ndarray, grads: dict) -> np.ndarray:
    """Residual, λ, w_out and the context activation; returns dC."""
    grads["lambda"] = np.array(np.sum(g * trace.x_tilde))
    d_x_tilde = float(p.lam) * g
    grads["w_out"] = trace.hidden.T @ d_x_tilde
    d_hidden = d_x_tilde @ p.w_out.T
    return activation_grad(trace.context, d_hidden, p.activation)


def _psi_backward(kernel, kt, x_r, d_psi, d_recv, grads, m, d_xr) -> None:
    """θ (and θ_out) gradients; accumulates into d_xr in place."""
    if kernel.shared:
        d_psi = d_psi + d_recv
    else:
        d_pre_out = activation_grad(kt.pre_out, d_recv, kernel.psi_out.activation)
        grads[f"kernel{m}.theta_out"] = x_r.T @ d_pre_out
        d_xr += d_pre_out @ kernel.psi_out.theta.T
    d_pre = activation_grad(kt.pre, d_psi, kernel.psi.activation)
    grads[f"kernel{m}.theta"] = x_r.T @ d_pre
    d_xr += d_pre @ kernel.psi.theta.T


def _tail(x, p, trace, d_msg, d_xr, g, grads) -> GradStore:
    grads["w_msg"] = trace.x_r.T @ d_msg
    d_xr += d_msg @ p.w_msg.T
    grads["w_in"] = x.T @ d_xr
    dx = g + d_xr @ p.w_in.T
    return GradStore(grads=grads, dx=dx)


def _ordered(p) -> dict:
    return {name: None for name in p.named_arrays()}


def backward(x, p: LatentGnnParams, upstream, trace: ForwardTrace | None = None) -> GradStore:
    """Reverse-mode gradients of the stepwise forward pass."""
    x = as_matrix(x, "x")
    if trace is None:
        trace = forward_stepwise(x, p)
    _check_trace(x, p, trace)
    g = _upstream(upstream, trace.x_aug)
    grads = _ordered(p)

    d_ctx = _head(p, trace, g, grads)
    d_msg = np.zeros_like(trace.msg)
    d_xr = np.zeros_like(trace.x_r)
    mixture = np.empty(len(p.kernels))
    for m, (w_m, kernel, kt) in enumerate(zip(p.mixture_w, p.kernels, trace.kernels)):
        receiver = kt.receiver
        mixture[m] = np.sum(d_ctx * (receiver @ kt.z_tilde))
        d_recv = w_m * (d_ctx @ kt.z_tilde.T)
        d_z_tilde = w_m * (receiver.T @ d_ctx)
        d_z, d_factor = _latent_backward(kernel.latent, kt.z, d_z_tilde)
        if d_factor is not None:
            grads[f"kernel{m}.latent"] = d_factor
        d_psi = trace.msg @ d_z.T
        d_msg += kt.psi @ d_z
        _psi_backward(kernel, kt, trace.x_r, d_psi, d_recv, grads, m, d_xr)
    grads["mixture_w"] = mixture
    return _tail(x, p, trace, d_msg, d_xr, g, grads)


def backward_matrix_form(
    x, p: LatentGnnParams, upstream, trace: MatrixFormTrace | None = None, max_nodes: int | None = None
) -> GradStore:
    """Reverse-mode gradients through A = Σ_m w_m Ψ_out F Ψᵀ (materializes N×N)."""
    x = as_matrix(x, "x")
    if trace is None:
        trace = forward_matrix_form_trace(x, p, max_nodes)
    _check_trace(x, p, trace)
    g = _upstream(upstream, trace.x_aug)
    grads = _ordered(p)

    d_ctx = _head(p, trace, g, grads)
    d_aff = d_ctx @ trace.msg.T
    d_msg = trace.affinity.T @ d_ctx
    d_xr = np.zeros_like(trace.x_r)
    mixture = np.empty(len(p.kernels))
    for m, (w_m, kernel, kt) in enumerate(zip(p.mixture_w, p.kernels, trace.kernels)):
        mixture[m] = np.sum(d_aff * trace.terms[m])
        f = latent_matrix(kernel.latent)
        receiver = kt.receiver
        d_recv = w_m * ((d_aff @ kt.psi) @ f.T)
        d_f = w_m * (receiver.T @ (d_aff @ kt.psi))
        d_psi = w_m * ((d_aff.T @ receiver) @ f)
        d_factor = _factor_grad(kernel.latent, d_f)
        if d_factor is not None:
            grads[f"kernel{m}.latent"] = d_factor
        _psi_backward(kernel, kt, trace.x_r, d_psi, d_recv, grads, m, d_xr)
    grads["mixture_w"] = mixture
    return _tail(x, p, trace, d_msg, d_xr, g, grads)


def dense_backward(
    x,
    p: DenseNonLocalParams,
    upstream,
    trace: DenseTrace | None = None,
    max_nodes: int | None = None,
    eps: float | None = None,
) -> GradStore:
    """Reverse-mode gradients of the dense non-local block, A_lap quotient rule included."""
    x = as_matrix(x, "x")
    if trace is None:
        trace = dense_forward_trace(x, p, max_nodes, eps)
    if trace.x.shape != x.shape or not np.array_equal(trace.x, x):
        raise TraceMismatchError("trace was recorded for a different input")
    g = _upstream(upstream, trace.x_aug)

    grads = {"w_msg": None, "lambda": np.array(np.sum(g * trace.hidden))}
    d_hidden = float(p.lam) * g
    d_ctx = activation_grad(trace.context, d_hidden, p.activation)
    d_aff = d_ctx @ trace.msg.T
    d_msg = trace.affinity.T @ d_ctx
    grads["w_msg"] = x.T @ d_msg
    dx = g + d_msg @ p.w_msg.T
    if p.variant == "lap":
        degree, keep = guarded_degrees(trace.gram, eps)
        safe = np.where(keep, degree, 1.0)
        d_gram = (d_aff - np.sum(d_aff * trace.affinity, axis=1, keepdims=True)) / safe[:, None]
        d_gram[~keep] = 0.0
    else:
        d_gram = d_aff
    dx += (d_gram + d_gram.T) @ x
    return GradStore(grads=grads, dx=dx)
