"""
Tests for layers/dense_nonlocal.py -- the fully-connected non-local block.
"""

import numpy as np
import pytest

from affinity.dense import gram
from harness.instances import bridge_instance, dense_instance
from layers.dense_nonlocal import (
    DenseNonLocalParams,
    dense_forward,
    dense_forward_reference,
    dense_forward_trace,
    init_dense_params,
)
from layers.latent_gnn import forward_matrix_form, forward_stepwise
from tensor.errors import CapacityError, DimensionError
from tensor.matrix import max_abs_diff


class TestDenseForward:
    def test_single_node(self):
        """N=1: A_sim = [[‖x‖²]] so X̃ = h(‖x‖²·xW)."""
        x = np.array([[1.0, -2.0]])
        w = np.array([[0.5, 1.0], [0.25, -1.0]])
        p = DenseNonLocalParams(w_msg=w, activation="identity", lam=1.0)
        expected = 5.0 * (x @ w) + x
        assert max_abs_diff(dense_forward(x, p), expected) <= 1e-14

    def test_triple_loop_identity_weights(self, rng):
        """Identity activation, sim, W = I: X̃ should equal Σ_j (x_iᵀx_j) x_j."""
        x = rng.normal(size=(7, 3))
        p = DenseNonLocalParams(w_msg=np.eye(3), activation="identity", lam=1.0)
        expected = np.zeros_like(x)
        for i in range(7):
            for j in range(7):
                expected[i] += float(x[i] @ x[j]) * x[j]
        assert max_abs_diff(dense_forward(x, p) - x, expected) <= 1e-12

    @pytest.mark.parametrize("seed", range(100))
    def test_scalar_loop_oracle(self, seed):
        """The matrix path should equal the node-by-node loops to 1e-12."""
        inst = dense_instance(seed)
        assert max_abs_diff(dense_forward(inst.x, inst.params), dense_forward_reference(inst.x, inst.params)) <= 1e-12

    def test_lap_scaling_invariance(self, rng):
        """Scaling X by α rescales M by α², leaving A_lap unchanged."""
        x = rng.uniform(0.1, 1.0, size=(9, 3))
        trace = dense_forward_trace(x, DenseNonLocalParams(np.eye(3), variant="lap"))
        scaled = dense_forward_trace(2.0 * x, DenseNonLocalParams(np.eye(3), variant="lap"))
        assert np.allclose(trace.affinity, scaled.affinity, rtol=0, atol=1e-15)

    def test_lambda_zero_identity(self, rng):
        """λ = 0 should return X."""
        x = rng.normal(size=(5, 4))
        p = init_dense_params(rng, 4)
        assert np.array_equal(dense_forward(x, p), x)

    def test_cap(self, rng):
        """N above the cap should raise CapacityError."""
        p = init_dense_params(rng, 2)
        with pytest.raises(CapacityError):
            dense_forward(rng.normal(size=(10, 2)), p, max_nodes=8)

    def test_blocked_matches_full(self, rng):
        """Row-blocked evaluation should equal the materialized path."""
        x = rng.uniform(0.1, 1.0, size=(50, 4))
        for variant in ("sim", "lap"):
            p = init_dense_params(rng, 4, variant)
            p.lam[...] = 1.0
            assert max_abs_diff(dense_forward(x, p, block_rows=16), dense_forward(x, p)) <= 1e-12

    def test_channel_mismatch(self, rng):
        """W that does not match the channels should raise DimensionError."""
        with pytest.raises(DimensionError):
            dense_forward(rng.normal(size=(4, 3)), init_dense_params(rng, 2))

    def test_unknown_variant(self):
        """Only sim and lap are supported."""
        with pytest.raises(ValueError):
            DenseNonLocalParams(np.eye(2), variant="gaussian")

    def test_affinity_is_gram(self, rng):
        """The sim trace should carry the exact Gram matrix."""
        x = rng.normal(size=(6, 2))
        trace = dense_forward_trace(x, DenseNonLocalParams(np.eye(2)))
        assert np.array_equal(trace.affinity, gram(x))


class TestBridge:
    @pytest.mark.parametrize("seed", range(30))
    def test_latent_layer_reproduces_dense_block(self, seed):
        """With d = N and ΨFΨᵀ = A_sim, both layers should agree to 1e-10."""
        inst = bridge_instance(seed)
        latent = forward_stepwise(inst.x, inst.latent).x_aug
        assert max_abs_diff(latent, dense_forward(inst.x, inst.dense)) <= 1e-10

    def test_matrix_form_reproduces_dense_block(self):
        """The matrix form should agree with the dense block as well."""
        inst = bridge_instance(3)
        assert max_abs_diff(forward_matrix_form(inst.x, inst.latent), dense_forward(inst.x, inst.dense)) <= 1e-10

    def test_both_constructions_covered(self):
        """The seeds above should exercise both bridge constructions."""
        kinds = {bridge_instance(seed).construction for seed in range(30)}
        assert kinds == {"features", "identity-psi"}
