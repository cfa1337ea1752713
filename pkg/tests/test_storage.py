"""
Tests for storage/ -- bundle files, weights and datasets.
"""

import numpy as np
import pytest

from layers.latent_gnn import LayerDims, init_params
from storage.bundle import read_bundle, write_bundle
from storage.datasets import load_dataset, save_dataset
from storage.weights import load_model, load_params, save_model, save_params
from tasks.datasets import gen_grid_beacon, gen_point_clusters
from tasks.model import StageSpec, build_classifier


def _bundle_bytes(stem) -> dict[str, bytes]:
    return {
        suffix: stem.with_suffix(suffix).read_bytes()
        for suffix in (".manifest", ".f64", ".i32")
        if stem.with_suffix(suffix).exists()
    }


# ---------------------------------------------------------------------------
# Bundles
# ---------------------------------------------------------------------------


class TestBundle:
    def test_round_trip(self, tmp_path, rng):
        """Header and arrays (scalar, matrix, integer) should come back unchanged."""
        arrays = {"a": rng.normal(size=(3, 2)), "s": np.array(1.5), "k": np.arange(4, dtype=np.int64)}
        write_bundle(tmp_path / "b", {"kind": "test"}, arrays)
        header, loaded = read_bundle(tmp_path / "b")
        assert header["kind"] == "test"
        assert list(loaded) == ["a", "s", "k"]
        assert np.array_equal(loaded["a"], arrays["a"])
        assert loaded["s"].shape == ()
        assert loaded["k"].dtype == np.int32

    def test_accepts_manifest_path(self, tmp_path):
        """Reading through the .manifest path should work too."""
        manifest = write_bundle(tmp_path / "b", {}, {"a": np.ones((1, 1))})
        assert manifest.suffix == ".manifest"
        assert "a" in read_bundle(manifest)[1]

    def test_truncated_blob(self, tmp_path):
        """A short blob should raise ValueError, not return garbage."""
        write_bundle(tmp_path / "b", {}, {"a": np.ones((4, 4))})
        blob = tmp_path / "b.f64"
        blob.write_bytes(blob.read_bytes()[:-8])
        with pytest.raises(ValueError, match="truncated"):
            read_bundle(tmp_path / "b")

    def test_trailing_bytes(self, tmp_path):
        """Extra bytes after the last array should raise ValueError."""
        write_bundle(tmp_path / "b", {}, {"a": np.ones((2, 2))})
        blob = tmp_path / "b.f64"
        blob.write_bytes(blob.read_bytes() + b"\x00" * 8)
        with pytest.raises(ValueError, match="trailing"):
            read_bundle(tmp_path / "b")

    def test_unknown_version(self, tmp_path):
        """A foreign format version should be rejected."""
        (tmp_path / "b.manifest").write_text("format_version=99\n", encoding="utf-8")
        with pytest.raises(ValueError):
            read_bundle(tmp_path / "b")


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------


class TestWeights:
    def test_layer_save_load_save(self, tmp_path, rng):
        """save → load → save should be byte-identical for a two-sided layer."""
        dims = LayerDims(c=6, c_r=3, latent_dims=(2, 4), latent_kind="symmetric-factor", factor_rank=2, shared_psi=False)
        p = init_params(rng, dims)
        p.lam[...] = 0.25
        save_params(tmp_path / "first", p)
        loaded = load_params(tmp_path / "first")
        save_params(tmp_path / "second", loaded)
        first = _bundle_bytes(tmp_path / "first")
        assert first == _bundle_bytes(tmp_path / "second")
        for name, value in p.named_arrays().items():
            assert np.array_equal(loaded.named_arrays()[name], value)

    @pytest.mark.parametrize("variant", ["local-only", "+latentgnn", "+dense-nl"])
    def test_classifier_save_load_save(self, tmp_path, variant):
        """Every classifier variant should survive save → load → save bit-exactly."""
        model = build_classifier(3, 4, 3, [StageSpec(hidden=8, c_r=4, latent_dims=(2,)), StageSpec(hidden=6)], variant)
        save_model(tmp_path / "first", model)
        loaded = load_model(tmp_path / "first")
        save_model(tmp_path / "second", loaded)
        assert _bundle_bytes(tmp_path / "first") == _bundle_bytes(tmp_path / "second")
        x = np.linspace(-1.0, 1.0, 20).reshape(5, 4)
        assert np.array_equal(model.forward(x)[0], loaded.forward(x)[0])

    def test_wrong_kind(self, tmp_path, rng):
        """Loading a layer file as a classifier should raise ValueError."""
        save_params(tmp_path / "layer", init_params(rng, LayerDims(c=4)))
        with pytest.raises(ValueError, match="classifier"):
            load_model(tmp_path / "layer")


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


class TestDatasetFiles:
    def test_beacon_round_trip(self, tmp_path):
        """Features, targets, extras and grid meta should round-trip."""
        data = gen_grid_beacon(5, 3, 4, 4, 3, count=7, start=2)
        save_dataset(tmp_path / "beacon", data)
        loaded = load_dataset(tmp_path / "beacon")
        assert loaded.task == "beacon"
        assert (loaded.seed, loaded.start, loaded.classes) == (5, 2, 3)
        assert loaded.meta == {"h": 3, "w": 4}
        assert np.array_equal(loaded.features, data.features)
        assert np.array_equal(loaded.targets, data.targets)
        assert np.array_equal(loaded.extras["beacon_pos"], data.extras["beacon_pos"])

    def test_clusters_round_trip(self, tmp_path):
        """Point coordinates (3-D extras) should round-trip too."""
        data = gen_point_clusters(8, 24, 3, count=4, c=5)
        save_dataset(tmp_path / "clusters", data)
        loaded = load_dataset(tmp_path / "clusters")
        assert np.array_equal(loaded.extras["points"], data.extras["points"])
        assert np.array_equal(loaded.extras["cluster_sizes"], data.extras["cluster_sizes"])

    def test_wrong_kind(self, tmp_path, rng):
        """A weights file is not a dataset."""
        save_params(tmp_path / "layer", init_params(rng, LayerDims(c=4)))
        with pytest.raises(ValueError, match="dataset"):
            load_dataset(tmp_path / "layer")
