"""Dataset files: manifest + float blob (features) + label blob (targets)."""

import logging
from pathlib import Path

import numpy as np

from storage.bundle import read_bundle, write_bundle
from tasks.datasets import NodeDataset

logger = logging.getLogger(__name__)


def save_dataset(path: str | Path, dataset: NodeDataset) -> Path:
    header = {
        "kind": "node-dataset",
        "task": dataset.task,
        "count": len(dataset),
        "nodes": dataset.nodes,
        "channels": dataset.channels,
        "classes": dataset.classes,
        "seed": dataset.seed,
        "start": dataset.start,
        **{f"meta.{key}": value for key, value in sorted(dataset.meta.items())},
    }
    arrays = {"features": dataset.features, "targets": dataset.targets.astype(np.int32)}
    for name, value in dataset.extras.items():
        arrays[f"extra.{name}"] = value.astype(np.int32) if np.issubdtype(value.dtype, np.integer) else value
    manifest = write_bundle(path, header, arrays)
    logger.info(f"Saved {len(dataset)} {dataset.task} samples to {manifest}")
    return manifest


def load_dataset(path: str | Path) -> NodeDataset:
    header, arrays = read_bundle(path)
    if header.get("kind") != "node-dataset":
        raise ValueError(f"{path} does not hold a dataset (kind={header.get('kind')!r})")
    extras = {}
    for name, value in arrays.items():
        if name.startswith("extra."):
            extras[name[len("extra."):]] = value.astype(np.int64) if value.dtype.kind == "i" else value
    return NodeDataset(
        task=header["task"],
        features=arrays["features"],
        targets=arrays["targets"].astype(np.int64),
        classes=int(header["classes"]),
        seed=int(header["seed"]),
        start=int(header["start"]),
        extras=extras,
        meta={key[len("meta."):]: int(value) for key, value in header.items() if key.startswith("meta.")},
    )
