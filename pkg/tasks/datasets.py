"""Synthetic long-range-dependency datasets.

Every sample is generated from its own stream ``make_rng(seed, index)``, so
any sample can be regenerated bit-exactly from ``(seed, index)`` alone and
generation order does not matter.

Grid beacon encoding
    All h·w nodes carry i.i.d. N(0, noise²) features on every channel. At
    the single beacon node the first K channels are overwritten with
    ``amplitude · onehot(beacon_class)``. Every node's target is the
    beacon class, so a node can only be labeled by looking at the beacon.

Point clusters
    K Gaussian clusters centred on fixed anchors around the unit circle
    (cluster k always sits at the same anchor) with randomized sizes. Every
    point's target is the index of the largest cluster; features are the
    coordinates followed by noise channels.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from tensor.rng import make_rng

logger = logging.getLogger(__name__)

TASKS = ("beacon", "clusters")
BEACON_AMPLITUDE = 3.0
BEACON_NOISE = 0.1
CLUSTER_SPREAD = 0.45
CLUSTER_NOISE = 0.1
MAX_SIZE_REDRAWS = 1000


@dataclass
class GridBeaconSample:
    features: np.ndarray
    beacon_pos: int
    beacon_class: int
    targets: np.ndarray


@dataclass
class PointCloudSample:
    points: np.ndarray
    features: np.ndarray
    cluster_sizes: np.ndarray
    targets: np.ndarray


@dataclass
class NodeDataset:
    """A stack of same-sized node-classification samples."""

    task: str
    features: np.ndarray  # count × N × c
    targets: np.ndarray  # count × N
    classes: int
    seed: int
    start: int = 0
    extras: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def nodes(self) -> int:
        return self.features.shape[1]

    @property
    def channels(self) -> int:
        return self.features.shape[2]


def grid_beacon_sample(
    seed: int, index: int, h: int, w: int, c: int, classes: int,
    noise: float = BEACON_NOISE, amplitude: float = BEACON_AMPLITUDE,
) -> GridBeaconSample:
    n = h * w
    rng = make_rng(seed, index)
    beacon_class = int(rng.integers(classes))
    beacon_pos = int(rng.integers(n))
    features = rng.normal(0.0, noise, size=(n, c))
    features[beacon_pos, :classes] = 0.0
    features[beacon_pos, beacon_class] = amplitude
    targets = np.full(n, beacon_class, dtype=np.int64)
    return GridBeaconSample(features, beacon_pos, beacon_class, targets)


def gen_grid_beacon(
    seed: int, h: int, w: int, c: int, classes: int, count: int, start: int = 0,
    noise: float = BEACON_NOISE, amplitude: float = BEACON_AMPLITUDE,
) -> NodeDataset:
    """``count`` beacon samples with indices ``start .. start+count-1``."""
    if h * w < 2:
        raise ValueError(f"Grid needs at least 2 nodes, got {h}×{w}")
    if classes < 2:
        raise ValueError(f"Need at least 2 classes, got {classes}")
    if c < classes:
        raise ValueError(f"c={c} channels cannot hold a {classes}-class one-hot block")
    samples = [
        grid_beacon_sample(seed, start + i, h, w, c, classes, noise, amplitude) for i in range(count)
    ]
    logger.debug(f"Generated {count} beacon samples (seed={seed}, start={start})")
    return NodeDataset(
        task="beacon",
        features=np.stack([s.features for s in samples]) if samples else np.empty((0, h * w, c)),
        targets=np.stack([s.targets for s in samples]) if samples else np.empty((0, h * w), dtype=np.int64),
        classes=classes,
        seed=seed,
        start=start,
        extras={
            "beacon_pos": np.array([s.beacon_pos for s in samples], dtype=np.int64),
            "beacon_class": np.array([s.beacon_class for s in samples], dtype=np.int64),
        },
        meta={"h": h, "w": w},
    )


def cluster_anchors(classes: int) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(classes) / classes
    return np.stack([np.cos(angles), np.sin(angles), np.zeros(classes)], axis=1)


def _cluster_sizes(rng: np.random.Generator, n: int, classes: int) -> np.ndarray:
    for _ in range(MAX_SIZE_REDRAWS):
        probs = rng.dirichlet(np.ones(classes))
        sizes = 2 + rng.multinomial(n - 2 * classes, probs)
        if np.sum(sizes == sizes.max()) == 1:
            return sizes
    raise RuntimeError(f"Could not draw cluster sizes with a unique maximum for N={n}, K={classes}")


def point_cloud_sample(
    seed: int, index: int, n: int, classes: int, c: int = 4,
    spread: float = CLUSTER_SPREAD, noise: float = CLUSTER_NOISE,
) -> PointCloudSample:
    rng = make_rng(seed, index)
    sizes = _cluster_sizes(rng, n, classes)
    anchors = cluster_anchors(classes)
    owner = np.repeat(np.arange(classes), sizes)
    points = anchors[owner] + rng.normal(0.0, spread, size=(n, 3))
    order = rng.permutation(n)
    points = points[order]
    features = np.concatenate([points, rng.normal(0.0, noise, size=(n, c - 3))], axis=1)
    targets = np.full(n, int(np.argmax(sizes)), dtype=np.int64)
    return PointCloudSample(points, features, sizes.astype(np.int64), targets)


def gen_point_clusters(
    seed: int, n: int, classes: int, count: int, c: int = 4, start: int = 0,
    spread: float = CLUSTER_SPREAD, noise: float = CLUSTER_NOISE,
) -> NodeDataset:
    """``count`` point-cloud samples; the label is the largest cluster's index."""
    if n < 2 * classes:
        raise ValueError(f"N={n} is too small for {classes} clusters of at least 2 points")
    if classes < 2:
        raise ValueError(f"Need at least 2 classes, got {classes}")
    if c < 3:
        raise ValueError(f"Point features need at least the 3 coordinates, got c={c}")
    samples = [point_cloud_sample(seed, start + i, n, classes, c, spread, noise) for i in range(count)]
    return NodeDataset(
        task="clusters",
        features=np.stack([s.features for s in samples]) if samples else np.empty((0, n, c)),
        targets=np.stack([s.targets for s in samples]) if samples else np.empty((0, n), dtype=np.int64),
        classes=classes,
        seed=seed,
        start=start,
        extras={
            "points": np.stack([s.points for s in samples]) if samples else np.empty((0, n, 3)),
            "cluster_sizes": np.stack([s.cluster_sizes for s in samples])
            if samples
            else np.empty((0, classes), dtype=np.int64),
        },
    )
