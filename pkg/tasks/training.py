"""End-to-end training of the per-node classifier on the synthetic tasks."""

import logging
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field, model_validator

from autograd.losses import LossFn
from tasks.datasets import TASKS, NodeDataset, gen_grid_beacon, gen_point_clusters
from tasks.model import BATCH_STREAM, MODEL_TAG, VARIANTS, NodeClassifier, StageSpec, build_classifier
from tasks.optim import OPTIMIZERS, SCHEDULES, build_optimizer, learning_rate
from tasks.presets import get_preset
from tensor.errors import DimensionError, DivergenceError, NonFiniteError
from tensor.rng import make_rng

logger = logging.getLogger(__name__)


class StageConfig(BaseModel):
    hidden: int = Field(gt=0)
    c_r: int | None = Field(default=None, gt=0)
    latent_dims: list[int] = Field(default_factory=lambda: [8], min_length=1)
    latent_kind: str = "identity"

    @model_validator(mode="after")
    def _positive_dims(self):
        if min(self.latent_dims) < 1:
            raise ValueError(f"latent dims must be positive, got {self.latent_dims}")
        return self


class TrainConfig(BaseModel):
    """Everything that determines a training run; two equal configs give identical runs."""

    task: str = "beacon"
    variant: str = "+latentgnn"
    stages: list[StageConfig] = Field(default_factory=lambda: [StageConfig(hidden=32, c_r=16)], min_length=1)

    steps: int = Field(default=3000, ge=0)
    batch_size: int = Field(default=8, gt=0)
    lr: float = Field(default=0.05, ge=0.0)
    optimizer: str = "sgd"
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=0.0, ge=0.0)
    schedule: str = "constant"
    milestones: list[int] = Field(default_factory=list)
    gamma: float = Field(default=0.1, gt=0.0)
    decay_every: int = Field(default=1000, gt=0)

    seed: int = Field(default=0, ge=0)
    train_count: int = Field(default=2000, gt=0)
    eval_count: int = Field(default=500, gt=0)
    eval_every: int = Field(default=500, ge=0)
    log_every: int = Field(default=100, gt=0)

    # beacon grid / point cloud shape
    h: int = Field(default=16, gt=0)
    w: int = Field(default=16, gt=0)
    points: int = Field(default=128, gt=0)
    c: int = Field(default=8, gt=0)
    classes: int = Field(default=4, ge=2)

    dense_variant: str = "sim"
    init_scheme: str = "kaiming-uniform"

    @model_validator(mode="after")
    def _known_choices(self):
        for name, value, allowed in (
            ("task", self.task, TASKS),
            ("variant", self.variant, VARIANTS),
            ("optimizer", self.optimizer, OPTIMIZERS),
            ("schedule", self.schedule, SCHEDULES),
        ):
            if value not in allowed:
                raise ValueError(f"Unknown {name} {value!r} (expected one of {allowed})")
        if self.task == "beacon":
            if self.h * self.w < 2:
                raise ValueError(f"Beacon grid needs at least 2 nodes, got {self.h}×{self.w}")
            if self.c < self.classes:
                raise ValueError(f"c={self.c} channels cannot hold a {self.classes}-class one-hot block")
        else:
            if self.c < 3:
                raise ValueError(f"Point features need at least the 3 coordinates, got c={self.c}")
            if self.points < 2 * self.classes:
                raise ValueError(f"points={self.points} is too small for {self.classes} clusters of at least 2 points")
        return self

    def stage_specs(self) -> list[StageSpec]:
        return [StageSpec(s.hidden, s.c_r, tuple(s.latent_dims), s.latent_kind) for s in self.stages]


@dataclass
class TrainRecord:
    step: int
    loss: float
    eval_accuracy: float | None = None


@dataclass
class TrainResult:
    config: TrainConfig
    model: NodeClassifier
    records: list[TrainRecord] = field(default_factory=list)
    init_accuracy: float = 0.0
    eval_accuracy: float = 0.0

    @property
    def loss_curve(self) -> list[float]:
        return [r.loss for r in self.records]


def build_datasets(config: TrainConfig) -> tuple[NodeDataset, NodeDataset]:
    """Train samples use indices 0..train_count-1, eval samples the indices after them."""
    def make(count: int, start: int) -> NodeDataset:
        if config.task == "beacon":
            return gen_grid_beacon(config.seed, config.h, config.w, config.c, config.classes, count, start)
        return gen_point_clusters(config.seed, config.points, config.classes, count, config.c, start)

    return make(config.train_count, 0), make(config.eval_count, config.train_count)


def evaluate(model: NodeClassifier, dataset: NodeDataset) -> float:
    """Mean per-node accuracy over every sample of ``dataset``."""
    if len(dataset) == 0:
        raise ValueError("Cannot evaluate on an empty dataset")
    in_channels = model.stages[0].u.shape[0] if model.stages else model.head_w.shape[0]
    if dataset.channels != in_channels:
        raise DimensionError(f"dataset has {dataset.channels} channels, model expects {in_channels}")
    if dataset.classes != model.classes:
        raise DimensionError(f"dataset has {dataset.classes} classes, model predicts {model.classes}")
    correct = 0
    for features, targets in zip(dataset.features, dataset.targets):
        correct += int(np.sum(model.predict(features) == targets))
    return correct / (len(dataset) * dataset.nodes)


def _batch_step(model: NodeClassifier, dataset: NodeDataset, indices: np.ndarray, loss_fn: LossFn, step: int):
    """Mean loss and summed gradients of one mini-batch.

    Raises:
        DivergenceError: If a forward pass, loss or logit gradient turns non-finite.
    """
    total = 0.0
    grads: dict[str, np.ndarray] = {}
    scale = 1.0 / len(indices)
    for i in indices:
        try:
            logits, cache = model.forward(dataset.features[i])
            loss, d_logits = loss_fn.value_and_grad(logits, dataset.targets[i])
            if not (np.isfinite(loss) and np.all(np.isfinite(d_logits))):
                raise DivergenceError(step, loss)
            sample_grads = model.backward(cache, d_logits * scale)
        except NonFiniteError as e:
            # weights from the previous update overflowed inside a layer
            raise DivergenceError(step, float("nan")) from e
        total += loss
        for name, grad in sample_grads.items():
            if name in grads:
                grads[name] += grad
            else:
                grads[name] = grad
    return total * scale, grads


def train(
    config: TrainConfig,
    datasets: tuple[NodeDataset, NodeDataset] | None = None,
    model: NodeClassifier | None = None,
) -> TrainResult:
    """Minimize mean per-node cross-entropy with mini-batch SGD/Adam.

    Args:
        config: Run configuration.
        datasets: Optional (train, eval) pair; generated from ``config`` otherwise.
        model: Optional starting weights, trained in place.

    Returns:
        Per-step records, accuracy before and after training, and the model.

    Raises:
        DivergenceError: If the loss, a layer activation or an updated weight
            becomes non-finite; carries the step index.
    """
    train_set, eval_set = datasets if datasets is not None else build_datasets(config)
    if model is None:
        model = build_classifier(
            config.seed,
            train_set.channels,
            train_set.classes,
            config.stage_specs(),
            variant=config.variant,
            dense_variant=config.dense_variant,
            init_scheme=config.init_scheme,
        )
    optimizer = build_optimizer(config)
    loss_fn = LossFn("cross-entropy")
    batches = make_rng(config.seed, MODEL_TAG, BATCH_STREAM)
    params = model.trainable_arrays()
    context = {"seed": config.seed, "variant": config.variant}

    result = TrainResult(config=config, model=model, init_accuracy=evaluate(model, eval_set))
    logger.info(
        f"Training {config.variant} on {config.task}: {config.steps} steps, "
        f"init accuracy {result.init_accuracy:.4f}",
        extra=context,
    )
    for step in range(config.steps):
        indices = batches.integers(len(train_set), size=config.batch_size)
        loss, grads = _batch_step(model, train_set, indices, loss_fn, step)
        if not np.isfinite(loss):
            raise DivergenceError(step, loss)
        optimizer.step(params, grads, learning_rate(config, step))
        if not all(np.all(np.isfinite(value)) for value in params.values()):
            raise DivergenceError(step, loss)
        record = TrainRecord(step=step, loss=loss)
        last = step == config.steps - 1
        if last or (config.eval_every and (step + 1) % config.eval_every == 0):
            try:
                record.eval_accuracy = evaluate(model, eval_set)
            except NonFiniteError as e:
                raise DivergenceError(step, loss) from e
        result.records.append(record)
        if (step + 1) % config.log_every == 0 or last:
            accuracy = "" if record.eval_accuracy is None else f", eval accuracy {record.eval_accuracy:.4f}"
            logger.info(f"step {step + 1}/{config.steps}: loss {loss:.4f}{accuracy}", extra={**context, "step": step})
    result.eval_accuracy = result.records[-1].eval_accuracy if result.records else result.init_accuracy
    return result


def config_from_preset(name: str, **overrides) -> TrainConfig:
    """Preset values with non-None ``overrides`` on top."""
    values = get_preset(name)
    values.update({key: value for key, value in overrides.items() if value is not None})
    return TrainConfig(**values)
