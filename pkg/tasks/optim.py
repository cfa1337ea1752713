"""In-place optimizers over dicts of named arrays, plus learning-rate schedules."""

import logging

import numpy as np

logger = logging.getLogger(__name__)

OPTIMIZERS = ("sgd", "adam")
SCHEDULES = ("constant", "step", "exponential")

# never decayed: biases, mixture weights and the residual scale
_NO_DECAY_SUFFIXES = (".b", "mixture_w", "lambda")


def _decays(name: str) -> bool:
    return not name.endswith(_NO_DECAY_SUFFIXES)


class SGD:
    """SGD with heavy-ball momentum: v ← μ·v + (g + wd·p); p ← p − lr·v."""

    def __init__(self, momentum: float = 0.9, weight_decay: float = 0.0):
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        for name, param in params.items():
            grad = grads[name]
            if self.weight_decay and _decays(name):
                grad = grad + self.weight_decay * param
            velocity = self.velocity.get(name)
            if velocity is None:
                velocity = self.velocity[name] = np.zeros_like(param)
            velocity *= self.momentum
            velocity += grad
            param -= lr * velocity


class Adam:
    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8, weight_decay: float = 0.0):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for name, param in params.items():
            grad = grads[name]
            if self.weight_decay and _decays(name):
                grad = grad + self.weight_decay * param
            m = self.m.setdefault(name, np.zeros_like(param))
            v = self.v.setdefault(name, np.zeros_like(param))
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            param -= lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def build_optimizer(config) -> SGD | Adam:
    if config.optimizer == "sgd":
        return SGD(momentum=config.momentum, weight_decay=config.weight_decay)
    if config.optimizer == "adam":
        return Adam(beta1=config.beta1, beta2=config.beta2, weight_decay=config.weight_decay)
    raise ValueError(f"Unknown optimizer: {config.optimizer!r} (expected one of {OPTIMIZERS})")


def learning_rate(config, step: int) -> float:
    """Learning rate in effect at ``step`` (0-based)."""
    if config.schedule == "constant":
        return config.lr
    if config.schedule == "step":
        passed = sum(1 for milestone in config.milestones if step >= milestone)
        return config.lr * config.gamma**passed
    if config.schedule == "exponential":
        return config.lr * config.gamma ** (step // config.decay_every)
    raise ValueError(f"Unknown schedule: {config.schedule!r} (expected one of {SCHEDULES})")
