"""Exception types shared by every numerical module."""


class DimensionError(ValueError):
    """Operand shapes do not line up."""


class NonFiniteError(ValueError):
    """A parameter or input holds NaN or Inf."""


class CapacityError(ValueError):
    """A dense path was asked for more nodes than its configured cap."""

    def __init__(self, what: str, n: int, cap: int):
        super().__init__(f"{what} refuses N={n} (cap {cap}); raise the cap explicitly")
        self.n = n
        self.cap = cap


class TraceMismatchError(ValueError):
    """A forward trace does not belong to the parameters handed to backward."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss, gradient or weight."""

    def __init__(self, step: int, loss: float):
        super().__init__(f"Training diverged at step {step} (loss {loss!r})")
        self.step = step
        self.loss = loss


class FlopOverflowError(OverflowError):
    """An analytic operation count does not fit a signed 64-bit integer."""
