"""Adam optimizer operating on :class:`~nver.layers.Parameter` state."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ConfigError, NumericError
from .layers import Parameter


class Adam:
    """Bias-corrected Adam with in-place updates.

    Moment buffers live on the parameters themselves; ``step`` advances
    every parameter's ``step_count`` by exactly one. A non-finite gradient
    aborts the step before any parameter is touched.
    """

    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if not params:
            raise ConfigError("Adam needs at least one parameter")
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)

    def step(self) -> None:
        steps = {p.step_count for p in self.params}
        if len(steps) != 1:
            raise ConfigError(f"inconsistent step counts across parameters: {sorted(steps)}")
        for p in self.params:
            if p.value.grad is None:
                raise ConfigError(f"parameter {p.name} has no gradient; run backward first")
            if not np.all(np.isfinite(p.value.grad)):
                raise NumericError(
                    f"non-finite gradient in parameter {p.name} "
                    f"at step {p.step_count + 1}; update aborted"
                )
        t = next(iter(steps)) + 1
        for p in self.params:
            g = p.value.grad
            m = p.first_moment.data
            v = p.second_moment.data
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            p.value.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.step_count = t

    def zero_grad(self) -> None:
        for p in self.params:
            p.value.zero_grad()
