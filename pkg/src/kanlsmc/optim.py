"""Full-batch Adam and the training configuration shared by KAN and MLP fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NumericsError(RuntimeError):
    """Training produced a non-finite loss (learning rate too high, bad data)."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    epochs: int = 300
    optimizer: str = "adam"
    batch: str = "full"
    seed: int = 0
    early_stop_patience: int = 50
    loss: str = "mse"
    # final fraction of epochs over which the step size decays geometrically
    # toward learning_rate * lr_decay_factor (0 disables the tail)
    lr_decay_tail: float = 0.0
    lr_decay_factor: float = 0.02

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.optimizer != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")
        if self.batch != "full":
            raise ValueError(f"unsupported batch mode {self.batch!r}")
        if self.loss != "mse":
            raise ValueError(f"unsupported loss {self.loss!r}")
        if not 0.0 <= self.lr_decay_tail <= 1.0:
            raise ValueError("lr_decay_tail must be in [0, 1]")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise ValueError("lr_decay_factor must be in (0, 1]")


class Adam:
    """Adaptive moment estimation over a list of parameter arrays (in-place)."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
