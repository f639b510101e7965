"""Adam training on the artifact regression loss.

The loss is the mean squared difference between predicted and target
artifact images. Weight decay (1e-4 by default) is added to the gradient of
convolution and SE weights only; biases and batch-norm parameters are
excluded, and the logged loss is the pure data term. The learning rate
holds at lr_start for the first constant_fraction of the epochs, then
decays log-linearly to lr_end at the final epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import UNet


def l2_loss(predicted: np.ndarray, target: np.ndarray):
    """Mean squared difference and its gradient w.r.t. the prediction."""
    predicted = np.asarray(predicted, dtype=float)
    target = np.asarray(target, dtype=float)
    if predicted.shape != target.shape:
        raise ValueError("prediction and target shapes must match")
    diff = predicted - target
    loss = float(np.mean(diff ** 2))
    grad = 2.0 * diff / diff.size
    return loss, grad


@dataclass(frozen=True)
class TrainingSchedule:
    epochs: int = 500
    batch_size: int = 4
    lr_start: float = 1e-3
    lr_end: float = 1e-5
    constant_fraction: float = 0.2
    weight_decay: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")
        if self.lr_start <= 0 or self.lr_end <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 <= self.constant_fraction <= 1.0:
            raise ValueError("constant_fraction must be in [0, 1]")

    def learning_rate(self, epoch: int) -> float:
        hold = max(1, round(self.constant_fraction * self.epochs))
        if epoch < hold or self.epochs - 1 <= hold:
            return self.lr_start
        t = (epoch - hold) / (self.epochs - 1 - hold)
        return float(self.lr_start * (self.lr_end / self.lr_start) ** t)


class Adam:
    def __init__(self, params, weight_decay=0.0, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = [p for _, p in params]
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr: float):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if self.weight_decay and p.decay:
                g = g + self.weight_decay * p.data
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p.data -= lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


@dataclass
class LossLog:
    """Per-step training record: (step, lr, loss)."""

    steps: list = field(default_factory=list)

    def append(self, step, lr, loss):
        self.steps.append((step, lr, loss))

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write("step,lr,loss\n")
            for step, lr, loss in self.steps:
                f.write(f"{step},{lr:.10g},{loss:.10g}\n")


def train(pairs, model: UNet, schedule: TrainingSchedule) -> LossLog:
    """Train on (normalized input, normalized artifact target) image pairs.

    pairs is a sequence of (input, target) 2-D arrays already scaled by the
    dataset normalization. Samples are shuffled each epoch with a seeded
    generator so training is reproducible; a NaN loss aborts with the step
    and learning rate in the message.
    """
    if len(pairs) == 0:
        raise ValueError("training dataset is empty")
    inputs = np.stack([np.asarray(p[0], dtype=float) for p in pairs])[:, None]
    targets = np.stack([np.asarray(p[1], dtype=float) for p in pairs])[:, None]
    optimizer = Adam(model.parameters(), weight_decay=schedule.weight_decay)
    rng = np.random.default_rng(schedule.seed)
    log = LossLog()
    step = 0
    for epoch in range(schedule.epochs):
        lr = schedule.learning_rate(epoch)
        order = rng.permutation(len(pairs))
        for start in range(0, len(pairs), schedule.batch_size):
            batch = order[start:start + schedule.batch_size]
            model.zero_grad()
            pred = model.forward(inputs[batch], train=True)
            loss, grad = l2_loss(pred, targets[batch])
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss {loss} at step {step} (epoch {epoch}, lr {lr})")
            model.backward(grad)
            optimizer.step(lr)
            log.append(step, lr, loss)
            step += 1
    return log
