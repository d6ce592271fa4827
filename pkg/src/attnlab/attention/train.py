from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from attnlab.attention.model import IPNModel, loss_fn
from attnlab.errors import DegenerateInputError, ParameterError, TrainingDiverged
from attnlab.numeric.autodiff import Tape, backward
from attnlab.numeric.optim import AdamState, adam_update


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-4
    epochs: int = 1000
    seed: int = 0
    eval_every: int = 10

    def __post_init__(self):
        if not self.lr > 0:
            raise ParameterError(f"lr must be positive, got {self.lr}")
        if self.epochs < 1:
            raise ParameterError(f"epochs must be at least 1, got {self.epochs}")
        if self.weight_decay < 0 or self.eval_every < 1:
            raise ParameterError("weight_decay must be >= 0 and eval_every >= 1")

    def to_dict(self):
        return asdict(self)


def evaluate(model: IPNModel, x, y) -> float:
    """Share of argmax predictions equal to the labels, the whole set as one token batch."""
    y = np.asarray(y)
    if y.size == 0:
        raise DegenerateInputError("empty evaluation set")
    logits = model.forward(x).value
    return float(np.mean(np.argmax(logits, axis=1) == y))


def train_step(model: IPNModel, x, y, state: AdamState, lr: float, weight_decay: float) -> float:
    params = model.params()
    if not all(np.isfinite(p.value).all() for p in params):
        raise TrainingDiverged(state.t, _norms(model))
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = loss_fn(model, x, y)
    value = loss.item()
    if not math.isfinite(value):
        raise TrainingDiverged(state.t + 1, _norms(model))
    backward(tape, loss)
    adam_update(params, [p.grad for p in params], state, lr, weight_decay)
    return value


def _norms(model):
    return {name: float(np.linalg.norm(p.value)) for name, p in model.named_params().items()}


def train_ipn(model: IPNModel, train, test, config: TrainConfig):
    """Full-batch Adam on cross-entropy.

    ``train`` and ``test`` are (X, y) pairs. Returns (history, model); each
    history row holds the epoch, the training loss computed in that epoch's
    forward pass, and the test accuracy after that epoch's update.
    """
    xtr, ytr = train
    xte, yte = test
    state = AdamState.for_params(model.params())
    history = []
    for epoch in range(1, config.epochs + 1):
        loss = train_step(model, xtr, ytr, state, config.lr, config.weight_decay)
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            history.append({"epoch": epoch, "train_loss": loss, "test_acc": evaluate(model, xte, yte)})
    return history, model
