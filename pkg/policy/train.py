"""Mini-batch truncated-BPTT training of the LSTM policy."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from config.defaults import TRAIN_DEFAULTS
from datakit.dataset import Dataset, LabeledSequence
from policy.lstm import LSTMState, PolicyConfig, PolicyParams, backward, forward, init_params, loss, loss_gradient
from policy.optim import Adam, clip_gradients

LOG = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, last_losses: list[float]):
        self.epoch = epoch
        self.last_losses = list(last_losses)
        super().__init__(f"training loss became non-finite in epoch {epoch}; last finite losses: {self.last_losses}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = TRAIN_DEFAULTS["learning_rate"]
    epochs: int = TRAIN_DEFAULTS["epochs"]
    seed: int = 0
    beta1: float = TRAIN_DEFAULTS["beta1"]
    beta2: float = TRAIN_DEFAULTS["beta2"]
    epsilon: float = TRAIN_DEFAULTS["epsilon"]
    clip_norm: float = TRAIN_DEFAULTS["clip_norm"]
    log_every: int = TRAIN_DEFAULTS["log_every"]

    def __post_init__(self):
        if self.learning_rate < 0 or self.epochs < 1:
            raise ValueError("need learning_rate >= 0 and epochs >= 1")


@dataclass
class TrainResult:
    final: PolicyParams
    best: PolicyParams
    best_epoch: int
    train_loss: list[float] = field(default_factory=list)
    validation_loss: list[float] = field(default_factory=list)
    optimizer: Adam | None = None

    def loss_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "epoch": np.arange(1, len(self.train_loss) + 1),
                "train_loss": self.train_loss,
                "validation_loss": self.validation_loss,
            }
        )


@dataclass
class Batch:
    inputs: np.ndarray
    targets: np.ndarray
    mask: np.ndarray


def pad_batch(sequences: list[LabeledSequence]) -> Batch:
    """Right-pad to the longest sequence; the mask marks real steps."""
    length = max(sequence.length for sequence in sequences)
    inputs = np.zeros((len(sequences), length, sequences[0].inputs.shape[1]))
    targets = np.zeros((len(sequences), length, sequences[0].targets.shape[1]))
    mask = np.zeros((len(sequences), length))
    for row, sequence in enumerate(sequences):
        inputs[row, : sequence.length] = sequence.inputs
        targets[row, : sequence.length] = sequence.targets
        mask[row, : sequence.length] = 1.0
    return Batch(inputs, targets, mask)


def make_batches(sequences: list[LabeledSequence], batch_size: int, rng: np.random.Generator | None = None) -> list[Batch]:
    order = rng.permutation(len(sequences)) if rng is not None else np.arange(len(sequences))
    return [pad_batch([sequences[i] for i in order[start : start + batch_size]]) for start in range(0, len(order), batch_size)]


def sequence_loss(params: PolicyParams, sequences: list[LabeledSequence], batch_size: int) -> float:
    """Masked MSE over whole sequences."""
    if not sequences:
        return math.nan
    total, weight = 0.0, 0.0
    for batch in make_batches(sequences, batch_size):
        outputs, _, _ = forward(params, batch.inputs)
        count = batch.mask.sum()
        total += loss(outputs, batch.targets, batch.mask) * count
        weight += count
    return total / weight


def train_epoch(params: PolicyParams, batches: list[Batch], optimizer: Adam, window: int, clip_norm: float) -> float:
    tensors = params.tensors()
    total, weight = 0.0, 0.0
    for batch in batches:
        state = LSTMState.zeros(params.config, batch.inputs.shape[0])
        for start in range(0, batch.inputs.shape[1], window):
            span = slice(start, start + window)
            mask = batch.mask[:, span]
            count = mask.sum()
            outputs, state, cache = forward(params, batch.inputs[:, span], state, keep_cache=True)
            state = state.detach()
            if count == 0:
                continue
            window_loss = loss(outputs, batch.targets[:, span], mask)
            if not math.isfinite(window_loss):
                return math.nan
            grads = backward(params, cache, loss_gradient(outputs, batch.targets[:, span], mask))
            grads, _ = clip_gradients(grads, clip_norm)
            optimizer.step(tensors, grads)
            total += window_loss * count
            weight += count
    return total / weight if weight else math.nan


def train(dataset: Dataset, policy_cfg: PolicyConfig, train_cfg: TrainConfig, init_seed: int | None = None) -> TrainResult:
    """Adam over shuffled, padded batches; keeps both the last and the best-validation parameters."""
    train_set, validation = dataset.split("train"), dataset.split("validation")
    if not train_set:
        raise ValueError("dataset has no training sequences")
    params = init_params(policy_cfg, train_cfg.seed if init_seed is None else init_seed, dataset.norm)
    optimizer = Adam(train_cfg.learning_rate, train_cfg.beta1, train_cfg.beta2, train_cfg.epsilon)
    rng = np.random.default_rng(train_cfg.seed)
    result = TrainResult(params, params.copy(), 0)
    best_score = math.inf
    for epoch in range(1, train_cfg.epochs + 1):
        batches = make_batches(train_set, policy_cfg.batch_size, rng)
        train_loss = train_epoch(params, batches, optimizer, policy_cfg.window, train_cfg.clip_norm)
        if not math.isfinite(train_loss) or not params.is_finite():
            raise TrainingDiverged(epoch, result.train_loss[-5:])
        validation_loss = sequence_loss(params, validation, policy_cfg.batch_size)
        result.train_loss.append(train_loss)
        result.validation_loss.append(validation_loss)
        score = validation_loss if validation else train_loss
        if score < best_score:
            best_score, result.best, result.best_epoch = score, params.copy(), epoch
        if epoch == 1 or epoch % train_cfg.log_every == 0 or epoch == train_cfg.epochs:
            LOG.info("Epoch %d/%d: train %.6g, validation %.6g", epoch, train_cfg.epochs, train_loss, validation_loss)
    params.meta.update({"epoch": train_cfg.epochs, "seed": train_cfg.seed})
    result.best.meta.update({"epoch": result.best_epoch, "seed": train_cfg.seed})
    result.final = params
    result.optimizer = optimizer
    return result
