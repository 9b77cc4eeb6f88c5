"""
Mini-batch momentum SGD for the resolution classifiers.

Bi-Class trains one network per temporal layer on the binary target
"oracle chose S=1", with focal-loss class weights from inverse class
frequency. Mu-Class trains a single network shared by all layers against the
entropy-weighted soft labels. A fixed seed drives both initialization and
shuffling, so training is bit-reproducible.
"""

import logging

import attrs
import numpy as np
from returns.result import Failure, Result, Success

from .classifier import (
    DEFAULT_WIDTHS,
    SHARED_LAYER,
    TinyCnn,
    backward,
    forward_cached,
    init_model,
    predict_bi_batch,
    predict_mu_batch,
    sigmoid,
    softmax,
)
from .dataset import LabeledSample, stack_inputs
from .losses import (
    DEFAULT_GAMMA,
    DEFAULT_SOFT_TEMPERATURE,
    focal_loss,
    focal_loss_grad,
    mu_loss,
    mu_loss_grad,
)
from .types import ClassifierMode

logger = logging.getLogger(__name__)


@attrs.frozen
class TrainConfig:
    """Optimizer and objective settings; ``alpha`` overrides class weights."""

    gamma: float = DEFAULT_GAMMA
    alpha: tuple[float, float] | None = None
    soft_temperature: float = DEFAULT_SOFT_TEMPERATURE
    learning_rate: float = 1e-3
    momentum: float = 0.9
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    widths: tuple[int, ...] = DEFAULT_WIDTHS

    def __attrs_post_init__(self) -> None:
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.soft_temperature <= 0:
            raise ValueError("Soft-label temperature must be positive")
        if self.alpha is not None and not all(0 < a <= 1 for a in self.alpha):
            raise ValueError("Class weights must lie in (0, 1]")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs >= 0, batch_size >= 1, learning_rate > 0")


@attrs.frozen
class TrainingDiverged:
    """Non-finite loss or weights at an optimizer step."""

    step: int
    loss: float
    layer: int = SHARED_LAYER

    def __str__(self) -> str:
        where = "shared model" if self.layer == SHARED_LAYER else f"layer {self.layer}"
        return f"Training diverged at step {self.step} ({where}, loss={self.loss})"


@attrs.frozen
class TrainOutcome:
    """Trained models keyed by temporal layer (SHARED_LAYER for Mu) and losses."""

    mode: ClassifierMode
    models: dict[int, TinyCnn]
    step_losses: dict[int, list[float]]
    epoch_losses: dict[int, list[float]]


def class_weights(samples: list[LabeledSample]) -> tuple[float, float]:
    """Inverse-frequency focal weights (label 0, label 1).

    The pair is normalized to sum to 1 rather than to a mean of 1, so each
    alpha stays in (0, 1] for the focal loss.
    """
    positives = sum(s.full_resolution for s in samples)
    counts = np.array([len(samples) - positives, positives], dtype=np.float64)
    inverse = 1.0 / np.maximum(counts, 1.0)
    weights = inverse / inverse.sum()
    return float(weights[0]), float(weights[1])


def train(
    samples: list[LabeledSample], cfg: TrainConfig, mode: ClassifierMode
) -> Result[TrainOutcome, TrainingDiverged]:
    """Bi: one model per represented layer. Mu: one shared model."""
    if not samples:
        raise ValueError("Training needs at least one sample")
    if mode is ClassifierMode.MU:
        groups = {SHARED_LAYER: samples}
    else:
        layers = sorted({s.temporal_layer for s in samples})
        groups = {
            layer: [s for s in samples if s.temporal_layer == layer] for layer in layers
        }

    models, step_losses, epoch_losses = {}, {}, {}
    for layer, group in groups.items():
        match train_model(group, cfg, mode, layer):
            case Success((model, steps, epochs)):
                models[layer] = model
                step_losses[layer], epoch_losses[layer] = steps, epochs
            case Failure(diverged):
                return Failure(diverged)
    return Success(TrainOutcome(mode, models, step_losses, epoch_losses))


def train_model(
    samples: list[LabeledSample],
    cfg: TrainConfig,
    mode: ClassifierMode,
    layer: int = SHARED_LAYER,
) -> Result[tuple[TinyCnn, list[float], list[float]], TrainingDiverged]:
    """Train a single network; returns the model, per-step and per-epoch losses."""
    seed = cfg.seed if layer == SHARED_LAYER else cfg.seed + layer
    model = init_model(mode, seed, cfg.widths, layer)
    rng = np.random.default_rng(seed)
    inputs = stack_inputs(samples)
    objective = _objective(samples, cfg, mode)
    velocity = [np.zeros_like(p) for p in model.params()]

    step_losses: list[float] = []
    epoch_losses: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(samples))
        for start in range(0, len(samples), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            step = len(step_losses)
            try:
                logits, cache = forward_cached(model, inputs[batch])
                loss, dlogits = objective(logits, batch)
                if not np.isfinite(loss):
                    return Failure(TrainingDiverged(step, float(loss), layer))
                grads = backward(model, cache, dlogits / len(batch))
                velocity = [
                    cfg.momentum * v - cfg.learning_rate * g
                    for v, g in zip(velocity, grads, strict=True)
                ]
                model = model.with_params(
                    [p + v for p, v in zip(model.params(), velocity, strict=True)]
                )
            except (FloatingPointError, ValueError):
                return Failure(TrainingDiverged(step, float("nan"), layer))
            step_losses.append(float(loss))
        recent = step_losses[-((len(samples) - 1) // cfg.batch_size + 1) :]
        epoch_losses.append(float(np.mean(recent)))
        logger.debug("layer %d epoch %d loss %.6f", layer, epoch, epoch_losses[-1])
    return Success((model, step_losses, epoch_losses))


def accuracy(
    models: dict[int, TinyCnn], samples: list[LabeledSample], mode: ClassifierMode
) -> float:
    """Fraction of samples whose prediction matches the oracle label."""
    if not samples:
        raise ValueError("Accuracy needs at least one sample")
    correct = 0
    if mode is ClassifierMode.MU:
        predicted = predict_mu_batch(models[SHARED_LAYER], stack_inputs(samples))
        correct = sum(
            int(p) == s.optimal_factor for p, s in zip(predicted, samples, strict=True)
        )
    else:
        for layer in sorted({s.temporal_layer for s in samples}):
            group = [s for s in samples if s.temporal_layer == layer]
            if layer not in models:
                raise KeyError(f"No Bi-Class model for temporal layer {layer}")
            p = predict_bi_batch(models[layer], stack_inputs(group))
            correct += sum(
                bool(q >= 0.5) == s.full_resolution
                for q, s in zip(p, group, strict=True)
            )
    return correct / len(samples)


# Private helper functions


def _objective(samples: list[LabeledSample], cfg: TrainConfig, mode: ClassifierMode):
    """Batch loss and dLoss/dlogits (summed over the batch) as a closure."""
    if mode is ClassifierMode.MU:
        targets = np.stack([s.soft_label for s in samples])

        def mu_objective(logits: np.ndarray, batch: np.ndarray):
            probs = softmax(logits)
            losses = [mu_loss(p, t) for p, t in zip(probs, targets[batch], strict=True)]
            return float(np.mean(losses)), mu_loss_grad(probs, targets[batch])

        return mu_objective

    labels = np.array([int(s.full_resolution) for s in samples])
    alpha = np.asarray(cfg.alpha or class_weights(samples))[labels]

    def bi_objective(logits: np.ndarray, batch: np.ndarray):
        z = logits[:, 0]
        losses = focal_loss(sigmoid(z), labels[batch], alpha[batch], cfg.gamma)
        grad = focal_loss_grad(z, labels[batch], alpha[batch], cfg.gamma)
        return float(np.mean(losses)), grad[:, None]

    return bi_objective
