"""Full-batch gradient descent for the SELECT head."""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ..errors import TrainingDivergenceError
from .adapters import AdapterParams
from .encoders import Modality
from .select_head import (
    attention_gain,
    bce_loss_and_grad,
    select_object,
    select_rows,
    sigmoid,
)

logger = logging.getLogger("EmbodySim.embedding")

DIVERGENCE_LOSS = 1e3


@dataclass(frozen=True, eq=False)
class SelectExample:
    """One SELECT decision: text feature, O x d object rows, index of the referent."""

    text: np.ndarray
    rows: np.ndarray
    target: int

    def one_hot(self) -> np.ndarray:
        target = np.zeros(self.rows.shape[0])
        target[self.target] = 1.0
        return target


@dataclass
class TrainingResult:
    params: AdapterParams
    losses: List[float] = field(default_factory=list)

    @property
    def final_loss(self) -> Optional[float]:
        return self.losses[-1] if self.losses else None


def dataset_loss_and_grads(params: AdapterParams, dataset: Sequence[SelectExample]):
    """Mean loss and gradients for W, the text adapter weight and its bias.

    Per-example pieces come from ``bce_loss_and_grad``; the d x d gradients
    are assembled with one matrix product each.
    """
    dim = params.dim
    gain = attention_gain(dim)
    scale = 1.0 / np.sqrt(dim)
    weight = np.asarray(params.select, dtype=np.float64)
    texts = np.stack([e.text for e in dataset])
    adapter = np.asarray(params.weights[Modality.TEXT.value], dtype=np.float64)
    bias = np.asarray(params.biases[Modality.TEXT.value], dtype=np.float64)
    queries = gain * (texts @ adapter.T + bias)
    projected = queries @ weight

    pooled = np.zeros_like(queries)
    total = 0.0
    for n, example in enumerate(dataset):
        rows = select_rows(example.rows)
        scores = sigmoid(rows @ projected[n] * scale)
        loss, grads = bce_loss_and_grad(scores, example.one_hot())
        total += loss
        pooled[n] = rows.T @ grads.logits

    count = len(dataset)
    grad_w = scale * (queries.T @ pooled) / count
    grad_queries = scale * (pooled @ weight.T)
    # q = gain * (A t + b)
    grad_text_w = gain * (grad_queries.T @ texts) / count
    grad_text_b = gain * grad_queries.sum(axis=0) / count
    return total / count, grad_w, grad_text_w, grad_text_b


def train_select(
    dataset: Sequence[SelectExample],
    params: Optional[AdapterParams] = None,
    lr: float = 0.5,
    epochs: int = 200,
    seed: int = 0,
) -> TrainingResult:
    """Train the SELECT weight and the text adapter by full-batch gradient descent.

    The loss recorded for epoch e is the training loss of the parameters
    before that epoch's update.

    Args:
        dataset: Non-empty list of SelectExample
        params: Starting parameters (identity adapters, W = 4 I if omitted)
        lr: Learning rate
        epochs: Number of full-batch steps; 0 returns the params unchanged
        seed: Recorded for reproducibility; the procedure itself draws nothing

    Returns:
        TrainingResult with the trained params and per-epoch losses

    Raises:
        ValueError: Empty dataset
        TrainingDivergenceError: Loss exceeded 1e3
    """
    if not dataset:
        raise ValueError("train_select needs a non-empty dataset")
    start = params or AdapterParams.identity()
    text = Modality.TEXT.value
    # Work in float64; the returned params are rounded to float32 once.
    work = start.copy()
    work.select = start.select.astype(np.float64)
    work.weights[text] = start.weights[text].astype(np.float64)
    work.biases[text] = start.biases[text].astype(np.float64)
    losses: List[float] = []
    logger.info(
        f"Training SELECT head on {len(dataset)} examples, "
        f"lr={lr}, epochs={epochs}, seed={seed}"
    )
    for epoch in range(epochs):
        loss, grad_w, grad_text_w, grad_text_b = dataset_loss_and_grads(work, dataset)
        if not np.isfinite(loss) or loss > DIVERGENCE_LOSS:
            logger.error(f"SELECT training diverged at epoch {epoch}: loss={loss}")
            raise TrainingDivergenceError(epoch, loss)
        losses.append(loss)
        work.select = work.select - lr * grad_w
        work.weights[text] = work.weights[text] - lr * grad_text_w
        work.biases[text] = work.biases[text] - lr * grad_text_b
    if epochs:
        logger.debug(
            f"SELECT training finished, loss {losses[0]:.4f} -> {losses[-1]:.4f}"
        )
    params = start.copy()
    if epochs:
        params.select = work.select.astype(np.float32)
        params.set_adapter(text, work.weights[text], work.biases[text])
    return TrainingResult(params=params, losses=losses)


def selection_accuracy(
    params: AdapterParams, dataset: Sequence[SelectExample]
) -> float:
    hits = sum(select_object(params, e.text, e.rows) == e.target for e in dataset)
    return hits / len(dataset)
