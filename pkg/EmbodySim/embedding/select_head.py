"""Sigmoid attention between a query and object features, with BCE loss."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .adapters import AdapterParams, adapt
from .encoders import Modality

EPSILON = 1e-7


def attention_gain(dim: int) -> float:
    """Input scale d^(1/4): with it, q^T W o / sqrt(d) is W's form on unit vectors."""
    return float(dim) ** 0.25


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def select_logits(
    query: np.ndarray, objects: np.ndarray, weight: np.ndarray
) -> np.ndarray:
    objects = np.atleast_2d(np.asarray(objects, dtype=np.float64))
    dim = objects.shape[1]
    weight = np.asarray(weight, dtype=np.float64)
    projected = weight.T @ np.asarray(query, dtype=np.float64)
    return objects @ projected / np.sqrt(dim)


def select_scores(query: np.ndarray, objects: np.ndarray, params) -> np.ndarray:
    """score_i = sigmoid(q^T W o_i / sqrt(d)).

    Args:
        query: Query feature q, shape (d,)
        objects: O x d object feature matrix, row i is object id i
        params: AdapterParams (its SELECT weight is used) or a d x d weight

    Returns:
        Array of O scores in (0, 1)
    """
    weight = params.select if isinstance(params, AdapterParams) else params
    return sigmoid(select_logits(query, objects, weight))


def argmax_lowest(scores: np.ndarray) -> int:
    """Index of the maximum; ties go to the lowest index."""
    return int(np.argmax(np.asarray(scores)))


def select_query(params: AdapterParams, text_feature: np.ndarray) -> np.ndarray:
    """Adapted text encoding scaled by the attention gain."""
    return attention_gain(params.dim) * adapt(params, Modality.TEXT, text_feature)


def select_rows(rows: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    return attention_gain(rows.shape[1]) * rows


def select_object(
    params: AdapterParams, text_feature: np.ndarray, rows: np.ndarray
) -> int:
    """Resolve a SELECT: object id with the highest score (lowest id on ties)."""
    query = select_query(params, text_feature)
    scores = select_scores(query, select_rows(rows), params)
    return argmax_lowest(scores)


@dataclass
class BCEGradients:
    logits: np.ndarray
    weight: Optional[np.ndarray] = None
    query: Optional[np.ndarray] = None


def bce_loss(scores: np.ndarray, target: np.ndarray) -> float:
    s = np.clip(np.asarray(scores, dtype=np.float64), EPSILON, 1.0 - EPSILON)
    t = np.asarray(target, dtype=np.float64)
    return float(-np.mean(t * np.log(s) + (1.0 - t) * np.log(1.0 - s)))


def check_target(target: np.ndarray, count: int):
    target = np.asarray(target)
    one_hot = np.isin(target, (0, 1)).all() and target.sum() == 1
    if target.shape != (count,) or not one_hot:
        raise ValueError("target must be one-hot over the objects")


def bce_loss_and_grad(
    scores: np.ndarray,
    target: np.ndarray,
    query: Optional[np.ndarray] = None,
    objects: Optional[np.ndarray] = None,
    weight: Optional[np.ndarray] = None,
):
    """Mean binary cross-entropy over objects and its analytic gradient.

    loss = -(1/O) sum_i [t_i log s_i + (1 - t_i) log(1 - s_i)], with scores
    clamped to [1e-7, 1 - 1e-7]. The logit gradient is (s_i - t_i) / O where
    the clamp is inactive and 0 where it is active. When ``query``,
    ``objects`` and ``weight`` are given the gradients with respect to W and q
    are filled in as well.

    Args:
        scores: O sigmoid scores
        target: One-hot vector of length O
        query: q used to produce the scores
        objects: O x d matrix used to produce the scores
        weight: d x d SELECT weight used to produce the scores

    Returns:
        (loss, BCEGradients)
    """
    s = np.asarray(scores, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    check_target(t, s.shape[0])
    loss = bce_loss(s, t)
    active = (s > EPSILON) & (s < 1.0 - EPSILON)
    grad_logits = np.where(active, (s - t) / s.shape[0], 0.0)
    grads = BCEGradients(logits=grad_logits)
    if query is not None and objects is not None and weight is not None:
        objects = np.atleast_2d(np.asarray(objects, dtype=np.float64))
        weight = np.asarray(weight, dtype=np.float64)
        q = np.asarray(query, dtype=np.float64)
        scale = 1.0 / np.sqrt(objects.shape[1])
        pooled = objects.T @ grad_logits
        grads.weight = scale * np.outer(q, pooled)
        grads.query = scale * (weight @ pooled)
    return loss, grads
