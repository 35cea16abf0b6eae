"""Test-time scoring and the Sum / Voting decision rules.

Class labels returned here are 1-based. Argmax ties go to the lowest class.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .data import DataError, MultiViewDataset, apply_preprocess


def score_views(x_views, model, bias: bool | None = None) -> np.ndarray:
    """Per-view score rows ``x_v^T A_v B`` (plus ``ybar`` when bias is on).

    ``x_views`` must already be preprocessed with the model's state. Vectors
    give a ``v x c`` matrix; ``p_v x m`` matrices give an ``m x v x c`` stack.
    ``bias=None`` follows the model's own setting.
    """
    coefs = model.coefficients
    if len(x_views) != len(coefs):
        raise DataError(f"model has {len(coefs)} views, got {len(x_views)}")
    use_bias = model.bias if bias is None else bias
    rows = []
    for nu, (x, W) in enumerate(zip(x_views, coefs), start=1):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != W.shape[0]:
            raise DataError(f"view {nu}: expected dimension {W.shape[0]}, got {x.shape[0]}")
        rows.append(x.T @ W)
    scores = np.stack(rows, axis=-2)
    if use_bias:
        scores = scores + model.preprocess.indicator_means
    return scores


def predict_sum(scores: np.ndarray):
    """Fuse views by averaging their score rows; returns ``(label, fused)``.

    Works on a single ``v x c`` matrix or an ``m x v x c`` stack.
    """
    scores = np.asarray(scores, dtype=np.float64)
    fused = scores.mean(axis=-2)
    return np.argmax(fused, axis=-1) + 1, fused


def predict_voting(scores: np.ndarray) -> np.ndarray:
    """Majority vote over per-view argmaxes, splitting mass evenly over tied classes."""
    scores = np.asarray(scores, dtype=np.float64)
    c = scores.shape[-1]
    votes = np.argmax(scores, axis=-1)  # (..., v)
    counts = (votes[..., None] == np.arange(c)).sum(axis=-2)
    top = counts == counts.max(axis=-1, keepdims=True)
    return top / top.sum(axis=-1, keepdims=True)


def accuracy(predictions, truth) -> float:
    """Mean probability mass on the true class; hard 1-based labels count as 0/1."""
    truth = np.asarray(truth, dtype=np.int64)
    preds = np.asarray(predictions)
    if preds.shape[0] != truth.shape[0]:
        raise ValueError(f"{preds.shape[0]} predictions for {truth.shape[0]} labels")
    if truth.size == 0:
        raise ValueError("accuracy of an empty prediction set is undefined")
    if preds.ndim == 1:
        return float(np.mean(preds.astype(np.int64) == truth))
    return float(np.mean(preds[np.arange(truth.size), truth - 1]))


def predict(model, dataset: MultiViewDataset, method: str = "sum", bias: bool | None = None):
    """Classify every sample of ``dataset``.

    Returns ``(labels, fused, probabilities)``: hard labels and fused scores
    from the Sum rule, and the vote distribution. ``method`` selects which
    of the two is reported as ``labels`` (for Voting, the tied class with the
    lowest index).
    """
    if method not in ("sum", "voting"):
        raise ValueError(f"unknown method {method!r}")
    x = apply_preprocess(list(dataset.views), model.preprocess)
    scores = score_views(x, model, bias=bias)
    labels, fused = predict_sum(scores)
    probs = predict_voting(scores)
    if method == "voting":
        labels = np.argmax(probs, axis=-1) + 1
    return labels, fused, probs


def evaluate(model, dataset: MultiViewDataset, method: str = "sum", bias: bool | None = None) -> float:
    """Accuracy of ``model`` on ``dataset``; Voting scores expected accuracy over ties."""
    labels, _, probs = predict(model, dataset, method, bias)
    return accuracy(labels if method == "sum" else probs, dataset.labels)


def write_predictions(path, labels, fused, probs) -> None:
    """CSV with ``sample_index, predicted_label, score_1..c, vote_1..c``."""
    c = fused.shape[1]
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["sample_index", "predicted_label"]
            + [f"score_{k}" for k in range(1, c + 1)]
            + [f"vote_{k}" for k in range(1, c + 1)]
        )
        for i in range(len(labels)):
            w.writerow(
                [i + 1, int(labels[i])]
                + [repr(float(x)) for x in fused[i]]
                + [repr(float(x)) for x in probs[i]]
            )
