"""Closed-form multi-view low-rank ridge regression and its full-rank baseline.

For centered views ``X_v`` (``p_v x n``) and centered indicator ``Y`` the
low-rank model minimizes::

    J1 = sum_v ||Y - X_v^T A_v B||_F^2 + lam_v ||A_v B||_F^2

Stacking ``A = [A_1; ...; A_v]`` and ``X = [X_1; ...; X_v]``, the optimal ``A``
spans the top-``s`` generalized eigenvectors of ``(S_b, S_t)`` with
``S_b = X Y Y^T X^T`` and ``S_t = blockdiag(X_v X_v^T + lam_v I)``, and
``B = (A^T S_t A)^{-1} A^T X Y``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .data import (
    ClassIndicator,
    DataError,
    MultiViewDataset,
    PreprocessState,
    apply_preprocess,
    build_class_indicator,
    fit_preprocess,
)
from .eig import EigenError, generalized_eig


class SolverError(ValueError):
    pass


LAMBDA_KINDS = ("one", "sum", "p90", "fixed")


@dataclass(frozen=True)
class LambdaStrategy:
    """How the per-view ridge weights are chosen.

    ``one``: 1 for every view. ``sum``: the trace of ``X_v X_v^T``. ``p90``:
    the eigenvalue at the 90% position of the descending nonzero spectrum of
    ``X_v X_v^T``. ``fixed``: the given ``values`` verbatim.
    """

    kind: str = "one"
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in LAMBDA_KINDS:
            raise ValueError(f"unknown lambda strategy {self.kind!r}")
        if self.kind == "fixed":
            if not self.values:
                raise ValueError("fixed strategy needs values")
            if any(x < 0 or not math.isfinite(x) for x in self.values):
                raise ValueError("fixed lambdas must be finite and non-negative")
            object.__setattr__(self, "values", tuple(float(x) for x in self.values))

    @classmethod
    def parse(cls, text: "str | LambdaStrategy") -> "LambdaStrategy":
        """Parse ``one``, ``sum``, ``p90`` or ``fixed:v1,v2,...``."""
        if isinstance(text, LambdaStrategy):
            return text
        kind, _, rest = text.strip().lower().partition(":")
        if kind == "fixed":
            try:
                values = tuple(float(x) for x in rest.split(",") if x.strip())
            except ValueError as exc:
                raise ValueError(f"bad fixed lambdas {rest!r}") from exc
            return cls("fixed", values)
        if rest:
            raise ValueError(f"strategy {kind!r} takes no values")
        return cls(kind)

    def __str__(self) -> str:
        if self.kind == "fixed":
            return "fixed:" + ",".join(repr(x) for x in self.values)
        return self.kind


def resolve_lambda(views: Sequence[np.ndarray], strategy) -> np.ndarray:
    strategy = LambdaStrategy.parse(strategy)
    v = len(views)
    if strategy.kind == "one":
        return np.ones(v)
    if strategy.kind == "fixed":
        vals = strategy.values
        if len(vals) == 1:
            vals = vals * v
        if len(vals) != v:
            raise SolverError(f"fixed strategy has {len(vals)} values for {v} views")
        return np.array(vals, dtype=np.float64)
    if strategy.kind == "sum":
        return np.array([float(np.sum(np.asarray(X) ** 2)) for X in views])
    out = []
    for nu, X in enumerate(views, start=1):
        X = np.asarray(X, dtype=np.float64)
        w = np.linalg.eigvalsh(X @ X.T)[::-1]
        if w.size == 0 or w[0] <= 0:
            raise SolverError(f"view {nu}: p90 undefined for an all-zero spectrum")
        nonzero = w[w > 1e-12 * w[0]]
        m = nonzero.size
        out.append(float(nonzero[(9 * m + 9) // 10 - 1]))  # 1-based ceil(0.9 m)
    return np.array(out)


@dataclass(frozen=True)
class ScatterPair:
    S_b: np.ndarray
    S_t: np.ndarray
    block_offsets: tuple[int, ...]  # length v + 1; view v occupies [off[v], off[v+1])

    def split(self, A: np.ndarray) -> list[np.ndarray]:
        off = self.block_offsets
        return [A[off[i] : off[i + 1]] for i in range(len(off) - 1)]


def build_scatter(views: Sequence[np.ndarray], Y: np.ndarray, lambdas) -> ScatterPair:
    views = [np.asarray(X, dtype=np.float64) for X in views]
    Y = np.asarray(Y, dtype=np.float64)
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.shape != (len(views),):
        raise SolverError(f"need {len(views)} lambdas, got {lambdas.shape}")
    for nu, X in enumerate(views, start=1):
        if X.ndim != 2 or X.shape[1] != Y.shape[0]:
            raise SolverError(f"view {nu}: shape {X.shape} does not match {Y.shape[0]} samples")
    XY = np.vstack([X @ Y for X in views])
    S_b = XY @ XY.T
    S_t = block_diag(*[X @ X.T + lam * np.eye(X.shape[0]) for X, lam in zip(views, lambdas)])
    offsets = tuple(int(o) for o in np.concatenate([[0], np.cumsum([X.shape[0] for X in views])]))
    return ScatterPair(0.5 * (S_b + S_b.T), 0.5 * (S_t + S_t.T), offsets)


def compute_B(A: np.ndarray, scatter: ScatterPair, XY: np.ndarray, metric_normalized: bool = False):
    """Shared coefficients ``B = G^{-1} H`` with ``G = A^T S_t A`` and ``H = A^T X Y``."""
    H = A.T @ XY
    if metric_normalized:
        return H
    G = A.T @ scatter.S_t @ A
    if G.size and np.linalg.cond(G) > 1e12:
        raise SolverError("A^T S_t A is singular; A is rank deficient in the S_t metric")
    return np.linalg.solve(G, H)


def compute_bias(A: Sequence[np.ndarray], B: np.ndarray, preprocess: PreprocessState) -> np.ndarray:
    """Optimal per-view, per-class intercepts ``ybar - B^T A_v^T xbar_v`` (``v x c``)."""
    if len(A) != len(preprocess.view_means):
        raise SolverError("model and preprocessing disagree on the number of views")
    out = []
    for A_v, xbar in zip(A, preprocess.view_means):
        if A_v.shape[0] != xbar.shape[0] or A_v.shape[1] != B.shape[0]:
            raise SolverError(f"shape mismatch: A_v {A_v.shape}, xbar {xbar.shape}, B {B.shape}")
        out.append(preprocess.indicator_means - xbar @ A_v @ B)
    return np.array(out)


def _array_dict(M: np.ndarray) -> dict:
    M = np.asarray(M, dtype=np.float64)
    return {"shape": list(M.shape), "data": M.ravel().tolist()}


def _from_array_dict(d: dict) -> np.ndarray:
    return np.asarray(d["data"], dtype=np.float64).reshape(d["shape"])


@dataclass
class LowRankModel:
    A: list[np.ndarray]
    B: np.ndarray
    biases: np.ndarray
    rank: int
    lambdas: np.ndarray
    preprocess: PreprocessState
    eigenvalues: np.ndarray
    objective: float
    bias: bool = True
    deficiency: int = 0

    @property
    def coefficients(self) -> list[np.ndarray]:
        """Per-view coefficient matrices ``A_v B`` (``p_v x c``)."""
        return [A_v @ self.B for A_v in self.A]

    @property
    def n_views(self) -> int:
        return len(self.A)

    def to_dict(self) -> dict:
        return {
            "kind": "low_rank",
            "rank": self.rank,
            "lambdas": self.lambdas.tolist(),
            "A": [_array_dict(A_v) for A_v in self.A],
            "B": _array_dict(self.B),
            "biases": _array_dict(self.biases),
            "bias": self.bias,
            "preprocess": self.preprocess.to_dict(),
            "eigenvalues": self.eigenvalues.tolist(),
            "objective": self.objective,
            "deficiency": self.deficiency,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LowRankModel":
        return cls(
            A=[_from_array_dict(a) for a in d["A"]],
            B=_from_array_dict(d["B"]),
            biases=_from_array_dict(d["biases"]),
            rank=int(d["rank"]),
            lambdas=np.asarray(d["lambdas"], dtype=np.float64),
            preprocess=PreprocessState.from_dict(d["preprocess"]),
            eigenvalues=np.asarray(d["eigenvalues"], dtype=np.float64),
            objective=float(d["objective"]),
            bias=bool(d.get("bias", True)),
            deficiency=int(d.get("deficiency", 0)),
        )


@dataclass
class FullRankModel:
    Bv: list[np.ndarray]
    biases: np.ndarray
    lambdas: np.ndarray
    preprocess: PreprocessState
    objective: float = float("nan")
    bias: bool = True

    @property
    def coefficients(self) -> list[np.ndarray]:
        return list(self.Bv)

    @property
    def n_views(self) -> int:
        return len(self.Bv)

    @property
    def rank(self) -> int:
        return self.Bv[0].shape[1]

    def to_dict(self) -> dict:
        return {
            "kind": "full_rank",
            "lambdas": self.lambdas.tolist(),
            "Bv": [_array_dict(B) for B in self.Bv],
            "biases": _array_dict(self.biases),
            "bias": self.bias,
            "preprocess": self.preprocess.to_dict(),
            "objective": self.objective,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FullRankModel":
        return cls(
            Bv=[_from_array_dict(b) for b in d["Bv"]],
            biases=_from_array_dict(d["biases"]),
            lambdas=np.asarray(d["lambdas"], dtype=np.float64),
            preprocess=PreprocessState.from_dict(d["preprocess"]),
            objective=float(d["objective"]),
            bias=bool(d.get("bias", True)),
        )


def save_model(model, path) -> None:
    # repr-based float output in json round-trips doubles exactly
    Path(path).write_text(json.dumps(model.to_dict(), indent=1, sort_keys=True) + "\n")


def load_model(path):
    d = json.loads(Path(path).read_text())
    kind = d.get("kind")
    if kind == "low_rank":
        return LowRankModel.from_dict(d)
    if kind == "full_rank":
        return FullRankModel.from_dict(d)
    raise DataError(f"{path}: unknown model kind {kind!r}")


def solve_low_rank(views: Sequence[np.ndarray], Y: np.ndarray, s: int, lambdas):
    """Closed-form core on already-centered data.

    Returns ``(A_list, B, eigenvalues, scatter, deficiency)``.
    """
    scatter = build_scatter(views, Y, lambdas)
    try:
        pairs = generalized_eig(scatter.S_b, scatter.S_t, s)
    except EigenError as exc:
        raise SolverError(f"rank {s}: {exc}") from exc
    XY = np.vstack([np.asarray(X) @ Y for X in views])
    B = compute_B(pairs.vectors, scatter, XY, metric_normalized=True)
    return scatter.split(pairs.vectors), B, pairs.values, scatter, pairs.deficiency


def _indicator(dataset: MultiViewDataset, Y) -> np.ndarray:
    if Y is None:
        return build_class_indicator(dataset.labels, dataset.c).Y
    Y = Y.Y if isinstance(Y, ClassIndicator) else np.asarray(Y, dtype=np.float64)
    if Y.shape != (dataset.n, dataset.c):
        raise DataError(f"indicator shape {Y.shape} does not match ({dataset.n}, {dataset.c})")
    return Y


def fit_low_rank(
    dataset: MultiViewDataset,
    s: int,
    strategy="one",
    *,
    Y=None,
    bias: bool = True,
    normalize: bool = True,
    center: bool = True,
) -> LowRankModel:
    """Fit the rank-``s`` multi-view model (``1 <= s < c``).

    ``bias=False`` keeps the same subspace and coefficients but zeroes the
    intercepts, which is the "no bias" configuration of the bias ablation.
    """
    c = dataset.c
    if not 1 <= s < c:
        raise SolverError(f"rank must satisfy 1 <= s < c = {c}, got {s}")
    Yraw = _indicator(dataset, Y)
    views, Yc, state = fit_preprocess(dataset, Yraw, normalize=normalize, center_data=center)
    lambdas = resolve_lambda(views, strategy)
    A, B, eigvals, _, deficiency = solve_low_rank(views, Yc, s, lambdas)
    biases = compute_bias(A, B, state) if bias else np.zeros((len(A), c))
    model = LowRankModel(
        A=A,
        B=B,
        biases=biases,
        rank=s,
        lambdas=lambdas,
        preprocess=state,
        eigenvalues=eigvals,
        objective=0.0,
        bias=bias,
        deficiency=deficiency,
    )
    model.objective = objective_J1(model, views, Yc)
    return model


def fit_full_rank(
    dataset: MultiViewDataset,
    strategy="one",
    *,
    Y=None,
    bias: bool = True,
    normalize: bool = True,
    center: bool = True,
    strict: bool = False,
) -> FullRankModel:
    """Per-view ridge solutions ``B_v = (X_v X_v^T + lam_v I)^{-1} X_v Y``.

    A singular system (``lam_v = 0`` with rank-deficient ``X_v``) falls back
    to the minimum-norm least-squares solution with a warning, or raises when
    ``strict``.
    """
    Yraw = _indicator(dataset, Y)
    views, Yc, state = fit_preprocess(dataset, Yraw, normalize=normalize, center_data=center)
    lambdas = resolve_lambda(views, strategy)
    Bv = []
    for nu, (X, lam) in enumerate(zip(views, lambdas), start=1):
        M = X @ X.T + lam * np.eye(X.shape[0])
        rhs = X @ Yc
        rank = np.linalg.matrix_rank(M)
        if rank < M.shape[0]:
            if strict:
                raise SolverError(f"view {nu}: normal equations are singular (lambda={lam})")
            warnings.warn(f"view {nu}: singular normal equations, using pseudo-inverse", stacklevel=2)
            Bv.append(np.linalg.lstsq(M, rhs, rcond=None)[0])
        else:
            Bv.append(np.linalg.solve(M, rhs))
    if bias:
        biases = np.array([state.indicator_means - m @ B for m, B in zip(state.view_means, Bv)])
    else:
        biases = np.zeros((len(Bv), dataset.c))
    model = FullRankModel(Bv=Bv, biases=biases, lambdas=lambdas, preprocess=state, bias=bias)
    model.objective = float(
        sum(np.sum((Yc - X.T @ B) ** 2) + lam * np.sum(B**2) for X, B, lam in zip(views, Bv, lambdas))
    )
    return model


def objective_J1(model, views: Sequence[np.ndarray], Y: np.ndarray) -> float:
    """Bias-eliminated objective on centered ``views`` and centered ``Y``."""
    coefs = model.coefficients
    if len(views) != len(coefs):
        raise SolverError(f"model has {len(coefs)} views, got {len(views)}")
    total = 0.0
    for nu, (X, W, lam) in enumerate(zip(views, coefs, model.lambdas), start=1):
        X = np.asarray(X)
        if X.shape[0] != W.shape[0] or X.shape[1] != Y.shape[0] or W.shape[1] != Y.shape[1]:
            raise SolverError(f"view {nu}: shape mismatch")
        total += np.sum((Y - X.T @ W) ** 2) + lam * np.sum(W**2)
    return float(total)


def training_scores(model, dataset: MultiViewDataset) -> list[np.ndarray]:
    """Per-view ``n x c`` fitted indicator values on ``dataset``.

    Equals ``X_v^T A_v B + e f_v^T`` on the scaled raw features when the
    model carries bias, and the centered fit ``X_v^T A_v B`` otherwise.
    """
    views = apply_preprocess(list(dataset.views), model.preprocess)
    offset = model.preprocess.indicator_means if model.bias else 0.0
    return [X.T @ W + offset for X, W in zip(views, model.coefficients)]


def residual_r(model, dataset: MultiViewDataset, Y=None) -> float:
    """Summed label residual ``sum_v ||Y - Yhat_v||_F^2`` against the raw indicator.

    No regularization term. With bias on this equals the centered residual;
    with bias off it exceeds it by ``v * n * ||ybar||^2``.
    """
    Yraw = _indicator(dataset, Y)
    return float(sum(np.sum((Yraw - S) ** 2) for S in training_scores(model, dataset)))
