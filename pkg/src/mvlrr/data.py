"""Multi-view datasets: containers, ingestion, preprocessing, splits and synthetic data.

Feature matrices follow the ``p x n`` orientation (features as rows, samples
as columns). Labels are 1-based integers everywhere in the public API.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np


class DataError(ValueError):
    """Invalid or inconsistent input data."""


@dataclass(frozen=True)
class MultiViewDataset:
    """``v`` feature matrices over the same ``n`` samples plus 1-based labels."""

    views: tuple[np.ndarray, ...]
    labels: np.ndarray
    n_classes: int | None = None
    name: str = "dataset"

    def __post_init__(self):
        views = tuple(np.array(X, dtype=np.float64) for X in self.views)
        labels = np.asarray(self.labels)
        if len(views) == 0:
            raise DataError("dataset needs at least one view")
        if labels.ndim != 1:
            raise DataError("labels must be a 1-d vector")
        if labels.size and not np.all(np.equal(np.mod(labels, 1), 0)):
            raise DataError("labels must be integers")
        labels = labels.astype(np.int64)
        n = labels.size
        for nu, X in enumerate(views, start=1):
            if X.ndim != 2:
                raise DataError(f"view {nu}: expected a 2-d matrix, got {X.ndim}-d")
            if X.shape[1] != n:
                raise DataError(f"view {nu}: has {X.shape[1]} samples, labels have {n}")
            if not np.all(np.isfinite(X)):
                raise DataError(f"view {nu}: non-finite entries")
            X.setflags(write=False)
        c = self.n_classes if self.n_classes is not None else (int(labels.max()) if n else 0)
        _check_labels(labels, c)
        labels.setflags(write=False)
        object.__setattr__(self, "views", views)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "n_classes", int(c))

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def c(self) -> int:
        return self.n_classes

    @property
    def v(self) -> int:
        return len(self.views)

    @property
    def view_dims(self) -> list[int]:
        return [X.shape[0] for X in self.views]

    def subset(self, idx) -> "MultiViewDataset":
        """Samples ``idx`` (0-based) of every view; keeps the class count."""
        idx = np.asarray(idx)
        return MultiViewDataset(
            tuple(X[:, idx] for X in self.views), self.labels[idx], self.n_classes, self.name
        )

    def select_views(self, which: Sequence[int]) -> "MultiViewDataset":
        """Keep only the views at 0-based positions ``which``."""
        return MultiViewDataset(
            tuple(self.views[i] for i in which), self.labels, self.n_classes, self.name
        )


def _check_labels(labels: np.ndarray, c: int) -> np.ndarray:
    if c < 1:
        raise DataError("need at least one class")
    if labels.size and (labels.min() < 1 or labels.max() > c):
        bad = labels[(labels < 1) | (labels > c)][0]
        raise DataError(f"label {bad} outside 1..{c}")
    sizes = np.bincount(labels - 1, minlength=c) if labels.size else np.zeros(c, int)
    empty = np.flatnonzero(sizes == 0)
    if empty.size:
        raise DataError(f"class {empty[0] + 1} has no samples")
    return sizes


@dataclass(frozen=True)
class ClassIndicator:
    """Normalized ``n x c`` indicator, ``Y[i, j] = 1/sqrt(n_j)`` when sample i is in class j."""

    Y: np.ndarray
    class_sizes: np.ndarray


def build_class_indicator(labels, c: int) -> ClassIndicator:
    labels = np.asarray(labels, dtype=np.int64)
    sizes = _check_labels(labels, c)
    Y = np.zeros((labels.size, c))
    Y[np.arange(labels.size), labels - 1] = 1.0 / np.sqrt(sizes[labels - 1])
    return ClassIndicator(Y, sizes)


class RowNormalization(NamedTuple):
    data: np.ndarray
    row_norms: np.ndarray
    zero_rows: np.ndarray


def normalize_rows(X) -> RowNormalization:
    """Scale every nonzero feature row to unit Euclidean norm.

    Zero rows stay zero; their indices are returned in ``zero_rows`` and a
    warning is emitted.
    """
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        warnings.warn(f"{zero.size} zero feature row(s) left unnormalized", stacklevel=2)
    return RowNormalization(X * _inverse_scale(norms)[:, None], norms, zero)


def _inverse_scale(norms: np.ndarray) -> np.ndarray:
    out = np.zeros_like(norms)
    nz = norms > 0
    out[nz] = 1.0 / norms[nz]
    return out


@dataclass
class PreprocessState:
    """Per-view statistics captured on training data and replayed at test time."""

    view_means: list[np.ndarray]
    indicator_means: np.ndarray
    row_norms: list[np.ndarray] | None = None
    normalized: bool = False
    centered: bool = True

    def to_dict(self) -> dict:
        return {
            "view_means": [m.tolist() for m in self.view_means],
            "indicator_means": self.indicator_means.tolist(),
            "row_norms": None if self.row_norms is None else [r.tolist() for r in self.row_norms],
            "normalized": self.normalized,
            "centered": self.centered,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PreprocessState":
        rn = d.get("row_norms")
        return cls(
            view_means=[np.asarray(m, dtype=np.float64) for m in d["view_means"]],
            indicator_means=np.asarray(d["indicator_means"], dtype=np.float64),
            row_norms=None if rn is None else [np.asarray(r, dtype=np.float64) for r in rn],
            normalized=bool(d["normalized"]),
            centered=bool(d["centered"]),
        )


def _as_views(dataset) -> list[np.ndarray]:
    if isinstance(dataset, MultiViewDataset):
        return list(dataset.views)
    return [np.asarray(X, dtype=np.float64) for X in dataset]


def center(dataset, Y):
    """Subtract per-feature and per-class-column means.

    ``dataset`` is a :class:`MultiViewDataset` or a list of ``p x n`` views;
    ``Y`` a :class:`ClassIndicator` or an ``n x c`` array. Returns the
    centered views, centered indicator and the fitted :class:`PreprocessState`.
    """
    views = _as_views(dataset)
    Y = Y.Y if isinstance(Y, ClassIndicator) else np.asarray(Y, dtype=np.float64)
    n = Y.shape[0]
    if n == 0:
        raise DataError("cannot center an empty dataset")
    for nu, X in enumerate(views, start=1):
        if X.shape[1] != n:
            raise DataError(f"view {nu}: has {X.shape[1]} samples, indicator has {n}")
    means = [X.mean(axis=1) for X in views]
    ybar = Y.mean(axis=0)
    centered = [X - m[:, None] for X, m in zip(views, means)]
    state = PreprocessState(view_means=means, indicator_means=ybar)
    return centered, Y - ybar, state


def fit_preprocess(dataset, Y, normalize: bool = True, center_data: bool = True):
    """Row-normalize (optional) then center (optional); returns ``(views, Y, state)``.

    With centering off the stored means are zero, so the fitted model is a
    regression through the origin and its bias vanishes.
    """
    views = _as_views(dataset)
    Y = Y.Y if isinstance(Y, ClassIndicator) else np.asarray(Y, dtype=np.float64)
    row_norms = None
    if normalize:
        results = [normalize_rows(X) for X in views]
        views = [r.data for r in results]
        row_norms = [r.row_norms for r in results]
    if center_data:
        views, Yc, state = center(views, Y)
    else:
        Yc = Y.copy()
        state = PreprocessState([np.zeros(X.shape[0]) for X in views], np.zeros(Y.shape[1]))
    state.row_norms = row_norms
    state.normalized = normalize
    state.centered = center_data
    return views, Yc, state


def scale_views(x_views, state: PreprocessState) -> list[np.ndarray]:
    """Apply only the stored row scaling (no centering)."""
    if len(x_views) != len(state.view_means):
        raise DataError(f"expected {len(state.view_means)} views, got {len(x_views)}")
    out = []
    for nu, x in enumerate(x_views):
        x = np.asarray(x, dtype=np.float64)
        p = state.view_means[nu].shape[0]
        if x.shape[0] != p:
            raise DataError(f"view {nu + 1}: expected dimension {p}, got {x.shape[0]}")
        if state.normalized:
            scale = _inverse_scale(state.row_norms[nu])
            x = x * (scale if x.ndim == 1 else scale[:, None])
        out.append(x)
    return out


def apply_preprocess(x_views, state: PreprocessState) -> list[np.ndarray]:
    """Replay training preprocessing on test vectors (``p_v``) or matrices (``p_v x m``)."""
    out = []
    for x, m in zip(scale_views(x_views, state), state.view_means):
        out.append(x - (m if x.ndim == 1 else m[:, None]))
    return out


def stratified_split(dataset, k: int = 5, seed: int = 0):
    """Stratified k-fold partition as a list of ``(train_idx, test_idx)`` (0-based).

    Each class is shuffled and dealt round-robin over the folds, continuing
    from where the previous class stopped so that fold sizes stay balanced.
    """
    labels = dataset.labels if isinstance(dataset, MultiViewDataset) else np.asarray(dataset)
    if k < 2:
        raise DataError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(labels, return_counts=True)
    small = classes[counts < k]
    if small.size:
        raise DataError(f"class {small[0]} has fewer than {k} samples")
    fold_of = np.empty(labels.size, dtype=np.int64)
    start = 0
    for cls in classes:
        idx = rng.permutation(np.flatnonzero(labels == cls))
        fold_of[idx] = (start + np.arange(idx.size)) % k
        start = (start + idx.size) % k
    folds = []
    for f in range(k):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        folds.append((train, test))
    return folds


def synth_generate(
    n: int,
    c: int,
    view_dims: Sequence[int],
    latent_rank: int,
    noise_sigma: float = 0.0,
    seed: int = 0,
    nuisance_rank: int = 0,
    nuisance_scale: float = 0.0,
    class_separation: float = 1.0,
) -> MultiViewDataset:
    """Draw a labelled multi-view dataset from a shared latent class structure.

    Class ``j`` has a latent mean ``mu_j`` in ``R^latent_rank``; every view maps
    it through its own random ``p_v x latent_rank`` matrix and adds isotropic
    Gaussian noise of scale ``noise_sigma``. With ``latent_rank == c - 1`` the
    means are the vertices of a randomly rotated regular simplex.

    ``nuisance_rank`` > 0 adds per-sample label-irrelevant latent factors of
    scale ``nuisance_scale``, mixed into each view by a separate random map.
    """
    view_dims = [int(p) for p in view_dims]
    if n < c or c < 1:
        raise DataError(f"need n >= c >= 1, got n={n}, c={c}")
    if not view_dims or min(view_dims) < 1:
        raise DataError("view dimensions must be positive")
    if latent_rank < 1 or latent_rank > min(c, min(view_dims)):
        raise DataError(f"latent_rank must lie in 1..{min(c, min(view_dims))}")
    if noise_sigma < 0 or nuisance_scale < 0 or nuisance_rank < 0:
        raise DataError("noise parameters must be non-negative")

    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % c) + 1
    if latent_rank == c - 1 and c > 1:
        # simplex vertices: centered identity, embedded in R^(c-1)
        E = np.eye(c) - 1.0 / c
        U, _, _ = np.linalg.svd(E)
        means = E @ U[:, : c - 1]
        means /= np.linalg.norm(means[0])
        Q, _ = np.linalg.qr(rng.standard_normal((c - 1, c - 1)))
        means = means @ Q
    else:
        means = rng.standard_normal((c, latent_rank))
    means *= class_separation
    Z = means[labels - 1].T  # latent_rank x n
    N = rng.standard_normal((nuisance_rank, n)) * nuisance_scale if nuisance_rank else None

    views = []
    for p in view_dims:
        W = rng.standard_normal((p, latent_rank))
        X = W @ Z
        if N is not None:
            X = X + rng.standard_normal((p, nuisance_rank)) @ N
        if noise_sigma > 0:
            X = X + noise_sigma * rng.standard_normal((p, n))
        views.append(X)
    return MultiViewDataset(tuple(views), labels, c, name="synthetic")


# --- file formats -----------------------------------------------------------


def _read_csv_matrix(path: Path) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    try:
        M = np.array([[float(cell) for cell in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if M.ndim != 2:
        raise DataError(f"{path}: rows have inconsistent lengths")
    return M


def _read_labels(path: Path) -> np.ndarray:
    try:
        lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    try:
        return np.array([int(ln) for ln in lines], dtype=np.int64)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def load_manifest(path) -> MultiViewDataset:
    """Load a dataset described by a JSON manifest.

    The manifest holds ``{"name", "labels", "views": [{"id", "path"}]}``;
    relative paths resolve against the manifest's directory. View CSVs are
    ``n x p_v`` (samples as rows) and are transposed on load.
    """
    path = Path(path)
    try:
        meta = json.loads(path.read_text())
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc
    try:
        label_path = path.parent / meta["labels"]
        entries = sorted(meta["views"], key=lambda e: int(e["id"]))
        view_paths = [path.parent / e["path"] for e in entries]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed manifest ({exc!r})") from exc
    labels = _read_labels(label_path)
    views = []
    for vp in view_paths:
        M = _read_csv_matrix(vp)
        if M.shape[0] != labels.size:
            raise DataError(f"{vp}: {M.shape[0]} rows but {labels.size} labels")
        views.append(M.T)
    try:
        return MultiViewDataset(tuple(views), labels, name=str(meta.get("name", path.stem)))
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from exc


def save_manifest(dataset: MultiViewDataset, directory) -> Path:
    """Write ``dataset`` as view CSVs, a labels file and ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for nu, X in enumerate(dataset.views, start=1):
        name = f"view{nu}.csv"
        with open(directory / name, "w", newline="") as fh:
            w = csv.writer(fh)
            for row in X.T:
                w.writerow([repr(float(x)) for x in row])
        entries.append({"id": nu, "path": name})
    (directory / "labels.txt").write_text("".join(f"{int(y)}\n" for y in dataset.labels))
    manifest = {"name": dataset.name, "labels": "labels.txt", "views": entries}
    out = directory / "manifest.json"
    out.write_text(json.dumps(manifest, indent=2) + "\n")
    return out
