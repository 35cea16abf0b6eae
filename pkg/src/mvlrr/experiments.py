"""Experiment drivers behind the ``mvlrr`` command line.

Every driver is a deterministic function of its inputs and seed and returns a
:class:`Table`: flat rows for CSV output plus nested detail for JSON.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    MultiViewDataset,
    load_manifest,
    save_manifest,
    stratified_split,
    synth_generate,
)
from .predict import evaluate, predict, write_predictions
from .solver import (
    LambdaStrategy,
    fit_full_rank,
    fit_low_rank,
    load_model,
    residual_r,
    save_model,
)

MODES = (
    "train",
    "predict",
    "cv",
    "sweep",
    "ablate-bias",
    "compare-method",
    "compare-views",
    "compare-lambda",
    "compare-linear",
    "compare-fullrank",
    "synth",
    "verify",
)


@dataclass
class ExperimentConfig:
    mode: str
    manifest: str | None = None
    rank: int | None = None
    rank_range: tuple[int, int] | None = None
    lambda_strategy: str = "one"
    bias: bool = True
    method: str = "sum"
    folds: int = 5
    seed: int = 42
    out: str = "results"
    normalize: bool = True
    model: str | None = None
    # synthetic data
    n: int = 120
    classes: int = 4
    view_dims: tuple[int, ...] = (10, 10, 10)
    latent_rank: int | None = None
    noise: float = 0.5
    nuisance_rank: int = 0
    nuisance_scale: float = 0.0
    # verification
    instances: int = 20

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if self.method not in ("sum", "voting"):
            raise ValueError(f"unknown method {self.method!r}")
        LambdaStrategy.parse(self.lambda_strategy)
        if self.rank is not None and self.rank_range is not None:
            raise ValueError("give either a rank or a rank range, not both")

    def ranks(self, c: int) -> list[int]:
        if self.rank is not None:
            lo = hi = self.rank
        elif self.rank_range is not None:
            lo, hi = self.rank_range
        else:
            lo, hi = 1, c - 1
        if lo < 1 or hi > c - 1 or lo > hi:
            raise ValueError(f"rank range {lo}..{hi} is not inside 1..{c - 1}")
        return list(range(lo, hi + 1))


@dataclass
class Table:
    rows: list[dict]
    detail: dict = field(default_factory=dict)

    def write(self, out) -> tuple[Path, Path]:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = Path(f"{out}.csv"), Path(f"{out}.json")
        columns = list(self.rows[0]) if self.rows else []
        for row in self.rows:
            columns += [k for k in row if k not in columns]
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(columns)
            for row in self.rows:
                w.writerow([_fmt(row.get(k, "")) for k in columns])
        json_path.write_text(
            json.dumps({"rows": self.rows, "detail": self.detail}, indent=1, sort_keys=True, default=_jsonable)
            + "\n"
        )
        return csv_path, json_path


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return x


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialize {type(x)!r}")


def _config_columns(config: ExperimentConfig, dataset: MultiViewDataset) -> dict:
    return {
        "mode": config.mode,
        "dataset": dataset.name,
        "lambda": config.lambda_strategy,
        "bias": config.bias,
        "method": config.method,
        "normalize": config.normalize,
        "folds": config.folds,
        "seed": config.seed,
    }


def fit_model(dataset: MultiViewDataset, s: int, strategy="one", bias=True, normalize=True):
    """Low-rank model for ``s < c``; the full-rank baseline for ``s == c``."""
    if s == dataset.c:
        return fit_full_rank(dataset, strategy, bias=bias, normalize=normalize)
    return fit_low_rank(dataset, s, strategy, bias=bias, normalize=normalize)


def cv_accuracies(
    dataset: MultiViewDataset,
    folds,
    s: int,
    strategy="one",
    bias: bool = True,
    method: str = "sum",
    normalize: bool = True,
) -> list[float]:
    out = []
    for train, test in folds:
        model = fit_model(dataset.subset(train), s, strategy, bias, normalize)
        out.append(evaluate(model, dataset.subset(test), method))
    return out


def _cells(config: ExperimentConfig, dataset: MultiViewDataset):
    """Yield ``(cell_columns, dataset, rank, strategy, method)`` for the selected mode."""
    c = dataset.c
    ranks = config.ranks(c)
    strategy = config.lambda_strategy
    if config.mode in ("cv", "sweep"):
        for s in ranks:
            yield {"rank": s, "variant": "MV"}, dataset, s, strategy, config.method
    elif config.mode == "compare-method":
        for method in ("sum", "voting"):
            for s in ranks:
                yield {"rank": s, "variant": method, "method": method}, dataset, s, strategy, method
    elif config.mode == "compare-lambda":
        for strat in ("one", "sum", "p90"):
            for s in ranks:
                yield {"rank": s, "variant": strat, "lambda": strat}, dataset, s, strat, config.method
    elif config.mode == "compare-linear":
        linear = "fixed:0"
        for name, strat in (("ridge", strategy), ("linear", linear)):
            for s in ranks:
                yield {"rank": s, "variant": name, "lambda": str(strat)}, dataset, s, strat, config.method
    elif config.mode == "compare-views":
        for s in ranks:
            yield {"rank": s, "variant": "MV"}, dataset, s, strategy, config.method
        for i in range(dataset.v):
            single = dataset.select_views([i])
            for s in ranks:
                yield {"rank": s, "variant": f"V{i + 1}"}, single, s, strategy, config.method
    elif config.mode == "compare-fullrank":
        for s in ranks:
            yield {"rank": s, "variant": "low_rank"}, dataset, s, strategy, config.method
        yield {"rank": c, "variant": "full_rank"}, dataset, c, strategy, config.method
    else:
        raise ValueError(f"mode {config.mode!r} is not an accuracy sweep")


def run_cv(config: ExperimentConfig, dataset: MultiViewDataset | None = None) -> Table:
    """Stratified k-fold accuracy for every cell of the selected comparison."""
    dataset = dataset if dataset is not None else load_manifest(config.manifest)
    folds = stratified_split(dataset, config.folds, config.seed)
    base = _config_columns(config, dataset)
    rows, detail = [], []
    for cell, data, s, strategy, method in _cells(config, dataset):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            accs = cv_accuracies(data, folds, s, strategy, config.bias, method, config.normalize)
        row = {**base, **cell, "model": "full_rank" if s == dataset.c else "low_rank"}
        row["accuracy"] = float(np.mean(accs))
        row.update({f"fold_{i + 1}": a for i, a in enumerate(accs)})
        rows.append(row)
        detail.append({**row, "fold_accuracy": accs, "fold_sizes": [len(t) for _, t in folds]})
    order = sorted(range(len(rows)), key=lambda i: (rows[i]["variant"], rows[i]["rank"]))
    return Table([rows[i] for i in order], {"cells": [detail[i] for i in order], "config": _config_dict(config)})


run_sweep = run_cv
run_compare = run_cv


def run_ablate_bias(config: ExperimentConfig, dataset: MultiViewDataset | None = None) -> Table:
    """Training residual with and without intercepts for every rank."""
    dataset = dataset if dataset is not None else load_manifest(config.manifest)
    base = _config_columns(config, dataset)
    rows = []
    for s in config.ranks(dataset.c):
        with_bias = fit_low_rank(dataset, s, config.lambda_strategy, bias=True, normalize=config.normalize)
        no_bias = fit_low_rank(dataset, s, config.lambda_strategy, bias=False, normalize=config.normalize)
        r_b, r_n = residual_r(with_bias, dataset), residual_r(no_bias, dataset)
        rows.append({**base, "rank": s, "residual_bias": r_b, "residual_nobias": r_n, "gap": r_n - r_b})
    return Table(rows, {"config": _config_dict(config)})


def run_train(config: ExperimentConfig, dataset: MultiViewDataset | None = None) -> Table:
    """Fit on the whole manifest, save the model and training-set predictions."""
    dataset = dataset if dataset is not None else load_manifest(config.manifest)
    s = config.rank if config.rank is not None else dataset.c - 1
    if not 1 <= s <= dataset.c:
        raise ValueError(f"rank {s} is not inside 1..{dataset.c}")
    model = fit_model(dataset, s, config.lambda_strategy, config.bias, config.normalize)
    Path(config.out).parent.mkdir(parents=True, exist_ok=True)
    save_model(model, f"{config.out}.model.json")
    labels, fused, probs = predict(model, dataset, config.method)
    acc = evaluate(model, dataset, config.method)
    row = {**_config_columns(config, dataset), "rank": s, "accuracy": acc}
    row["objective"] = model.objective
    table = Table([row], {"config": _config_dict(config), "lambdas": model.lambdas})
    table.write(config.out)
    write_predictions(f"{config.out}.predictions.csv", labels, fused, probs)
    return table


def run_predict(config: ExperimentConfig, dataset: MultiViewDataset | None = None) -> Table:
    dataset = dataset if dataset is not None else load_manifest(config.manifest)
    if config.model is None:
        raise ValueError("predict needs --model")
    model = load_model(config.model)
    labels, fused, probs = predict(model, dataset, config.method)
    Path(config.out).parent.mkdir(parents=True, exist_ok=True)
    write_predictions(f"{config.out}.csv", labels, fused, probs)
    acc = evaluate(model, dataset, config.method)
    return Table([{**_config_columns(config, dataset), "accuracy": acc}])


def run_synth(config: ExperimentConfig) -> Path:
    latent = config.latent_rank if config.latent_rank is not None else config.classes - 1
    data = synth_generate(
        config.n,
        config.classes,
        config.view_dims,
        latent,
        config.noise,
        config.seed,
        nuisance_rank=config.nuisance_rank,
        nuisance_scale=config.nuisance_scale,
    )
    return save_manifest(data, config.out)


def run_verify(config: ExperimentConfig) -> dict:
    from .checks import run_checks

    start = time.perf_counter()
    checks = run_checks(config.seed, config.instances)
    return {
        "seed": config.seed,
        "instances": config.instances,
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
        "runtime_seconds": time.perf_counter() - start,
    }


def _config_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["view_dims"] = list(config.view_dims)
    if config.rank_range is not None:
        d["rank_range"] = list(config.rank_range)
    return d
