"""Self-verification suite run by ``mvlrr verify``.

Each check draws its own random instances from the seed and reports the
worst measured deviation against a fixed tolerance.
"""

from __future__ import annotations

import warnings

import numpy as np

from .data import MultiViewDataset, apply_preprocess, build_class_indicator, fit_preprocess
from .eig import generalized_eig
from .oracle import (
    OracleConfig,
    analytic_gradient,
    fullrank_objective,
    gd_minimize_fullrank,
    gd_minimize_lowrank,
)
from .predict import predict_sum, predict_voting, score_views
from .solver import (
    build_scatter,
    compute_B,
    fit_full_rank,
    fit_low_rank,
    objective_J1,
    residual_r,
    training_scores,
)


def random_instance(rng, n_max=30, v_max=3, p_max=8, c_max=4, c_min=2):
    """Small random dataset with offset features and every class present."""
    c = int(rng.integers(c_min, c_max + 1))
    n = int(rng.integers(max(3 * c, 10), n_max + 1))
    v = int(rng.integers(1, v_max + 1))
    dims = [int(rng.integers(2, p_max + 1)) for _ in range(v)]
    while sum(dims) < c:
        dims = [int(rng.integers(2, p_max + 1)) for _ in range(v)]
    labels = rng.permutation(np.concatenate([np.arange(1, c + 1), rng.integers(1, c + 1, n - c)]))
    views = [rng.standard_normal((p, n)) + rng.standard_normal((p, 1)) for p in dims]
    return MultiViewDataset(tuple(views), labels, c)


def _fixed(lam) -> str:
    return "fixed:" + ",".join(repr(float(x)) for x in lam)


def _entry(name, deviation, tolerance, **extra):
    deviation = float(deviation)
    return {"name": name, "deviation": deviation, "tolerance": tolerance, "passed": bool(deviation <= tolerance), **extra}


def check_closed_form_vs_oracle(rng, instances):
    worst_rel, worst_gap = 0.0, -np.inf
    for _ in range(instances):
        ds = random_instance(rng)
        lam = rng.uniform(0.1, 2.0, ds.v)
        Y = build_class_indicator(ds.labels, ds.c).Y
        for s in range(1, ds.c):
            model = fit_low_rank(ds, s, _fixed(lam), normalize=False)
            res = gd_minimize_lowrank(list(ds.views), Y, s, lam, OracleConfig(seed=int(rng.integers(2**31))))
            worst_gap = max(worst_gap, model.objective - res.objective)
            worst_rel = max(worst_rel, abs(res.objective - model.objective) / model.objective)
    return [
        _entry("closed_form_not_beaten_by_oracle", max(worst_gap, 0.0), 1e-6),
        _entry("closed_form_matches_oracle", worst_rel, 1e-4),
    ]


def check_trace_identity(rng, instances):
    worst = 0.0
    for _ in range(instances):
        ds = random_instance(rng)
        Y = build_class_indicator(ds.labels, ds.c).Y
        views, Yc, _ = fit_preprocess(ds, Y)
        for s in range(1, ds.c):
            model = fit_low_rank(ds, s)
            A = np.vstack(model.A)
            scatter = build_scatter(views, Yc, model.lambdas)
            G = A.T @ scatter.S_t @ A
            HY = A.T @ np.vstack([X @ Yc for X in views])
            lhs = model.objective + np.trace(np.linalg.solve(G, HY) @ HY.T)
            rhs = ds.v * np.sum(Yc**2)
            worst = max(worst, abs(lhs - rhs) / rhs)
    return [_entry("trace_identity", worst, 1e-8)]


def check_bias(rng, instances):
    not_increased = 0
    worst_order = -np.inf
    for _ in range(instances):
        ds = random_instance(rng)
        Y = build_class_indicator(ds.labels, ds.c).Y
        for s in range(1, ds.c):
            model = fit_low_rank(ds, s, normalize=False)
            Bv = model.coefficients
            base = fullrank_objective(list(ds.views), Y, Bv, model.biases, model.lambdas)
            for nu in range(ds.v):
                for k in range(ds.c):
                    for delta in (-1e-2, 1e-2):
                        F = model.biases.copy()
                        F[nu, k] += delta
                        bumped = fullrank_objective(list(ds.views), Y, Bv, F, model.lambdas)
                        not_increased += int(not bumped > base)
            nob = fit_low_rank(ds, s, normalize=False, bias=False)
            worst_order = max(worst_order, residual_r(model, ds) - residual_r(nob, ds))
    # deviation is the number of perturbations that failed to raise the loss
    return [
        _entry("bias_perturbation_increases_loss", not_increased, 0.0),
        _entry("residual_bias_not_above_nobias", max(worst_order, 0.0), 1e-9),
    ]


def check_full_rank(rng, instances):
    worst_grad, worst_rel = 0.0, 0.0
    for i in range(instances):
        ds = random_instance(rng)
        lam = rng.uniform(0.1, 2.0, ds.v)
        Y = build_class_indicator(ds.labels, ds.c).Y
        model = fit_full_rank(ds, _fixed(lam), normalize=False)
        point = {"Bv": model.Bv, "F": model.biases}
        g = analytic_gradient("fullrank", list(ds.views), Y, lam, point)
        worst_grad = max(worst_grad, max(np.abs(x).max() for x in g["Bv"]), np.abs(g["F"]).max())
        if i < max(3, instances // 4):
            closed = fullrank_objective(list(ds.views), Y, model.Bv, model.biases, lam)
            res = gd_minimize_fullrank(list(ds.views), Y, lam, OracleConfig(restarts=2, tol=1e-13))
            worst_rel = max(worst_rel, abs(res.objective - closed) / closed)
    return [
        _entry("full_rank_stationarity", worst_grad, 1e-8),
        _entry("full_rank_matches_oracle", worst_rel, 1e-6),
    ]


def check_eigensolver(rng, instances):
    worst_res, worst_orth, worst_direct = 0.0, 0.0, 0.0
    for _ in range(instances):
        ds = random_instance(rng)
        Y = build_class_indicator(ds.labels, ds.c).Y
        views, Yc, _ = fit_preprocess(ds, Y)
        scatter = build_scatter(views, Yc, rng.uniform(0.1, 2.0, ds.v))
        m = scatter.S_t.shape[0]
        pairs = generalized_eig(scatter.S_b, scatter.S_t, m)
        A = pairs.vectors
        scale = np.linalg.norm(scatter.S_b) + np.abs(pairs.values) * np.linalg.norm(scatter.S_t)
        res = np.linalg.norm(scatter.S_b @ A - scatter.S_t @ A * pairs.values, axis=0) / scale
        worst_res = max(worst_res, res.max())
        worst_orth = max(worst_orth, np.abs(A.T @ scatter.S_t @ A - np.eye(m)).max())
        direct = np.sort(np.linalg.eigvals(np.linalg.inv(scatter.S_t) @ scatter.S_b).real)[::-1]
        worst_direct = max(worst_direct, np.abs(direct - pairs.values).max() / max(1.0, np.abs(direct).max()))
    return [
        _entry("eig_residual", worst_res, 1e-8),
        _entry("eig_metric_orthonormality", worst_orth, 1e-8),
        _entry("eig_matches_direct_inverse", worst_direct, 1e-8),
    ]


def check_invariances(rng, instances):
    worst_basis, worst_shift, worst_mono = 0.0, 0.0, -np.inf
    for _ in range(instances):
        ds = random_instance(rng)
        Y = build_class_indicator(ds.labels, ds.c).Y
        views, Yc, _ = fit_preprocess(ds, Y)
        objectives = []
        for s in range(1, ds.c):
            model = fit_low_rank(ds, s)
            objectives.append(model.objective)
            A = np.vstack(model.A)
            R = rng.standard_normal((s, s)) + 3 * np.eye(s)
            scatter = build_scatter(views, Yc, model.lambdas)
            XY = np.vstack([X @ Yc for X in views])
            AR = A @ R
            B2 = compute_B(AR, scatter, XY)
            W1, W2 = A @ model.B, AR @ B2
            worst_basis = max(worst_basis, np.abs(W1 - W2).max() / max(1.0, np.abs(W1).max()))

            plain = fit_low_rank(ds, s, normalize=False)
            shift = [X + rng.standard_normal((X.shape[0], 1)) * 5 for X in ds.views]
            moved = MultiViewDataset(tuple(shift), ds.labels, ds.c)
            other = fit_low_rank(moved, s, normalize=False)
            for S1, S2 in zip(training_scores(plain, ds), training_scores(other, moved)):
                worst_shift = max(worst_shift, np.abs(S1 - S2).max())
        worst_mono = max([worst_mono] + [b - a for a, b in zip(objectives, objectives[1:])])
    return [
        _entry("basis_change_invariance", worst_basis, 1e-8),
        _entry("feature_shift_invariance", worst_shift, 1e-9),
        _entry("objective_monotone_in_rank", max(worst_mono, 0.0), 1e-10),
    ]


def check_decision_rules(rng, instances):
    worst = 0.0
    for _ in range(instances):
        v, c = int(rng.integers(1, 5)), int(rng.integers(2, 6))
        S = rng.standard_normal((v, c))
        _, y = predict_sum(S)
        # stationarity of sum_v ||y - s_v||^2 at the fused vector
        worst = max(worst, np.abs(2 * (v * y - S.sum(axis=0))).max())
    tie = predict_voting(np.array([[0.9, 0.1], [0.2, 0.8]]))
    tie_dev = np.abs(tie - 0.5).max()
    return [_entry("sum_rule_is_minimizer", worst, 1e-12), _entry("voting_two_way_tie", tie_dev, 0.0)]


def check_objective_consistency(rng, instances):
    worst = 0.0
    for _ in range(instances):
        ds = random_instance(rng)
        Y = build_class_indicator(ds.labels, ds.c).Y
        views, Yc, state = fit_preprocess(ds, Y)
        for s in range(1, ds.c):
            model = fit_low_rank(ds, s)
            expected = ds.v * np.sum(Yc**2) - model.eigenvalues.sum()
            worst = max(worst, abs(objective_J1(model, views, Yc) - expected) / max(1.0, expected))
            x = apply_preprocess([X[:, 0] for X in ds.views], state)
            row = score_views(x, model)
            worst = max(worst, np.abs(row - np.array([S[0] for S in training_scores(model, ds)])).max())
    return [_entry("objective_equals_eigen_gap", worst, 1e-8)]


CHECKS = (
    check_closed_form_vs_oracle,
    check_trace_identity,
    check_bias,
    check_full_rank,
    check_eigensolver,
    check_invariances,
    check_decision_rules,
    check_objective_consistency,
)


def run_checks(seed: int = 42, instances: int = 20) -> list[dict]:
    rng = np.random.default_rng(seed)
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for check in CHECKS:
            out.extend(check(np.random.default_rng(rng.integers(2**63)), instances))
    return out
