"""Brute-force verifier for the closed-form solvers.

Minimizes the raw, bias-carrying objectives by gradient descent with
backtracking, from several random starts, on small instances:

    low-rank   J = sum_v ||Y - X_v^T A_v B - e f_v^T||^2 + lam_v ||A_v B||^2
    full-rank  J = sum_v ||Y - X_v^T B_v   - e f_v^T||^2 + lam_v ||B_v||^2

Nothing here touches the eigen-solver path; ``X`` and ``Y`` are used as given
(not centered), so the intercepts are optimized explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    max_iters: int = 20000
    tol: float = 1e-10
    restarts: int = 5
    seed: int = 0
    init_step: float = 1e-2
    armijo: float = 1e-4

    def __post_init__(self):
        if self.max_iters < 1 or self.tol <= 0 or self.restarts < 1:
            raise ValueError("need max_iters >= 1, tol > 0, restarts >= 1")


@dataclass
class OracleResult:
    params: dict
    objective: float
    trace: list = field(default_factory=list)
    converged: bool = False


class _Problem:
    """Views zero-padded to a common height so all views are handled in one batched product."""

    def __init__(self, views, Y, lambdas):
        views = [np.asarray(X, dtype=np.float64) for X in views]
        self.Y = np.asarray(Y, dtype=np.float64)
        self.n, self.c = self.Y.shape
        self.dims = [X.shape[0] for X in views]
        self.v = len(views)
        self.pmax = max(self.dims)
        self.X = np.zeros((self.v, self.pmax, self.n))
        for i, X in enumerate(views):
            if X.shape[1] != self.n:
                raise ValueError(f"view {i + 1}: {X.shape[1]} samples, Y has {self.n}")
            self.X[i, : X.shape[0]] = X
        self.Xt = self.X.transpose(0, 2, 1).copy()
        self.lam = np.asarray(lambdas, dtype=np.float64).reshape(self.v, 1, 1)
        self.mask = np.zeros((self.v, self.pmax, 1))
        for i, p in enumerate(self.dims):
            self.mask[i, :p] = 1.0

    def _fit_terms(self, W, F):
        R = self.Y - (self.Xt @ W + F[:, None, :])
        return R, float(np.sum(R * R) + np.sum(self.lam * W * W))

    def _dW(self, R, W):
        return (-2.0 * (self.X @ R) + 2.0 * self.lam * W) * self.mask


class _LowRank(_Problem):
    def __init__(self, views, Y, lambdas, s):
        super().__init__(views, Y, lambdas)
        self.s = s
        self.sizes = (self.v * self.pmax * s, s * self.c, self.v * self.c)

    def unpack(self, theta):
        a, b, _ = self.sizes
        A = theta[:a].reshape(self.v, self.pmax, self.s)
        B = theta[a : a + b].reshape(self.s, self.c)
        F = theta[a + b :].reshape(self.v, self.c)
        return A, B, F

    def pack(self, A_list, B, F):
        A = np.zeros((self.v, self.pmax, self.s))
        for i, A_v in enumerate(A_list):
            A[i, : A_v.shape[0]] = A_v
        return np.concatenate([A.ravel(), np.asarray(B, float).ravel(), np.asarray(F, float).ravel()])

    def value(self, theta):
        A, B, F = self.unpack(theta)
        return self._fit_terms(A @ B, F)[1]

    def value_and_grad(self, theta):
        A, B, F = self.unpack(theta)
        W = A @ B
        R, J = self._fit_terms(W, F)
        dW = self._dW(R, W)
        dA = dW @ B.T
        dB = np.einsum("vps,vpc->sc", A, dW)
        dF = -2.0 * R.sum(axis=1)
        return J, np.concatenate([dA.ravel(), dB.ravel(), dF.ravel()])

    def random_start(self, rng):
        A = rng.standard_normal((self.v, self.pmax, self.s)) * self.mask / np.sqrt(self.pmax)
        B = rng.standard_normal((self.s, self.c)) / np.sqrt(self.s)
        return np.concatenate([A.ravel(), B.ravel(), np.zeros(self.v * self.c)])

    def to_params(self, theta):
        A, B, F = self.unpack(theta)
        return {"A": [A[i, :p].copy() for i, p in enumerate(self.dims)], "B": B.copy(), "F": F.copy()}


class _FullRank(_Problem):
    def unpack(self, theta):
        k = self.v * self.pmax * self.c
        return theta[:k].reshape(self.v, self.pmax, self.c), theta[k:].reshape(self.v, self.c)

    def pack(self, Bv, F):
        W = np.zeros((self.v, self.pmax, self.c))
        for i, B in enumerate(Bv):
            W[i, : B.shape[0]] = B
        return np.concatenate([W.ravel(), np.asarray(F, float).ravel()])

    def value(self, theta):
        W, F = self.unpack(theta)
        return self._fit_terms(W, F)[1]

    def value_and_grad(self, theta):
        W, F = self.unpack(theta)
        R, J = self._fit_terms(W, F)
        return J, np.concatenate([self._dW(R, W).ravel(), (-2.0 * R.sum(axis=1)).ravel()])

    def random_start(self, rng):
        W = rng.standard_normal((self.v, self.pmax, self.c)) * self.mask / np.sqrt(self.pmax)
        return np.concatenate([W.ravel(), np.zeros(self.v * self.c)])

    def to_params(self, theta):
        W, F = self.unpack(theta)
        return {"Bv": [W[i, :p].copy() for i, p in enumerate(self.dims)], "F": F.copy()}


def _descend(problem, theta, config: OracleConfig):
    """Gradient descent with Barzilai-Borwein trial steps and Armijo backtracking by halving."""
    J, g = problem.value_and_grad(theta)
    if not np.isfinite(J):
        raise OracleError("non-finite objective at the starting point")
    trace = [J]
    step = config.init_step
    converged = False
    for _ in range(config.max_iters):
        gg = float(g @ g)
        if gg == 0.0:
            converged = True
            break
        while True:
            trial = theta - step * g
            J_new, g_new = problem.value_and_grad(trial)
            if not np.isfinite(J_new):
                if step < 1e-300:
                    raise OracleError("non-finite objective during descent")
                step *= 0.5
                continue
            if J_new <= J - config.armijo * step * gg:
                break
            step *= 0.5
            if step < 1e-30:
                return theta, trace, True
        ds, dg = trial - theta, g_new - g
        theta, g = trial, g_new
        J_prev, J = J, J_new
        trace.append(J)
        if J_prev - J <= config.tol * max(abs(J), 1e-30):
            converged = True
            break
        sy = float(ds @ dg)
        step = float(ds @ ds) / sy if sy > 0 else 2.0 * step
    return theta, trace, converged


def _multi_start(problem, config: OracleConfig) -> OracleResult:
    rng = np.random.default_rng(config.seed)
    best = None
    for _ in range(config.restarts):
        theta, trace, converged = _descend(problem, problem.random_start(rng), config)
        if best is None or trace[-1] < best.objective:
            best = OracleResult(problem.to_params(theta), trace[-1], trace, converged)
    return best


def gd_minimize_lowrank(views, Y, s: int, lambdas, config: OracleConfig | None = None) -> OracleResult:
    """Best-of-restarts minimizer over ``({A_v}, B, {f_v})``; ``params`` has keys ``A``, ``B``, ``F``."""
    return _multi_start(_LowRank(views, Y, lambdas, s), config or OracleConfig())


def gd_minimize_fullrank(views, Y, lambdas, config: OracleConfig | None = None) -> OracleResult:
    """Best-of-restarts minimizer over ``({B_v}, {f_v})``; ``params`` has keys ``Bv``, ``F``."""
    return _multi_start(_FullRank(views, Y, lambdas), config or OracleConfig())


def lowrank_objective(views, Y, A, B, F, lambdas) -> float:
    p = _LowRank(views, Y, lambdas, np.asarray(B).shape[0])
    return p.value(p.pack(A, B, F))


def fullrank_objective(views, Y, Bv, F, lambdas) -> float:
    """Per-view ridge loss with intercepts; with ``Bv = [A_v B]`` this is the original bias-carrying loss."""
    p = _FullRank(views, Y, lambdas)
    return p.value(p.pack(Bv, F))


def analytic_gradient(objective: str, views, Y, lambdas, point: dict) -> dict:
    problem, theta = _problem_at(objective, views, Y, lambdas, point)
    return problem.to_params(problem.value_and_grad(theta)[1])


def _problem_at(objective, views, Y, lambdas, point):
    if objective == "lowrank":
        B = np.asarray(point["B"])
        problem = _LowRank(views, Y, lambdas, B.shape[0])
        return problem, problem.pack(point["A"], B, point["F"])
    if objective == "fullrank":
        problem = _FullRank(views, Y, lambdas)
        return problem, problem.pack(point["Bv"], point["F"])
    raise ValueError(f"unknown objective {objective!r}")


def grad_check(
    objective: str,
    point: dict,
    epsilon: float,
    views,
    Y,
    lambdas,
    n_directions: int = 0,
    seed: int = 0,
) -> float:
    """Largest deviation between central differences and the analytic gradient.

    Coordinate mode (``n_directions=0``) differences every free coordinate;
    otherwise directional derivatives along random unit directions are
    compared. Deviations are ``|fd - an| / max(1, |an|)``.
    """
    if not 1e-7 <= epsilon <= 1e-4:
        raise ValueError("epsilon must lie in [1e-7, 1e-4]")
    problem, theta = _problem_at(objective, views, Y, lambdas, point)
    _, g = problem.value_and_grad(theta)
    free = np.flatnonzero(problem.pack(*_ones_like(problem)) != 0)
    if n_directions:
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_directions):
            d = np.zeros_like(theta)
            d[free] = rng.standard_normal(free.size)
            d /= np.linalg.norm(d)
            fd = (problem.value(theta + epsilon * d) - problem.value(theta - epsilon * d)) / (2 * epsilon)
            an = float(g @ d)
            worst = max(worst, abs(fd - an) / max(1.0, abs(an)))
        return worst
    worst = 0.0
    for i in free:
        e = np.zeros_like(theta)
        e[i] = epsilon
        fd = (problem.value(theta + e) - problem.value(theta - e)) / (2 * epsilon)
        worst = max(worst, abs(fd - g[i]) / max(1.0, abs(g[i])))
    return worst


def _ones_like(problem):
    if isinstance(problem, _LowRank):
        return ([np.ones((p, problem.s)) for p in problem.dims], np.ones((problem.s, problem.c)), np.ones((problem.v, problem.c)))
    return ([np.ones((p, problem.c)) for p in problem.dims], np.ones((problem.v, problem.c)))
