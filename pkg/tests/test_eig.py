import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from mvlrr.data import build_class_indicator, center
from mvlrr.eig import EigenError, generalized_eig, metric_normalize, symmetric_eig


def _spd(rng, m):
    Q = rng.standard_normal((m, m))
    return Q @ Q.T + 0.5 * np.eye(m)


def _random_pencil(rng, p=3, n=8, lam=1.0):
    X = rng.standard_normal((p, n))
    labels = np.array([1, 2] * (n // 2))
    Xc, Yc, _ = center([X], build_class_indicator(labels, 2))
    XY = Xc[0] @ Yc
    return XY @ XY.T, Xc[0] @ Xc[0].T + lam * np.eye(p)


def test_symmetric_eig_diag():
    pairs = symmetric_eig(np.diag([1.0, 4.0]))
    assert_allclose(pairs.values, [4, 1])
    assert_allclose(np.abs(pairs.vectors), [[0, 1], [1, 0]])


def test_symmetric_eig_identity():
    assert_allclose(symmetric_eig(np.eye(3)).values, 1.0)


def test_symmetric_eig_reconstruction():
    rng = np.random.default_rng(0)
    M = rng.standard_normal((6, 6))
    M = M + M.T
    p = symmetric_eig(M)
    R = p.vectors @ np.diag(p.values) @ p.vectors.T
    assert np.linalg.norm(M - R) <= 1e-10 * np.linalg.norm(M)
    assert np.all(np.diff(p.values) <= 0)


def test_symmetric_eig_rejects_nan():
    with pytest.raises(EigenError, match="non-finite"):
        symmetric_eig(np.array([[np.nan, 0], [0, 1]]))


def test_generalized_reduces_to_standard():
    pairs = generalized_eig(np.diag([4.0, 1.0]), np.eye(2), 2)
    assert_allclose(pairs.values, [4, 1])
    assert pairs.metric_normalized and pairs.deficiency == 0


def test_generalized_same_matrix_gives_one():
    S = _spd(np.random.default_rng(1), 4)
    assert generalized_eig(S, S, 1).values[0] == pytest.approx(1.0, abs=1e-12)


def test_generalized_matches_direct_inverse():
    rng = np.random.default_rng(2)
    S_b, S_t = _random_pencil(rng)
    pairs = generalized_eig(S_b, S_t, 3)
    direct = np.sort(np.linalg.eigvals(np.linalg.inv(S_t) @ S_b).real)[::-1]
    assert_allclose(pairs.values, direct, atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 7))
def test_generalized_invariants(seed, m):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((m, 2))
    S_b = G @ G.T
    S_t = _spd(rng, m)
    s = int(rng.integers(1, m + 1))
    pairs = generalized_eig(S_b, S_t, s)
    A, w = pairs.vectors, pairs.values
    assert np.all(np.diff(w) <= 0)
    assert np.abs(A.T @ S_t @ A - np.eye(s)).max() <= 1e-8
    scale = np.linalg.norm(S_b) + np.abs(w) * np.linalg.norm(S_t)
    assert np.all(np.linalg.norm(S_b @ A - S_t @ A * w, axis=0) <= 1e-8 * scale)
    assert w.min() >= -1e-10
    trace = np.trace(np.linalg.solve(A.T @ S_t @ A, A.T @ S_b @ A))
    assert trace == pytest.approx(w.sum(), rel=1e-8, abs=1e-12)


def test_rescaled_vector_renormalizes_to_same():
    rng = np.random.default_rng(4)
    S_b, S_t = _random_pencil(rng, p=4, n=10)
    a = generalized_eig(S_b, S_t, 1).vectors
    b = metric_normalize(-7.5 * a, S_t)
    assert_allclose(np.abs(b), np.abs(a), atol=1e-12)
    assert abs((b.T @ S_t @ b).item()) == pytest.approx(1.0)


def test_sign_convention():
    rng = np.random.default_rng(5)
    S_b, S_t = _random_pencil(rng, p=4, n=10)
    A = generalized_eig(S_b, S_t, 2).vectors
    for col in A.T:
        assert col[np.flatnonzero(np.abs(col) > 1e-12)[0]] > 0


def test_singular_metric_falls_back_with_warning():
    # rank-deficient X with lambda = 0: S_t singular
    rng = np.random.default_rng(6)
    X = rng.standard_normal((2, 8))
    X = np.vstack([X, X[0] + X[1]])
    Xc, Yc, _ = center([X], build_class_indicator(np.array([1, 2] * 4), 2))
    XY = Xc[0] @ Yc
    S_b, S_t = XY @ XY.T, Xc[0] @ Xc[0].T
    with pytest.warns(UserWarning, match="singular"):
        pairs = generalized_eig(S_b, S_t, 1)
    assert pairs.deficiency == 1
    a = pairs.vectors
    assert (a.T @ S_t @ a).item() == pytest.approx(1.0)
    assert np.linalg.norm(S_b @ a - pairs.values[0] * S_t @ a) <= 1e-8 * np.linalg.norm(S_b)
    # the pseudo-inverse spectrum agrees with the restriction to the range
    direct = np.linalg.eigvals(np.linalg.pinv(S_t) @ S_b).real.max()
    assert pairs.values[0] == pytest.approx(direct, rel=1e-8)


def test_errors():
    with pytest.raises(EigenError, match="usable subspace"):
        generalized_eig(np.eye(2), np.diag([1.0, 0.0]), 2)
    with pytest.raises(EigenError, match="indefinite"):
        generalized_eig(np.eye(2), np.diag([1.0, -1.0]), 1)
    with pytest.raises(EigenError, match="shape"):
        generalized_eig(np.eye(2), np.eye(3), 1)
