import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from mvlrr.data import (
    DataError,
    MultiViewDataset,
    apply_preprocess,
    build_class_indicator,
    center,
    fit_preprocess,
    load_manifest,
    normalize_rows,
    save_manifest,
    stratified_split,
    synth_generate,
)
from mvlrr.predict import evaluate
from mvlrr.solver import fit_low_rank


def test_indicator_two_classes():
    Y = build_class_indicator([1, 1, 2, 2, 2], 2)
    assert_allclose(Y.Y[:, 0], [2**-0.5, 2**-0.5, 0, 0, 0], rtol=0, atol=1e-15)
    assert_allclose(Y.Y[:, 1], [0, 0, 3**-0.5, 3**-0.5, 3**-0.5], rtol=0, atol=1e-15)
    assert_array_equal(Y.class_sizes, [2, 3])


def test_indicator_singletons_is_identity():
    assert_array_equal(build_class_indicator([1, 2, 3], 3).Y, np.eye(3))


def test_indicator_single_class():
    Y = build_class_indicator([1, 1, 1, 1], 1).Y
    assert_allclose(Y[:, 0], 0.5)
    assert np.linalg.norm(Y[:, 0]) == pytest.approx(1.0)


def test_indicator_errors():
    with pytest.raises(DataError, match="class 2"):
        build_class_indicator([1, 1, 3], 3)
    with pytest.raises(DataError, match="outside"):
        build_class_indicator([1, 4], 3)
    with pytest.raises(DataError, match="outside"):
        build_class_indicator([0, 1], 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=1, max_size=40))
def test_indicator_orthonormal_columns(labels):
    labels = np.array(labels)
    _, labels = np.unique(labels, return_inverse=True)
    labels = labels + 1
    c = labels.max()
    Y = build_class_indicator(labels, c).Y
    assert np.abs(Y.T @ Y - np.eye(c)).max() <= 1e-12
    assert_array_equal((Y != 0).sum(axis=1), 1)


def test_normalize_rows_examples():
    out = normalize_rows([[3.0, 4.0]])
    assert_allclose(out.data, [[0.6, 0.8]])
    assert_allclose(out.row_norms, [5.0])
    X = np.random.default_rng(0).standard_normal((5, 9))
    Xn = normalize_rows(X).data
    assert np.trace(Xn @ Xn.T) == pytest.approx(5.0, abs=1e-10)
    assert_allclose(normalize_rows(Xn).data, Xn, rtol=0, atol=1e-15)


def test_normalize_rows_zero_row_warns():
    with pytest.warns(UserWarning, match="zero feature row"):
        out = normalize_rows([[0.0, 0.0], [1.0, 1.0]])
    assert_array_equal(out.data[0], [0, 0])
    assert_array_equal(out.zero_rows, [0])


def test_center_examples():
    views, Yc, state = center([np.array([[1.0, 3.0], [2.0, 2.0]])], build_class_indicator([1, 2], 2))
    assert_allclose(state.view_means[0], [2, 2])
    assert_allclose(views[0], [[-1, 1], [0, 0]])
    assert_allclose(Yc, [[0.5, -0.5], [-0.5, 0.5]])

    again, _, st2 = center(views, Yc)
    assert_allclose(again[0], views[0])
    assert np.abs(st2.view_means[0]).max() < 1e-15


def test_center_empty():
    with pytest.raises(DataError):
        center([np.zeros((2, 0))], np.zeros((0, 2)))


def test_centered_means_vanish():
    ds = synth_generate(50, 3, [4, 7], 2, 0.5, seed=3)
    Y = build_class_indicator(ds.labels, ds.c)
    views, Yc, _ = fit_preprocess(ds, Y)
    for X in views:
        assert np.abs(X.mean(axis=1)).max() <= 1e-12
    assert np.abs(Yc.mean(axis=0)).max() <= 1e-12


def test_apply_preprocess_examples():
    _, _, state = center([np.array([[1.0, 3.0], [2.0, 2.0]])], np.eye(2))
    assert_allclose(apply_preprocess([np.array([3.0, 1.0])], state)[0], [1, -1])
    assert_allclose(apply_preprocess([state.view_means[0]], state)[0], [0, 0])
    with pytest.raises(DataError, match="view 1"):
        apply_preprocess([np.zeros(3)], state)


def test_apply_preprocess_reproduces_training_columns():
    ds = synth_generate(30, 3, [5, 4], 2, 0.3, seed=1)
    views, _, state = fit_preprocess(ds, build_class_indicator(ds.labels, ds.c))
    for i in (0, 7, 29):
        x = apply_preprocess([X[:, i] for X in ds.views], state)
        for xv, X in zip(x, views):
            assert_allclose(xv, X[:, i], atol=1e-14)
    batch = apply_preprocess(list(ds.views), state)
    for B, X in zip(batch, views):
        assert_allclose(B, X, atol=1e-14)


def test_stratified_split_exact_divisibility():
    labels = np.array([1] * 5 + [2] * 5)
    folds = stratified_split(labels, 5, seed=0)
    for _, test in folds:
        assert sorted(labels[test]) == [1, 2]


def test_stratified_split_deterministic_and_partition():
    labels = np.random.default_rng(0).integers(1, 4, 47)
    a = stratified_split(labels, 4, seed=9)
    b = stratified_split(labels, 4, seed=9)
    for (tr1, te1), (tr2, te2) in zip(a, b):
        assert_array_equal(te1, te2)
        assert_array_equal(tr1, tr2)
    tests = np.concatenate([te for _, te in a])
    assert sorted(tests) == list(range(47))
    for tr, te in a:
        assert not set(tr) & set(te)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(3, 12), min_size=1, max_size=5), st.integers(2, 3), st.integers(0, 1000))
def test_stratified_split_balanced(sizes, k, seed):
    labels = np.repeat(np.arange(1, len(sizes) + 1), sizes)
    folds = stratified_split(labels, k, seed)
    for cls in range(1, len(sizes) + 1):
        counts = [np.sum(labels[te] == cls) for _, te in folds]
        assert max(counts) - min(counts) <= 1


def test_stratified_split_small_class():
    with pytest.raises(DataError, match="fewer than 5"):
        stratified_split(np.array([1] * 6 + [2] * 3), 5)


def test_synth_deterministic():
    a = synth_generate(40, 4, [6, 5], 3, 0.2, seed=11)
    b = synth_generate(40, 4, [6, 5], 3, 0.2, seed=11)
    for X, Z in zip(a.views, b.views):
        assert X.tobytes() == Z.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()
    assert set(a.labels) == {1, 2, 3, 4}
    assert np.bincount(a.labels).max() == 10


def test_synth_invalid():
    with pytest.raises(DataError):
        synth_generate(20, 3, [2, 5], 3)
    with pytest.raises(DataError):
        synth_generate(20, 3, [4], 2, noise_sigma=-1)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("c", [2, 3, 5])
def test_synth_noiseless_is_separable(seed, c):
    ds = synth_generate(12 * c, c, [c + 2, c + 1], c - 1, 0.0, seed=seed)
    model = fit_low_rank(ds, c - 1)
    assert evaluate(model, ds) == 1.0


def test_dataset_validation():
    with pytest.raises(DataError, match="view 2"):
        MultiViewDataset((np.zeros((2, 3)), np.zeros((2, 4))), [1, 2, 1])
    with pytest.raises(DataError, match="non-finite"):
        MultiViewDataset((np.array([[np.nan, 1.0]]),), [1, 2])
    with pytest.raises(DataError, match="class 2"):
        MultiViewDataset((np.zeros((1, 2)),), [1, 3])


def test_manifest_round_trip(tmp_path):
    ds = synth_generate(20, 2, [3, 4], 1, 0.1, seed=2)
    path = save_manifest(ds, tmp_path / "d")
    meta = json.loads(path.read_text())
    assert meta["labels"] == "labels.txt" and [v["id"] for v in meta["views"]] == [1, 2]
    back = load_manifest(path)
    assert back.view_dims == [3, 4]
    for X, Z in zip(ds.views, back.views):
        assert_array_equal(X, Z)
    assert_array_equal(ds.labels, back.labels)


def test_manifest_errors(tmp_path):
    with pytest.raises(DataError, match="missing.json"):
        load_manifest(tmp_path / "missing.json")
    (tmp_path / "labels.txt").write_text("1\n2\n")
    (tmp_path / "v.csv").write_text("1,2\n3,4\n5,6\n")
    (tmp_path / "m.json").write_text(json.dumps({"name": "x", "labels": "labels.txt", "views": [{"id": 1, "path": "v.csv"}]}))
    with pytest.raises(DataError, match="3 rows but 2 labels"):
        load_manifest(tmp_path / "m.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(DataError, match="invalid JSON"):
        load_manifest(tmp_path / "bad.json")
