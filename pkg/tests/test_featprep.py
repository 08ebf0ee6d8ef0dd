"""Feature vectorization, ridge solver, recursive elimination, and
leak-free standardization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from popfuse.featprep import (FeaturePipeline, ParameterError, fit_pipeline,
                              ridge_fit, rfe_select, standardize_fit_apply,
                              unvectorize_upper_triangular,
                              vectorize_upper_triangular)


def test_vectorize_ordering():
    a, b, c = 0.1, 0.2, 0.3
    m = np.array([[1, a, b], [a, 1, c], [b, c, 1]])
    assert np.array_equal(vectorize_upper_triangular(m), [a, b, c])


def test_vectorize_lengths():
    assert vectorize_upper_triangular(np.eye(111)).size == 6105
    assert vectorize_upper_triangular(np.eye(116)).size == 6670


def test_vectorize_rejects_asymmetry():
    m = np.zeros((3, 3))
    m[0, 1] = 1.0
    with pytest.raises(ParameterError):
        vectorize_upper_triangular(m)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 10), st.integers(0, 1000))
def test_vectorize_round_trip(r, seed):
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=(r, r))
    m = raw + raw.T
    np.fill_diagonal(m, 0.0)
    v = vectorize_upper_triangular(m)
    assert np.allclose(unvectorize_upper_triangular(v, r), m)


def test_ridge_perfect_single_feature():
    rng = np.random.default_rng(0)
    y = rng.normal(size=30)
    w = ridge_fit(y[:, None], y, 1e-10)
    assert abs(w[0] - 1.0) < 1e-6


def test_ridge_zero_design():
    w = ridge_fit(np.zeros((10, 4)), np.arange(10.0), 1.0)
    assert np.array_equal(w, np.zeros(4))


def test_ridge_normal_equations_residual():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(20, 5))
    y = rng.normal(size=20)
    alpha = 0.7
    w = ridge_fit(X, y, alpha)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    residual = (Xc.T @ Xc + alpha * np.eye(5)) @ w - Xc.T @ yc
    assert np.max(np.abs(residual)) < 1e-10


def test_ridge_dual_matches_primal():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(8, 20))   # d > n triggers the dual path
    y = rng.normal(size=8)
    alpha = 0.5
    w_dual = ridge_fit(X, y, alpha)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    w_primal = np.linalg.solve(Xc.T @ Xc + alpha * np.eye(20), Xc.T @ yc)
    assert np.allclose(w_dual, w_primal, atol=1e-10)


def test_ridge_rejects_bad_alpha():
    with pytest.raises(ParameterError):
        ridge_fit(np.ones((4, 2)), np.ones(4), 0.0)


def test_rfe_no_elimination_needed():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(10, 6))
    idx = rfe_select(X, rng.integers(0, 2, size=10), target_dim=6)
    assert np.array_equal(idx, np.arange(6))


def test_rfe_keeps_informative_features():
    rng = np.random.default_rng(4)
    y = rng.integers(0, 2, size=60)
    signal = np.where(y > 0, 1.0, -1.0)
    noise = rng.normal(size=(60, 50))
    X = np.column_stack([noise[:, :25], signal, noise[:, 25:], signal])
    idx = rfe_select(X, y, target_dim=2, drop_fraction=0.2)
    assert set(idx) == {25, 51}


def test_rfe_tie_drops_lower_index():
    # duplicate columns get bit-identical weights on the dual ridge path
    # (d > n); of an exactly tied pair, the lower original index goes first
    rng = np.random.default_rng(6)
    n = 10
    base = rng.normal(size=n)
    y = np.arange(n) % 2
    signal = np.where(y > 0, 1.0, -1.0)
    X = np.column_stack([base, base, signal]
                        + [rng.normal(size=n) for _ in range(9)])
    w = ridge_fit(X, signal, 1.0)
    assert w[0] == w[1]  # the tie this test depends on
    idx = rfe_select(X, y, target_dim=11, alpha=1.0, drop_fraction=0.01)
    assert 0 not in idx and 1 in idx


def test_rfe_prefilters_constant_features():
    rng = np.random.default_rng(6)
    y = rng.integers(0, 2, size=20)
    X = np.column_stack([np.full(20, 3.0), rng.normal(size=(20, 4))])
    idx = rfe_select(X, y, target_dim=3)
    assert 0 not in idx


def test_rfe_rejects_unreachable_target():
    with pytest.raises(ParameterError):
        rfe_select(np.ones((5, 3)), np.array([0, 1, 0, 1, 0]), target_dim=2)


def _pipeline(idx):
    return FeaturePipeline(modality="func", selected_indices=np.array(idx),
                           means=np.empty(0), stds=np.empty(0))


def test_standardize_train_statistics():
    rng = np.random.default_rng(7)
    X = rng.normal(loc=3.0, scale=2.0, size=(40, 6))
    pipe = _pipeline([0, 2, 4])
    Xt, _ = standardize_fit_apply(pipe, X, X)
    assert np.max(np.abs(Xt.mean(axis=0))) < 1e-10
    assert np.max(np.abs(Xt.std(axis=0) - 1.0)) < 1e-10


def test_standardize_no_leakage_from_other():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 4))
    pipe = _pipeline([0, 1, 2, 3])
    _, base = standardize_fit_apply(pipe, X, X)
    mu, sd = pipe.means.copy(), pipe.stds.copy()
    _, shifted = standardize_fit_apply(pipe, X, X + 10.0)
    assert np.array_equal(pipe.means, mu)
    assert np.array_equal(pipe.stds, sd)
    assert np.allclose(shifted - base, 10.0 / sd, atol=1e-10)


def test_standardize_rejects_constant_selection():
    X = np.ones((10, 2))
    with pytest.raises(ParameterError):
        standardize_fit_apply(_pipeline([0]), X, X)


def test_pipeline_json_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    X = rng.normal(size=(30, 12))
    y = rng.integers(0, 2, size=30)
    pipe = fit_pipeline(X, y, "struct", target_dim=5, alpha=0.3)
    path = tmp_path / "pipe.json"
    pipe.to_json(path)
    loaded = FeaturePipeline.from_json(path)
    assert loaded.modality == "struct"
    assert np.array_equal(loaded.selected_indices, pipe.selected_indices)
    assert np.allclose(loaded.means, pipe.means)
    assert np.allclose(loaded.stds, pipe.stds)
    assert np.allclose(loaded.transform(X), pipe.transform(X))
