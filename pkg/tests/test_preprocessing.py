from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdqml.preprocessing import DegenerateFeatureError, Standardizer, apply_standardizer, fit_standardizer


def test_columns_standardized():
    X = np.random.default_rng(0).normal(3.0, [1, 10, 0.1, 5, 2, 7], size=(200, 6))
    Z = Standardizer().fit_transform(X)
    assert np.max(np.abs(Z.mean(axis=0))) < 1e-9
    assert np.max(np.abs(Z.var(axis=0) - 1)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-3, 1e3))
def test_roundtrip(seed, scale):
    X = scale * np.random.default_rng(seed).normal(size=(20, 6)) + 1.0
    s = fit_standardizer(X)
    back = s.inverse_transform(apply_standardizer(s, X))
    assert np.max(np.abs(back - X)) <= 1e-12 * max(1.0, np.abs(X).max())


def test_degenerate_column_named():
    X = np.random.default_rng(1).normal(size=(10, 6))
    X[:, 4] = 2.5
    with pytest.raises(DegenerateFeatureError, match="entropy"):
        Standardizer().fit(X)
    with pytest.raises(DegenerateFeatureError, match="b"):
        Standardizer(["a", "b"]).fit(np.c_[np.arange(3.0), np.ones(3)])


def test_uses_train_statistics_only():
    tr = np.array([[0.0], [2.0]])
    s = Standardizer().fit(tr)
    assert s.transform([[4.0]])[0, 0] == 3.0
    with pytest.raises(ValueError):
        s.transform(np.ones((2, 2)))


def test_dict_roundtrip():
    X = np.random.default_rng(2).normal(size=(15, 6))
    s = Standardizer().fit(X)
    back = Standardizer.from_dict(s.to_dict())
    assert np.array_equal(back.transform(X), s.transform(X))
    with pytest.raises(DegenerateFeatureError):
        Standardizer.from_dict({"means": [0.0], "stds": [0.0]})
