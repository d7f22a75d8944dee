"""Feature standardization fit on the training split only."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

FEATURE_NAMES = ("mean", "variance", "lo_intensity", "shot_noise", "entropy", "range")


class DegenerateFeatureError(ValueError):
    pass


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-column ``(v - mean) / std`` with population statistics.

    Parameters
    ----------
    feature_names : sequence of str, optional
        Used only to name a zero-variance column in the error message.
    """

    def __init__(self, feature_names=None):
        self.feature_names = feature_names

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        bad = np.flatnonzero(~(std > 0))
        if bad.size:
            names = self.feature_names or FEATURE_NAMES
            col = int(bad[0])
            label = names[col] if col < len(names) else f"column {col}"
            raise DegenerateFeatureError(f"feature {label!r} has zero variance in the training split")
        self.mean_ = mean
        self.scale_ = std
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self, "mean_")
        return np.asarray(X, dtype=float) * self.scale_ + self.mean_

    def to_dict(self) -> dict:
        check_is_fitted(self, "mean_")
        return {"means": self.mean_.tolist(), "stds": self.scale_.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        s = cls()
        s.mean_ = np.asarray(d["means"], dtype=float)
        s.scale_ = np.asarray(d["stds"], dtype=float)
        if np.any(s.scale_ <= 0):
            raise DegenerateFeatureError("stored standardizer has a nonpositive std")
        s.n_features_in_ = s.mean_.size
        return s


def fit_standardizer(train_rows, feature_names=None) -> Standardizer:
    return Standardizer(feature_names).fit(train_rows)


def apply_standardizer(standardizer: Standardizer, rows) -> np.ndarray:
    return standardizer.transform(rows)
