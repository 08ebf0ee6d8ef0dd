"""Per-modality node features: upper-triangular vectorization, ridge-based
recursive feature elimination, and z-score standardization.

Everything here is fitted strictly on the training subjects of the current
fold; held-out subjects only ever pass through ``transform``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numcore import ParameterError


@dataclass
class FeaturePipeline:
    """Fitted feature selector + standardizer for one modality."""

    modality: str
    selected_indices: np.ndarray   # retained upper-tri indices, ascending
    means: np.ndarray              # per selected feature, training set
    stds: np.ndarray               # population std, training set, all > 0
    ridge_alpha: float = 1.0
    target_dim: int = 0

    def transform(self, X: np.ndarray) -> np.ndarray:
        sel = X[:, self.selected_indices]
        return (sel - self.means) / self.stds

    def to_json(self, path: str | Path) -> None:
        doc = {
            "modality": self.modality,
            "selected_indices": self.selected_indices.tolist(),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "ridge_alpha": self.ridge_alpha,
            "target_dim": self.target_dim,
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))

    @classmethod
    def from_json(cls, path: str | Path) -> "FeaturePipeline":
        doc = json.loads(Path(path).read_text())
        return cls(modality=doc["modality"],
                   selected_indices=np.array(doc["selected_indices"], dtype=int),
                   means=np.array(doc["means"]),
                   stds=np.array(doc["stds"]),
                   ridge_alpha=doc["ridge_alpha"],
                   target_dim=doc["target_dim"])


def vectorize_upper_triangular(m: np.ndarray) -> np.ndarray:
    """Row-major upper-triangle (i<j) of a symmetric matrix, diagonal excluded."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {m.shape}")
    if np.max(np.abs(m - m.T)) > 1e-6:
        raise ParameterError("matrix is not symmetric")
    iu = np.triu_indices(m.shape[0], k=1)
    return m[iu]


def unvectorize_upper_triangular(v: np.ndarray, r: int) -> np.ndarray:
    """Inverse of vectorize: symmetric zero-diagonal R x R matrix."""
    v = np.asarray(v, dtype=np.float64)
    if v.size != r * (r - 1) // 2:
        raise ParameterError("vector length does not match R*(R-1)/2")
    m = np.zeros((r, r))
    m[np.triu_indices(r, k=1)] = v
    return m + m.T


def ridge_fit(X: np.ndarray, y: np.ndarray, alpha: float) -> np.ndarray:
    """Ridge weights on centered X and y.

    Solves the primal normal equations when d <= n, otherwise the
    equivalent dual system (n x n), which keeps RFE cheap when features
    vastly outnumber subjects.
    """
    if alpha <= 0:
        raise ParameterError("ridge alpha must be > 0")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 2:
        raise ParameterError("ridge needs at least 2 samples")
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    n, d = Xc.shape
    if d <= n:
        A = Xc.T @ Xc + alpha * np.eye(d)
        return np.linalg.solve(A, Xc.T @ yc)
    K = Xc @ Xc.T + alpha * np.eye(n)
    return Xc.T @ np.linalg.solve(K, yc)


def rfe_select(X_train: np.ndarray, y_train: np.ndarray, target_dim: int,
               alpha: float = 1.0, drop_fraction: float = 0.1) -> np.ndarray:
    """Recursive feature elimination under a ridge ranking.

    Repeatedly fits ridge on the surviving features and removes the
    ceil(drop_fraction * surviving) features of smallest |w| (clamped so
    the count never undershoots target_dim). Ties in |w| drop the smaller
    original index first. Zero-variance training features are eliminated
    up front: their weight is 0 and their z-score is undefined.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    d = X_train.shape[1]
    if not 1 <= target_dim <= d:
        raise ParameterError(f"target_dim must be in [1, {d}], got {target_dim}")
    y = np.where(np.asarray(y_train) > 0, 1.0, -1.0)  # symmetric +-1 coding

    surviving = np.where(X_train.std(axis=0) > 0)[0]
    if surviving.size < target_dim:
        raise ParameterError(
            f"only {surviving.size} non-constant features, need {target_dim}")
    while surviving.size > target_dim:
        w = ridge_fit(X_train[:, surviving], y, alpha)
        n_drop = int(np.ceil(drop_fraction * surviving.size))
        n_drop = min(n_drop, surviving.size - target_dim)
        n_drop = max(n_drop, 1)
        # stable sort: equal |w| keeps original (ascending-index) order
        order = np.argsort(np.abs(w), kind="stable")
        keep = np.ones(surviving.size, dtype=bool)
        keep[order[:n_drop]] = False
        surviving = surviving[keep]
    return surviving


def standardize_fit_apply(pipeline: FeaturePipeline, X_train: np.ndarray,
                          X_other: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fit z-score statistics on X_train and transform both matrices.

    Restricts to the pipeline's selected indices; means and population
    stds come from X_train only and are stored on the pipeline.
    """
    sel = X_train[:, pipeline.selected_indices]
    pipeline.means = sel.mean(axis=0)
    pipeline.stds = sel.std(axis=0)
    if np.any(pipeline.stds == 0):
        raise ParameterError("zero-variance feature survived selection")
    return pipeline.transform(X_train), pipeline.transform(X_other)


def fit_pipeline(X_train: np.ndarray, y_train: np.ndarray, modality: str,
                 target_dim: int, alpha: float = 1.0,
                 drop_fraction: float = 0.1) -> FeaturePipeline:
    """RFE selection followed by z-score statistics, all on training rows."""
    target_dim = min(target_dim, X_train.shape[1])
    idx = rfe_select(X_train, y_train, target_dim, alpha, drop_fraction)
    pipeline = FeaturePipeline(modality=modality, selected_indices=idx,
                               means=np.empty(0), stds=np.empty(0),
                               ridge_alpha=alpha, target_dim=target_dim)
    standardize_fit_apply(pipeline, X_train, X_train)
    return pipeline


def cohort_feature_matrix(subjects, modality: str) -> np.ndarray:
    """Stack vectorized upper-triangular features for a list of subjects."""
    attr = "func_matrix" if modality == "func" else "struct_matrix"
    return np.stack([vectorize_upper_triangular(getattr(s, attr))
                     for s in subjects])
