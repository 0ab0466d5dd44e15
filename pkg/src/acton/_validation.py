"""Small input-validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

from .exceptions import NumericError, ShapeMismatch


def as_float_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D feature matrix, got shape {X.shape}")
    return X


def as_symbol_matrix(X) -> np.ndarray:
    """Coerce a dataset / sequence list / array into a (B, n) int32 matrix."""
    if hasattr(X, "sequences"):
        X = X.sequences
    if isinstance(X, np.ndarray):
        mat = np.asarray(X, dtype=np.int32)
    else:
        rows = [np.asarray(getattr(s, "symbols", s), dtype=np.int32) for s in X]
        lengths = {len(r) for r in rows}
        if len(lengths) > 1:
            raise ShapeMismatch(f"sequences differ in length: {sorted(lengths)}")
        mat = np.stack(rows)
    if mat.ndim != 2:
        raise ShapeMismatch(f"expected (subjects, timesteps) ids, got shape {mat.shape}")
    return mat


def check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")


def labels_with_missing(y, n: int) -> np.ndarray:
    """Coerce labels to int64 with -1 for missing; accepts None entries."""
    out = np.full(n, -1, dtype=np.int64)
    for i, v in enumerate(y):
        if v is not None and int(v) >= 0:
            out[i] = int(v)
    return out
