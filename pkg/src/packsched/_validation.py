"""Input checks shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import column_or_1d


def check_ranks(X) -> np.ndarray:
    """Coerce ``X`` to a 1-D array of non-negative integer ranks.

    Accepts a flat sequence or a single-column 2-D array, as scikit-learn
    transformers receive.
    """
    arr = np.asarray(X)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    arr = column_or_1d(arr)
    if arr.size and not np.all(np.isfinite(arr.astype(float))):
        raise ValueError("ranks must be finite")
    as_int = arr.astype(np.int64)
    if arr.size and np.any(as_int != arr):
        raise ValueError("ranks must be integers")
    if np.any(as_int < 0):
        raise ValueError("ranks must be non-negative")
    return as_int


def check_capacities(capacities) -> tuple:
    caps = tuple(int(c) for c in capacities)
    if not caps:
        raise ValueError("need at least one queue capacity")
    if any(c <= 0 for c in caps):
        raise ValueError(f"queue capacities must be positive, got {caps}")
    if any(int(c) != c for c in capacities):
        raise ValueError("queue capacities must be integers")
    return caps
