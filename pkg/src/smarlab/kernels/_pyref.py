"""Numpy reference implementation of the routing hot loops.

The compiled extension (_routing.pyx) implements the same two functions;
either backend may be active, and the test suite asserts they agree
bit-for-bit. Keep this file boring and obviously correct.
"""

from __future__ import annotations

import numpy as np


def topk_rows(probs: np.ndarray, k: int):
    """Per row: the k largest entries, ties broken toward the lower index.

    Returns (selected, mask): selected is (N, k) int64 with each row's
    chosen column indices in ascending index order, mask is (N, E) float64
    with ones at the chosen positions.
    """
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    n, e = probs.shape
    if not 1 <= k <= e:
        raise ValueError(f"topk_rows: k={k} outside [1, {e}]")
    # stable argsort on the negated values keeps the original (ascending
    # index) order among equal entries, which is exactly the tie-break rule
    order = np.argsort(-probs, axis=1, kind="stable")[:, :k]
    selected = np.sort(order, axis=1).astype(np.int64)
    mask = np.zeros((n, e), dtype=np.float64)
    np.put_along_axis(mask, selected, 1.0, axis=1)
    return selected, mask


def selection_counts(selected: np.ndarray, groups: np.ndarray, n_experts: int, n_groups: int = 2):
    """Count expert selections per group label.

    selected: (N, k) int64 expert indices; groups: (N,) small nonnegative
    ints (modality labels). Returns (n_groups, n_experts) float64 counts.
    """
    selected = np.asarray(selected, dtype=np.int64)
    groups = np.asarray(groups)
    counts = np.zeros((n_groups, n_experts), dtype=np.float64)
    for g in range(n_groups):
        rows = selected[groups == g]
        if rows.size:
            counts[g] = np.bincount(rows.ravel(), minlength=n_experts)
    return counts
