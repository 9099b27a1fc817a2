"""Accuracy and diversity metrics for top-N lists."""
from __future__ import annotations

import numpy as np


def f1_score(recommended, relevant) -> float:
    """Harmonic mean of precision and recall; 0 when nothing relevant is
    recommended (including when ``relevant`` is empty)."""
    rec = set(recommended)
    rel = set(relevant)
    if not rec:
        raise ValueError("recommended list is empty")
    hit = len(rec & rel)
    if hit == 0:
        return 0.0
    precision = hit / len(rec)
    recall = hit / len(rel)
    return 2.0 * precision * recall / (precision + recall)


def gini_coefficient(counts) -> float:
    """Gini coefficient of recommendation counts over the whole item
    universe (zero counts included)."""
    y = np.sort(np.asarray(counts, dtype=np.float64))
    if y.size == 0 or (y < 0).any():
        raise ValueError("counts must be a non-empty vector of non-negative values")
    total = y.sum()
    if total <= 0:
        raise ValueError("at least one count must be positive")
    n = y.size
    ranks = 2.0 * np.arange(1, n + 1) - n - 1.0
    return float(ranks @ y / (n * total))
