"""Posterior summaries of detail levels: means and probability maps.

A probability map records, per region, the posterior probability that a
detail is positive, and classifies the region as credibly positive,
credibly negative, or neither at a chosen tail level alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decompose import DetailEnsemble

__all__ = ["ProbabilityMap", "posterior_mean", "pointwise_probability_map"]

CLASS_POSITIVE = "pos"
CLASS_NEGATIVE = "neg"
CLASS_NONE = "none"


@dataclass(frozen=True)
class ProbabilityMap:
    """Per-region sign probabilities and credibility classes for one level.

    ``prob_positive[i]`` is the fraction of samples with a strictly
    positive detail at region i (exact zeros count as not positive).
    Classification is ``pos`` when that fraction is at least ``1 - alpha``
    and ``neg`` when it is at most ``alpha``.
    """

    prob_positive: np.ndarray
    classification: np.ndarray
    alpha: float


def _stack_level(details, level: int) -> np.ndarray:
    """Detail level ``level`` (1-based) of every sample, shape (samples, n)."""
    if isinstance(details, DetailEnsemble):
        if len(details) == 0:
            raise ValueError("empty sample collection")
        return details.level(level)
    rows = []
    for ds in details:
        if not 1 <= level <= ds.levels:
            raise ValueError(f"level must be in 1..{ds.levels}")
        rows.append(ds.z[level - 1])
    if not rows:
        raise ValueError("empty sample collection")
    return np.asarray(rows)


def posterior_mean(details, level: int) -> np.ndarray:
    """Elementwise average of detail level ``level`` across samples."""
    return _stack_level(details, level).mean(axis=0)


def pointwise_probability_map(details, level: int, alpha: float = 0.05) -> ProbabilityMap:
    """Sign-probability map of one detail level.

    Parameters
    ----------
    details : DetailEnsemble or iterable of DetailSet
        Posterior sample decompositions.
    level : int
        Detail level, 1-based; the last level is the mean field.
    alpha : float
        Tail level in (0, 0.5); a region is flagged when the positive
        fraction reaches ``1 - alpha`` (or falls below ``alpha``).
    """
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie strictly between 0 and 0.5")
    z = _stack_level(details, level)
    prob = (z > 0.0).mean(axis=0)
    cls = np.full(prob.shape, CLASS_NONE, dtype="<U4")
    cls[prob >= 1.0 - alpha] = CLASS_POSITIVE
    cls[prob <= alpha] = CLASS_NEGATIVE
    return ProbabilityMap(prob, cls, float(alpha))
