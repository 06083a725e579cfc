"""Multiresolution decomposition through penalty smoothers.

The smoother at scale ``lam`` is the linear map ``(I + lam R)^{-1}``,
where R is an intrinsic precision matrix: ``lam = 0`` is the identity and
the ``lam -> infinity`` limit is the per-component mean field. A field
decomposes exactly into differences of consecutive smooths over an
increasing scale set, plus the mean field; each such difference isolates
the features living in one scale band, and the levels sum back to the
original field.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .sparsela import (
    CholeskyFactor,
    ShiftedFactorizer,
    SparseSymmetric,
    cholesky,
    scale_and_shift,
)

if TYPE_CHECKING:  # pragma: no cover
    from .sampler import CountData, PosteriorSamples

__all__ = [
    "ScaleSet",
    "DetailSet",
    "DetailEnsemble",
    "smooth",
    "smooth_infinity",
    "details",
    "decompose_samples",
]


@dataclass(frozen=True)
class ScaleSet:
    """Increasing finite smoothing scales, starting at exactly zero.

    The terminal infinite scale is implicit, so a scale set with ``m``
    entries produces ``m + 1`` detail levels: ``m`` band-pass details and
    the mean field.
    """

    lambdas: tuple

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if not lam:
            raise ValueError("scale set must contain at least lambda = 0")
        if lam[0] != 0.0:
            raise ValueError("the first scale must be exactly 0")
        if not all(np.isfinite(lam)):
            raise ValueError("scales must be finite (the infinite scale is implicit)")
        if any(b <= a for a, b in zip(lam, lam[1:])):
            raise ValueError("scales must be strictly increasing")
        object.__setattr__(self, "lambdas", lam)

    @property
    def levels(self) -> int:
        """Total number of detail levels, including the mean field."""
        return len(self.lambdas) + 1


@dataclass(frozen=True)
class DetailSet:
    """Scale-dependent details of one field.

    ``z[l]`` for ``l < levels - 1`` is the band-pass detail between
    consecutive scales; the last entry is the mean field. The entries sum
    to the decomposed field.
    """

    z: tuple
    scales: ScaleSet

    def __post_init__(self):
        if len(self.z) != self.scales.levels:
            raise ValueError(f"expected {self.scales.levels} levels, got {len(self.z)}")
        object.__setattr__(self, "z", tuple(np.asarray(zl, dtype=np.float64) for zl in self.z))

    @property
    def levels(self) -> int:
        return len(self.z)

    def total(self) -> np.ndarray:
        """Sum of all levels; reconstructs the decomposed field."""
        return np.sum(self.z, axis=0)


class DetailEnsemble:
    """Details of many fields decomposed against one scale set.

    Backed by a single array ``z`` of shape (samples, levels, n); indexing
    yields per-sample :class:`DetailSet` views.
    """

    def __init__(self, z: np.ndarray, scales: ScaleSet):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 3 or z.shape[1] != scales.levels:
            raise ValueError("z must have shape (samples, levels, n)")
        self.z = z
        self.scales = scales

    @property
    def levels(self) -> int:
        return self.scales.levels

    @property
    def n(self) -> int:
        return self.z.shape[2]

    def __len__(self) -> int:
        return self.z.shape[0]

    def __getitem__(self, s: int) -> DetailSet:
        return DetailSet(tuple(self.z[s]), self.scales)

    def __iter__(self):
        return (self[s] for s in range(len(self)))

    def level(self, l: int) -> np.ndarray:
        """All samples of detail level ``l`` (1-based), shape (samples, n)."""
        if not 1 <= l <= self.levels:
            raise ValueError(f"level must be in 1..{self.levels}")
        return self.z[:, l - 1, :]


def smooth(x, lam: float, R: SparseSymmetric, factor: CholeskyFactor | None = None) -> np.ndarray:
    """Apply the penalty smoother ``(I + lam R)^{-1}`` to a field.

    ``lam = 0`` returns a copy of ``x`` bit-exactly, with no solve. A
    precomputed ``factor`` of ``I + lam R`` may be supplied to amortize
    factorization over many fields.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != R.n:
        raise ValueError(f"field has length {x.shape[0]}, expected {R.n}")
    if not np.isfinite(lam) or lam < 0:
        raise ValueError("scale must be finite and non-negative")
    if lam == 0.0:
        return x.copy()
    if factor is None:
        factor = cholesky(scale_and_shift(R, lam, 1.0))
    return factor.solve(x)


def smooth_infinity(x, components) -> np.ndarray:
    """Infinite-scale limit: per-component mean, replicated across each
    connected component. This is the projection onto the smoother's fixed
    space (constants per component)."""
    x = np.asarray(x, dtype=np.float64)
    components = np.asarray(components, dtype=np.int64)
    if x.shape[0] != components.shape[0]:
        raise ValueError(f"field has length {x.shape[0]}, expected {components.shape[0]}")
    counts = np.bincount(components)
    if x.ndim == 1:
        means = np.bincount(components, weights=x) / counts
        return means[components]
    # column-wise means for stacked fields, shape (n, k)
    out = np.empty_like(x)
    for c in range(counts.size):
        mask = components == c
        out[mask] = x[mask].mean(axis=0)
    return out


def _scale_factors(scales: ScaleSet, R: SparseSymmetric) -> dict:
    fz = ShiftedFactorizer(R)
    return {lam: fz.factor(lam, 1.0) for lam in scales.lambdas if lam > 0}


def details(x, scales: ScaleSet, R: SparseSymmetric, components,
            factors: dict | None = None) -> DetailSet:
    """Decompose one field into its scale-dependent details.

    Computes the smooth of ``x`` at every scale (reusing ``factors``, a
    mapping from scale to Cholesky factor of ``I + lam R``, when given)
    and returns consecutive differences plus the mean field. The levels
    sum to ``x`` by construction.
    """
    x = np.asarray(x, dtype=np.float64)
    if factors is None:
        factors = _scale_factors(scales, R)
    smooths = [smooth(x, lam, R, factors.get(lam)) for lam in scales.lambdas]
    smooths.append(smooth_infinity(x, components))
    z = [a - b for a, b in zip(smooths, smooths[1:])]
    z.append(smooths[-1])
    return DetailSet(tuple(z), scales)


def decompose_samples(samples: "PosteriorSamples", data: "CountData", scales: ScaleSet,
                      R: SparseSymmetric, components) -> DetailEnsemble:
    """Decompose the log-rate field of every retained posterior sample.

    The decomposed field is ``log(e) + u + v``, the logarithm of the
    reconstructed Poisson rates. Factorizations of ``I + lam R`` are
    computed once per scale and shared across all samples; each scale is
    applied to all samples in one multi-right-hand-side solve.
    """
    if samples.n != R.n or data.n != R.n:
        raise ValueError("samples, data, and precision dimensions disagree")
    n_kept = len(samples)
    if n_kept == 0:
        return DetailEnsemble(np.empty((0, scales.levels, R.n)), scales)
    fields = (np.log(data.e)[None, :] + samples.u + samples.v).T  # (n, samples)
    factors = _scale_factors(scales, R)
    lambdas = scales.lambdas
    levels = scales.levels
    z = np.empty((n_kept, levels, R.n))
    prev = fields.copy()
    for l, lam in enumerate(lambdas[1:], start=1):
        cur = factors[lam].solve(fields)
        z[:, l - 1, :] = (prev - cur).T
        prev = cur
    mean_field = smooth_infinity(fields, np.asarray(components))
    z[:, levels - 2, :] = (prev - mean_field).T
    z[:, levels - 1, :] = mean_field.T
    return DetailEnsemble(z, scales)
