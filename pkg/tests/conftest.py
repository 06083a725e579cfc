"""Shared fixtures and independent oracle implementations.

The oracles here deliberately avoid the library's own code paths: the
quadratic forms are evaluated by direct summation loops, and dense linear
algebra goes through numpy only.
"""

import numpy as np
import pytest

from arealdecomp import AdjacencyGraph, SparseSymmetric


def quadform_by_edges(edges, u):
    """Sum of squared neighbor differences, straight off the edge list."""
    return float(sum((u[i] - u[j]) ** 2 for i, j in edges))


def grid_quadform_oracle(x2d):
    """Five-point squared-sum quadratic form with replicated boundary.

    Literal double loop: for every cell, the four cardinal neighbor values
    (edge cells replicated outward) minus four times the cell, squared.
    """
    x2d = np.asarray(x2d, dtype=float)
    xp = np.pad(x2d, 1, mode="edge")
    total = 0.0
    nr, nc = x2d.shape
    for r in range(nr):
        for c in range(nc):
            s = xp[r, c + 1] + xp[r + 2, c + 1] + xp[r + 1, c] + xp[r + 1, c + 2]
            total += (s - 4.0 * x2d[r, c]) ** 2
    return total


def random_graph(rng, max_n=30, p=0.15):
    """Random graph, possibly disconnected, with at least one node."""
    n = int(rng.integers(1, max_n + 1))
    edges = [
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < p
    ]
    return AdjacencyGraph(n, tuple(edges))


def random_connected_graph(rng, n):
    """Random spanning tree plus a few extra edges."""
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        j = order[k]
        i = order[int(rng.integers(0, k))]
        edges.add((min(i, j), max(i, j)))
    extra = int(rng.integers(0, n))
    for _ in range(extra):
        i, j = rng.integers(0, n, size=2)
        if i != j:
            edges.add((min(i, j), max(i, j)))
    return AdjacencyGraph(n, tuple(sorted(edges)))


def random_spd(rng, n, density=0.3):
    """Random sparse SPD matrix via a diagonally dominant construction."""
    mask = rng.random((n, n)) < density
    a = np.where(mask, rng.standard_normal((n, n)), 0.0)
    a = (a + a.T) / 2
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(a, np.abs(a).sum(axis=1) + rng.uniform(0.5, 2.0, n))
    ii, jj = np.nonzero(np.tril(a))
    return SparseSymmetric(n, ii, jj, a[ii, jj]), a


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
