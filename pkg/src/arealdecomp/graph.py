"""Region adjacency structure and intrinsic GMRF precision matrices.

An :class:`AdjacencyGraph` holds the neighbor relation of a set of regions
(shared borders on a map, or lattice adjacency on a grid). From it the
module builds the two precision matrices used throughout the package: the
first-order pairwise-difference penalty for arbitrary graphs and the
second-order five-point penalty for regular grids. Both are intrinsic,
with constant fields (per connected component) in their null space.
"""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sparsela import SparseSymmetric

__all__ = [
    "AdjacencyFormatError",
    "AdjacencyGraph",
    "read_adjacency",
    "build_igmrf1_precision",
    "build_igmrf2_grid_precision",
    "connected_components",
]


class AdjacencyFormatError(ValueError):
    """Malformed adjacency input; the message includes the line number."""


@dataclass(frozen=True)
class AdjacencyGraph:
    """Undirected graph over regions ``0..n-1``.

    Parameters
    ----------
    n : int
        Number of regions.
    edges : tuple of (int, int)
        Unordered neighbor pairs; stored sorted with ``i < j``.
    labels : tuple of str, optional
        Region identifiers, unique, one per region.
    """

    n: int
    edges: tuple
    labels: tuple | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph must have at least one region")
        canon = []
        for pair in self.edges:
            i, j = int(pair[0]), int(pair[1])
            if i == j:
                raise ValueError(f"self-loop on region {i}")
            if i > j:
                i, j = j, i
            if not (0 <= i and j < self.n):
                raise ValueError(f"edge ({i}, {j}) references a region outside 0..{self.n - 1}")
            canon.append((i, j))
        canon.sort()
        for a, b in zip(canon, canon[1:]):
            if a == b:
                raise ValueError(f"duplicate edge {a}")
        object.__setattr__(self, "edges", tuple(canon))
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != self.n:
                raise ValueError(f"{len(labels)} labels for {self.n} regions")
            if len(set(labels)) != len(labels):
                raise ValueError("region labels are not unique")
            object.__setattr__(self, "labels", labels)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        """Neighbor count per region."""
        deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    @classmethod
    def grid(cls, nrow: int, ncol: int) -> "AdjacencyGraph":
        """Regular nrow x ncol lattice with rook (4-neighbor) adjacency.

        Cells are indexed row-major: region ``r * ncol + c``.
        """
        if nrow < 1 or ncol < 1:
            raise ValueError("grid dimensions must be at least 1x1")
        edges = []
        for r in range(nrow):
            for c in range(ncol):
                k = r * ncol + c
                if c + 1 < ncol:
                    edges.append((k, k + 1))
                if r + 1 < nrow:
                    edges.append((k, k + ncol))
        return cls(nrow * ncol, tuple(edges))


_HEADER_RE = re.compile(r"^n\s*=\s*(\d+)$")


def read_adjacency(source, strict: bool = False) -> AdjacencyGraph:
    """Parse an adjacency list into an :class:`AdjacencyGraph`.

    The format is UTF-8 text with one region per line,
    ``"<index>: <space-separated neighbor indices>"``, 0-based. ``#``
    starts a comment line. An optional ``n=<count>`` header on the first
    (non-comment) line fixes the dimension; otherwise it is the largest
    index seen plus one.

    One-sided listings are symmetric-closed by default, because published
    adjacency lists frequently record each border once. With
    ``strict=True`` a pair listed in only one direction is an error.

    Parameters
    ----------
    source : path, file-like, or bytes
        Where to read from.
    strict : bool
        Reject one-sided neighbor listings instead of closing them.

    Raises
    ------
    AdjacencyFormatError
        On malformed lines, out-of-range indices, or a repeated region
        identifier; the message carries the 1-based line number.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif hasattr(source, "read"):
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    elif isinstance(source, (str, os.PathLike)):
        with io.open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        raise TypeError(f"cannot read adjacency from {type(source).__name__}")

    declared_n = None
    listed: dict[int, set[int]] = {}
    line_of: dict[int, int] = {}
    saw_row = False
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.strip()
        if not line or line.startswith("#"):
            continue
        header = _HEADER_RE.match(line)
        if header:
            if saw_row or declared_n is not None:
                raise AdjacencyFormatError(
                    f"line {lineno}: n= header allowed only on the first line"
                )
            declared_n = int(header.group(1))
            if declared_n < 1:
                raise AdjacencyFormatError(f"line {lineno}: n must be at least 1")
            continue
        head, sep, tail = line.partition(":")
        if not sep or not head.strip().isdigit():
            raise AdjacencyFormatError(
                f"line {lineno}: expected '<index>: <neighbors>', got {line!r}"
            )
        saw_row = True
        idx = int(head.strip())
        if idx in listed:
            raise AdjacencyFormatError(
                f"line {lineno}: duplicate region identifier {idx} "
                f"(first listed on line {line_of[idx]})"
            )
        neigh = set()
        for tok in tail.split():
            if not tok.isdigit():
                raise AdjacencyFormatError(
                    f"line {lineno}: invalid neighbor index {tok!r}"
                )
            j = int(tok)
            if j == idx:
                raise AdjacencyFormatError(f"line {lineno}: region {idx} lists itself")
            neigh.add(j)
        listed[idx] = neigh
        line_of[idx] = lineno

    if not listed:
        if declared_n is None:
            raise AdjacencyFormatError("no region lines found")
        return AdjacencyGraph(declared_n, ())
    max_idx = max(max(listed), max((max(s) for s in listed.values() if s), default=0))
    n = declared_n if declared_n is not None else max_idx + 1
    for idx, neigh in listed.items():
        for k in {idx} | neigh:
            if k >= n:
                raise AdjacencyFormatError(
                    f"line {line_of[idx]}: index {k} out of range for n={n}"
                )
    if strict:
        for i, neigh in listed.items():
            for j in neigh:
                if i not in listed.get(j, set()):
                    raise AdjacencyFormatError(
                        f"line {line_of[i]}: edge ({i}, {j}) is listed one-sided "
                        f"and strict mode is on"
                    )
    edges = {(min(i, j), max(i, j)) for i, neigh in listed.items() for j in neigh}
    return AdjacencyGraph(n, tuple(sorted(edges)))


def build_igmrf1_precision(g: AdjacencyGraph) -> SparseSymmetric:
    """First-order pairwise-difference precision matrix R.

    R has the degree of each region on the diagonal and -1 for every
    neighbor pair, so that ``u' R u`` equals the sum of ``(u_i - u_j)^2``
    over all edges. R is positive semidefinite with rank ``n - k`` for k
    connected components; it must be shifted before factorization.
    """
    deg = g.degrees().astype(np.float64)
    if g.n_edges:
        e = np.asarray(g.edges, dtype=np.int64)
        rows = np.concatenate([np.arange(g.n), e[:, 1]])
        cols = np.concatenate([np.arange(g.n), e[:, 0]])
        vals = np.concatenate([deg, -np.ones(g.n_edges)])
    else:
        rows = np.arange(g.n)
        cols = np.arange(g.n)
        vals = deg
    return SparseSymmetric(g.n, rows, cols, vals)


def build_igmrf2_grid_precision(nrow: int, ncol: int) -> SparseSymmetric:
    """Second-order precision matrix Q for a regular nrow x ncol grid.

    Q is the matrix of the quadratic form that sums, over every cell, the
    squared difference between 4 times the cell value and the sum of its
    four cardinal neighbors. Values beyond the grid edge replicate the
    nearest cell, so boundary cells also see four neighbors; with that
    extension the five-point sum at cell j reduces to the sum of
    ``x_i - x_j`` over in-grid neighbors, i.e. Q equals the square of the
    lattice graph Laplacian. Cells are indexed row-major.
    """
    if nrow < 1 or ncol < 1:
        raise ValueError("grid dimensions must be at least 1x1")
    lap = build_igmrf1_precision(AdjacencyGraph.grid(nrow, ncol)).full()
    q = (lap @ lap).tocoo()
    keep = q.row >= q.col
    return SparseSymmetric(nrow * ncol, q.row[keep], q.col[keep], q.data[keep])


def connected_components(g: AdjacencyGraph) -> np.ndarray:
    """Component label per region, in ``0..k-1``.

    Labels are deterministic: components are numbered by their smallest
    member index.
    """
    if g.n_edges:
        e = np.asarray(g.edges, dtype=np.int64)
        adj = sp.coo_array(
            (np.ones(g.n_edges), (e[:, 0], e[:, 1])), shape=(g.n, g.n)
        )
    else:
        adj = sp.coo_array((g.n, g.n))
    _, raw = sp.csgraph.connected_components(adj, directed=False)
    # renumber so that label order follows each component's smallest member
    order = np.argsort(np.array([np.argmax(raw == c) for c in range(raw.max() + 1)]))
    remap = np.empty_like(order)
    remap[order] = np.arange(order.size)
    return remap[raw]
