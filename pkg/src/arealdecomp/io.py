"""File formats: counts tables, trace containers, matrices, and reports.

Every writer here is deterministic: identical in-memory content produces
byte-identical files. Floating point values in text outputs are printed
with 17 significant digits so they round-trip exactly; the trace
container stores samples as raw little-endian float64, which round-trips
by construction.

Trace container layout (version 1)::

    DECOMP-TRACE 1\\n
    <one-line JSON header>\\n
    BINARY\\n
    <retained * (2n + 2) float64 values, little-endian>

The header carries dimensions, hyperparameters (seed included), and the
per-site acceptance counters; each binary block is one retained sample,
laid out as u (n values), v (n values), kappa_u, kappa_v.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import asdict

import numpy as np

from .sampler import CountData, Hyperparams, PosteriorSamples
from .sparsela import SparseSymmetric

__all__ = [
    "read_counts",
    "write_counts",
    "read_truth",
    "write_coord_matrix",
    "write_trace",
    "read_trace",
    "write_json",
    "write_details_csv",
    "write_manifest",
]

TRACE_MAGIC = "DECOMP-TRACE 1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def read_counts(path):
    """Read a ``region_id,y,e`` counts table.

    Row order defines the region index order used everywhere else; the
    region_id column is the join key for mapping tools. Returns
    ``(labels, CountData)``.
    """
    labels, ys, es = [], [], []
    seen = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["region_id", "y", "e"]:
            raise ValueError(f"{path}: expected header 'region_id,y,e'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            rid = row[0].strip()
            if rid in seen:
                raise ValueError(
                    f"{path}:{lineno}: duplicate region_id {rid!r} (first on line {seen[rid]})"
                )
            seen[rid] = lineno
            try:
                y = int(row[1])
                e = float(row[2])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            labels.append(rid)
            ys.append(y)
            es.append(e)
    if not labels:
        raise ValueError(f"{path}: no data rows")
    try:
        data = CountData(np.array(ys), np.array(es))
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return labels, data


def write_counts(path, labels, data: CountData):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("region_id,y,e\n")
        for rid, y, e in zip(labels, data.y, data.e):
            fh.write(f"{rid},{int(y)},{_fmt(e)}\n")


def read_truth(path, labels):
    """Read a ``region_id,eta`` table aligned with the counts labels."""
    values = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["region_id", "eta"]:
            raise ValueError(f"{path}: expected header 'region_id,eta'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns")
            values[row[0].strip()] = float(row[1])
    missing = [rid for rid in labels if rid not in values]
    if missing:
        raise ValueError(f"{path}: missing truth for region_id {missing[0]!r}")
    return np.array([values[rid] for rid in labels])


def write_coord_matrix(path, a: SparseSymmetric, comment: str | None = None):
    """Write the lower triangle in ``i j value`` coordinate text format.

    Lines starting with ``%`` are comments; indices are 0-based and
    entries are sorted row-major.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            fh.write(f"% {comment}\n")
        fh.write(f"% symmetric {a.n} x {a.n}, lower triangle, {a.nnz} entries\n")
        for i, j, v in zip(a.rows, a.cols, a.vals):
            fh.write(f"{i} {j} {_fmt(v)}\n")


def _sanitize(obj):
    """Make a structure JSON-safe and deterministic (NaN becomes null)."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if not math.isfinite(x) else x
    return obj


def write_json(path, payload: dict):
    """Write a JSON document with sorted keys and a trailing newline."""
    text = json.dumps(_sanitize(payload), sort_keys=True, indent=2)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def write_trace(path, samples: PosteriorSamples):
    """Serialize retained samples to the trace container format."""
    header = {
        "version": 1,
        "n": samples.n,
        "retained": len(samples),
        "proposals": samples.proposals,
        "accepted": samples.accepted.tolist(),
        "n_components": samples.n_components,
        "hyperparams": asdict(samples.hyper),
    }
    block = np.concatenate(
        [samples.u, samples.v, samples.kappa_u[:, None], samples.kappa_v[:, None]],
        axis=1,
    ).astype("<f8")
    with open(path, "wb") as fh:
        fh.write((TRACE_MAGIC + "\n").encode("ascii"))
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(b"BINARY\n")
        fh.write(block.tobytes())


def read_trace(path) -> tuple:
    """Parse a trace container; returns ``(PosteriorSamples, header dict)``."""
    with open(path, "rb") as fh:
        magic = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        if magic != TRACE_MAGIC:
            raise ValueError(f"{path}: not a trace file (bad magic {magic!r})")
        header = json.loads(fh.readline().decode("utf-8"))
        marker = fh.readline()
        if marker != b"BINARY\n":
            raise ValueError(f"{path}: missing BINARY marker")
        raw = fh.read()
    n = int(header["n"])
    retained = int(header["retained"])
    width = 2 * n + 2
    expected = retained * width * 8
    if len(raw) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, found {len(raw)}")
    block = np.frombuffer(raw, dtype="<f8").reshape(retained, width).astype(np.float64)
    hyper = Hyperparams(**header["hyperparams"])
    samples = PosteriorSamples(
        u=block[:, :n].copy() if retained else np.empty((0, n)),
        v=block[:, n:2 * n].copy() if retained else np.empty((0, n)),
        kappa_u=block[:, 2 * n],
        kappa_v=block[:, 2 * n + 1],
        accepted=np.array(header["accepted"], dtype=np.int64),
        proposals=int(header["proposals"]),
        hyper=hyper,
        n_components=int(header.get("n_components", 1)),
    )
    return samples, header


def write_details_csv(path, labels, level_means, level_maps):
    """Write per-region detail summaries, one row per (level, region).

    Columns: ``region_id,level,mean,prob_positive,class`` with class in
    {neg, none, pos}. Levels are 1-based; the last level is the mean
    field.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("region_id,level,mean,prob_positive,class\n")
        for level, (mean, pmap) in enumerate(zip(level_means, level_maps), start=1):
            for i, rid in enumerate(labels):
                fh.write(
                    f"{rid},{level},{_fmt(mean[i])},{_fmt(pmap.prob_positive[i])},"
                    f"{pmap.classification[i]}\n"
                )


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, files):
    """Manifest of output files with sizes and SHA-256 content hashes."""
    entries = {}
    for f in sorted(files):
        entries[os.path.basename(f)] = {
            "sha256": sha256_file(f),
            "bytes": os.path.getsize(f),
        }
    write_json(path, {"version": 1, "files": entries})
