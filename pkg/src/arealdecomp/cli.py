"""End-to-end command-line pipeline.

Subcommands: ``decomp precision | sample | decompose | run | diagnose``,
all driven by a YAML config file. Paths inside the config resolve
relative to the config file's directory; ``--seed`` and ``--output``
override the corresponding config entries. Outputs are deterministic
given (input files, config), so reruns produce byte-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace

import numpy as np
import yaml

from . import io as dio
from .credibility import pointwise_probability_map, posterior_mean
from .decompose import ScaleSet, decompose_samples
from .diagnostics import summarize_chain
from .graph import (
    AdjacencyGraph,
    build_igmrf1_precision,
    build_igmrf2_grid_precision,
    connected_components,
    read_adjacency,
)
from .sampler import Hyperparams, run_chain
from .sparsela import cholesky, quad_form, scale_and_shift

__all__ = ["RunConfig", "StageError", "load_config", "main", "console_entry"]


class StageError(RuntimeError):
    """Pipeline failure carrying the stage name in its message."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"{stage}: {message}")


@dataclass(frozen=True)
class RunConfig:
    """Validated pipeline configuration."""

    counts: str | None
    adjacency: str | None
    grid: tuple | None
    scales: ScaleSet
    hyper: Hyperparams
    alpha: float
    output: str
    truth: str | None = None
    dense_oracle: bool = False
    strict_adjacency: bool = False


def _resolve(base: str, path) -> str:
    path = os.fspath(path)
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base, path))


def load_config(path, seed: int | None = None, output: str | None = None) -> RunConfig:
    """Load and validate a YAML config file.

    All referenced input files must exist. ``seed`` and ``output``
    override the config values (command-line flags).
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a mapping")
    base = os.path.dirname(os.path.abspath(path))
    known = {"counts", "adjacency", "truth", "grid", "scales", "alpha",
             "output", "seed", "sampler", "dense_oracle", "strict_adjacency"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")

    paths = {}
    for key in ("counts", "adjacency", "truth"):
        val = raw.get(key)
        if val is None:
            paths[key] = None
            continue
        resolved = _resolve(base, val)
        if not os.path.isfile(resolved):
            raise ValueError(f"{path}: {key} file not found: {resolved}")
        paths[key] = resolved

    grid = None
    if raw.get("grid") is not None:
        g = raw["grid"]
        if not isinstance(g, dict) or set(g) != {"nrow", "ncol"}:
            raise ValueError(f"{path}: grid must be a mapping with nrow and ncol")
        grid = (int(g["nrow"]), int(g["ncol"]))
        if grid[0] < 1 or grid[1] < 1:
            raise ValueError(f"{path}: grid dimensions must be at least 1x1")

    scales = ScaleSet(tuple(raw.get("scales", [0.0])))
    alpha = float(raw.get("alpha", 0.05))
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"{path}: alpha must lie strictly between 0 and 0.5")

    sampler_cfg = dict(raw.get("sampler") or {})
    if "seed" in raw and "seed" not in sampler_cfg:
        sampler_cfg["seed"] = int(raw["seed"])
    try:
        hyper = Hyperparams(**sampler_cfg)
    except TypeError as exc:
        raise ValueError(f"{path}: bad sampler settings: {exc}") from None
    if seed is not None:
        hyper = replace(hyper, seed=int(seed))

    out = output if output is not None else _resolve(base, raw.get("output", "out"))
    return RunConfig(
        counts=paths["counts"],
        adjacency=paths["adjacency"],
        grid=grid,
        scales=scales,
        hyper=hyper,
        alpha=alpha,
        output=os.fspath(out),
        truth=paths["truth"],
        dense_oracle=bool(raw.get("dense_oracle", False)),
        strict_adjacency=bool(raw.get("strict_adjacency", False)),
    )


def _load_inputs(cfg: RunConfig):
    if cfg.counts is None:
        raise ValueError("config does not name a counts file")
    if cfg.adjacency is None:
        raise ValueError("config does not name an adjacency file")
    labels, data = dio.read_counts(cfg.counts)
    g = read_adjacency(cfg.adjacency, strict=cfg.strict_adjacency)
    if g.n != data.n:
        raise ValueError(f"counts file has {data.n} regions but adjacency has {g.n}")
    return labels, data, AdjacencyGraph(g.n, g.edges, tuple(labels))


def _oracle_check_precision(a, g: AdjacencyGraph):
    # recompute the quadratic form by direct summation over the edge list
    rng = np.random.default_rng(202406)
    for _ in range(3):
        x = rng.standard_normal(g.n)
        direct = sum((x[i] - x[j]) ** 2 for i, j in g.edges)
        if abs(quad_form(a, x) - direct) > 1e-9 * max(1.0, abs(direct)):
            raise ValueError("dense-oracle check failed: quadratic form mismatch")


def _oracle_check_factor(a):
    f = cholesky(scale_and_shift(a, 1.0, 1.0))
    if f.reconstruction_error() > 1e-10:
        raise ValueError("dense-oracle check failed: factor reconstruction error")


def cmd_precision(cfg: RunConfig) -> str:
    """Build the precision matrix and write it in coordinate text format.

    Grid configs produce the second-order grid matrix; otherwise the
    first-order matrix of the adjacency file is written.
    """
    os.makedirs(cfg.output, exist_ok=True)
    out = os.path.join(cfg.output, "precision.txt")
    if cfg.grid is not None:
        nrow, ncol = cfg.grid
        q = build_igmrf2_grid_precision(nrow, ncol)
        dio.write_coord_matrix(out, q, comment=f"second-order grid precision, {nrow} x {ncol}")
    else:
        if cfg.adjacency is None:
            raise ValueError("config names neither an adjacency file nor a grid")
        g = read_adjacency(cfg.adjacency, strict=cfg.strict_adjacency)
        r = build_igmrf1_precision(g)
        if cfg.dense_oracle:
            _oracle_check_precision(r, g)
        dio.write_coord_matrix(out, r, comment="first-order adjacency precision")
    return out


def cmd_sample(cfg: RunConfig) -> tuple:
    """Run the sampler; write the trace container and the run report.

    Diagnostics in the report are data, not failures: a run with warning
    flags still exits successfully.
    """
    labels, data, g = _load_inputs(cfg)
    samples = run_chain(data, g, cfg.hyper)
    os.makedirs(cfg.output, exist_ok=True)
    trace_path = os.path.join(cfg.output, "trace.bin")
    dio.write_trace(trace_path, samples)
    if cfg.dense_oracle:
        reread, _ = dio.read_trace(trace_path)
        if reread != samples:
            raise ValueError("dense-oracle check failed: trace round trip")
        _oracle_check_factor(build_igmrf1_precision(g))

    summary = summarize_chain(samples, data)
    report = {
        "version": 1,
        "seed": cfg.hyper.seed,
        "n_regions": data.n,
        "iterations": cfg.hyper.iterations,
        "burn_in": cfg.hyper.burn_in,
        "thinning": cfg.hyper.thinning,
        "retained": len(samples),
        "acceptance": {
            "overall": summary.acceptance_overall,
            "per_site": summary.acceptance_per_site,
        },
        "geweke_z": summary.geweke,
        "ess": summary.ess,
        "flags": list(summary.flags),
    }
    if cfg.truth is not None:
        truth = dio.read_truth(cfg.truth, labels)
        if len(samples):
            post_mean = samples.eta().mean(axis=0)
            report["truth_correlation"] = float(np.corrcoef(post_mean, truth)[0, 1])
        else:
            report["truth_correlation"] = None
    report_path = os.path.join(cfg.output, "report.json")
    dio.write_json(report_path, report)
    return trace_path, report_path


def cmd_decompose(cfg: RunConfig, trace_path: str | None = None) -> str:
    """Decompose a stored trace into detail summaries per level."""
    labels, data, g = _load_inputs(cfg)
    if trace_path is None:
        trace_path = os.path.join(cfg.output, "trace.bin")
    samples, _ = dio.read_trace(trace_path)
    if samples.n != g.n:
        raise ValueError(
            f"trace has {samples.n} regions but adjacency has {g.n}"
        )
    if len(samples) == 0:
        raise ValueError("trace contains no retained samples to decompose")
    r = build_igmrf1_precision(g)
    components = connected_components(g)
    ensemble = decompose_samples(samples, data, cfg.scales, r, components)
    means = [posterior_mean(ensemble, l) for l in range(1, ensemble.levels + 1)]
    maps = [
        pointwise_probability_map(ensemble, l, cfg.alpha)
        for l in range(1, ensemble.levels + 1)
    ]
    os.makedirs(cfg.output, exist_ok=True)
    out = os.path.join(cfg.output, "details.csv")
    dio.write_details_csv(out, labels, means, maps)
    return out


def cmd_run(cfg: RunConfig) -> str:
    """Full pipeline: sample, decompose, and write a hash manifest."""
    try:
        trace_path, report_path = cmd_sample(cfg)
    except (ValueError, OSError, ArithmeticError) as exc:
        raise StageError("sample", str(exc)) from exc
    try:
        details_path = cmd_decompose(cfg, trace_path)
    except (ValueError, OSError, ArithmeticError) as exc:
        raise StageError("decompose", str(exc)) from exc
    try:
        manifest_path = os.path.join(cfg.output, "manifest.json")
        dio.write_manifest(manifest_path, [trace_path, report_path, details_path])
    except OSError as exc:
        raise StageError("manifest", str(exc)) from exc
    return manifest_path


def cmd_diagnose(cfg: RunConfig, trace_path: str | None = None) -> str:
    """Recompute convergence diagnostics for a stored trace."""
    if trace_path is None:
        trace_path = os.path.join(cfg.output, "trace.bin")
    samples, _ = dio.read_trace(trace_path)
    data = None
    if cfg.counts is not None:
        _, data = dio.read_counts(cfg.counts)
        if data.n != samples.n:
            raise ValueError(f"counts file has {data.n} regions but trace has {samples.n}")
    summary = summarize_chain(samples, data)
    os.makedirs(cfg.output, exist_ok=True)
    out = os.path.join(cfg.output, "diagnostics.json")
    dio.write_json(out, {
        "version": 1,
        "retained": len(samples),
        "acceptance": {
            "overall": summary.acceptance_overall,
            "per_site": summary.acceptance_per_site,
        },
        "geweke_z": summary.geweke,
        "ess": summary.ess,
        "flags": list(summary.flags),
    })
    finite_ess = [x for x in summary.ess.values() if np.isfinite(x)]
    ess_note = f"min ESS {min(finite_ess):.1f}" if finite_ess else "no finite ESS"
    print(f"acceptance {summary.acceptance_overall:.3f}, {ess_note}")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decomp",
        description="Multiresolution decomposition of areal count data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("precision", "build and write the precision matrix"),
        ("sample", "run the MCMC sampler, write trace and report"),
        ("decompose", "decompose a trace into detail summaries"),
        ("run", "full pipeline: sample, decompose, manifest"),
        ("diagnose", "recompute convergence diagnostics for a trace"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--output", default=None, help="override the output directory")
        if name in ("decompose", "diagnose"):
            p.add_argument("--trace", default=None, help="trace file (default: <output>/trace.bin)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    stage = "config"
    try:
        cfg = load_config(args.config, seed=args.seed, output=args.output)
        stage = args.command
        if args.command == "precision":
            print(f"wrote {cmd_precision(cfg)}")
        elif args.command == "sample":
            trace_path, report_path = cmd_sample(cfg)
            print(f"wrote {trace_path}")
            print(f"wrote {report_path}")
        elif args.command == "decompose":
            print(f"wrote {cmd_decompose(cfg, args.trace)}")
        elif args.command == "run":
            print(f"wrote {cmd_run(cfg)}")
        elif args.command == "diagnose":
            print(f"wrote {cmd_diagnose(cfg, args.trace)}")
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, ArithmeticError, yaml.YAMLError) as exc:
        print(f"error: {stage}: {exc}", file=sys.stderr)
        return 1
    return 0


def console_entry():  # pragma: no cover
    sys.exit(main())
