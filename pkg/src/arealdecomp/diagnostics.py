"""Single-chain MCMC convergence checks.

Covers Metropolis acceptance rates, the Geweke early/late z-score, and
effective sample size, applied to a fixed set of monitored quantities:
the two precision parameters, the log-likelihood trace, and the
log-relative risk at five sentinel sites (first, quartiles, last).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .sampler import CountData, PosteriorSamples

__all__ = [
    "TraceSummary",
    "acceptance_rate",
    "geweke_z",
    "effective_sample_size",
    "sentinel_sites",
    "summarize_chain",
]

BATCH_COUNT = 20  # nonoverlapping batches for spectral variance estimates


@dataclass(frozen=True)
class TraceSummary:
    """Convergence report for one chain.

    ``geweke`` and ``ess`` map each monitored quantity name to its
    statistic; ``flags`` lists quantities whose statistic degenerated
    (constant trace or too few samples).
    """

    acceptance_overall: float
    acceptance_per_site: np.ndarray
    geweke: dict
    ess: dict
    flags: tuple = ()


def acceptance_rate(samples: PosteriorSamples):
    """Overall and per-site Metropolis acceptance fractions."""
    if samples.proposals <= 0:
        return 0.0, np.zeros(samples.n)
    per_site = samples.accepted / samples.proposals
    return float(per_site.mean()), per_site


def _batch_means_var(seg: np.ndarray) -> float:
    # spectral variance of the segment mean estimated from nonoverlapping
    # batch means; falls back to fewer batches on short segments
    nbatch = min(BATCH_COUNT, seg.size)
    blen = seg.size // nbatch
    means = seg[: nbatch * blen].reshape(nbatch, blen).mean(axis=1)
    return blen * float(np.var(means, ddof=1))


def geweke_z(trace, first_frac: float = 0.1, last_frac: float = 0.5) -> float:
    """Z-score comparing the mean of the early and late chain segments.

    Variances of the segment means use batch-means spectral estimates, so
    autocorrelation inside each segment is accounted for. Returns NaN
    (with a warning) when both segments are constant.
    """
    trace = np.asarray(trace, dtype=np.float64)
    if trace.ndim != 1 or trace.size < 100:
        raise ValueError("trace must be a 1-D series of at least 100 values")
    if not 0 < first_frac < 1 or not 0 < last_frac < 1 or first_frac + last_frac > 1:
        raise ValueError("segment fractions must be positive and non-overlapping")
    n1 = int(trace.size * first_frac)
    n2 = int(trace.size * last_frac)
    first, last = trace[:n1], trace[trace.size - n2:]
    var = _batch_means_var(first) / n1 + _batch_means_var(last) / n2
    if var <= 0.0:
        warnings.warn("degenerate (constant) trace; z-score is undefined", RuntimeWarning)
        return float("nan")
    return float((first.mean() - last.mean()) / np.sqrt(var))


def effective_sample_size(trace) -> float:
    """Effective sample size ``N / (1 + 2 sum of autocorrelations)``.

    Autocorrelations are accumulated in consecutive pairs and truncated at
    the first non-positive pair sum (initial positive sequence rule). The
    result is clipped to (0, N]; a constant trace degenerates to N with a
    warning.
    """
    trace = np.asarray(trace, dtype=np.float64)
    if trace.ndim != 1 or trace.size < 10:
        raise ValueError("trace must be a 1-D series of at least 10 values")
    n = trace.size
    x = trace - trace.mean()
    var0 = float(x @ x) / n
    if var0 <= 0.0:
        warnings.warn("degenerate (constant) trace; reporting ESS = N", RuntimeWarning)
        return float(n)
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(spec * np.conj(spec), nfft)[:n] / n
    rho = acov / acov[0]
    pair_total = 0.0
    for m in range(0, n - 1, 2):
        pair = rho[m] + rho[m + 1]
        if pair <= 0.0:
            break
        pair_total += pair
    tau = 2.0 * pair_total - 1.0
    if tau <= 0.0:
        return float(n)
    return float(min(n / tau, n))


def sentinel_sites(n: int) -> tuple:
    """Deterministic monitored sites: first, quartiles, and last index."""
    return tuple(sorted({0, n // 4, n // 2, (3 * n) // 4, n - 1}))


def summarize_chain(samples: PosteriorSamples, data: CountData | None = None,
                    first_frac: float = 0.1, last_frac: float = 0.5) -> TraceSummary:
    """Compute the full convergence report for a finished chain.

    Monitored quantities: kappa_u, kappa_v, the log-likelihood trace (when
    ``data`` is given), and eta at the sentinel sites. Quantities whose
    statistics cannot be computed (short or constant traces) are reported
    as NaN and listed in ``flags`` rather than raising.
    """
    overall, per_site = acceptance_rate(samples)
    traces = {"kappa_u": samples.kappa_u, "kappa_v": samples.kappa_v}
    if data is not None and len(samples):
        eta = samples.eta()
        traces["log_likelihood"] = np.sum(data.y * eta - data.e * np.exp(eta), axis=1)
        for i in sentinel_sites(samples.n):
            traces[f"eta_{i}"] = eta[:, i]
    geweke = {}
    ess = {}
    flags = []
    for name, tr in traces.items():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            try:
                geweke[name] = geweke_z(tr, first_frac, last_frac)
            except ValueError:
                geweke[name] = float("nan")
            try:
                ess[name] = effective_sample_size(tr)
            except ValueError:
                ess[name] = float("nan")
        if not np.isfinite(geweke[name]) or not np.isfinite(ess[name]):
            flags.append(name)
    return TraceSummary(overall, per_site, geweke, ess, tuple(flags))
