"""Gibbs/Metropolis-Hastings sampler for the hierarchical count model.

Counts ``y_i`` are conditionally independent Poisson with rate
``e_i * exp(eta_i)``, where ``e_i`` is a known expected count and the
log-relative risk splits as ``eta = u + v``: a spatially structured field
``u`` under a first-order intrinsic GMRF prior with precision parameter
``kappa_u``, plus unstructured noise ``v`` with precision ``kappa_v``.
Both precisions carry Gamma priors.

One sweep updates, in order:

1. ``step_eta``  - per-site random-walk Metropolis on eta (the Poisson
   likelihood enters only here),
2. ``step_u``    - an exact Gaussian draw of u given eta (its full
   conditional is Gaussian with sparse precision), recentered to sum zero
   per connected component with the offset moved into v,
3. ``step_kappa_u`` and ``step_kappa_v`` - conjugate Gamma draws.

The chain is a pure function of (data, graph, hyperparameters, seed): all
randomness flows through one numpy Generator, consumed in a fixed order
(eta proposals, eta uniforms, the u draw, then the two Gamma draws).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decompose import smooth_infinity
from .graph import AdjacencyGraph, build_igmrf1_precision, connected_components
from .sparsela import (
    ShiftedFactorizer,
    SparseSymmetric,
    cholesky,
    quad_form,
    sample_gaussian_precision,
    scale_and_shift,
)

__all__ = [
    "CountData",
    "Hyperparams",
    "ChainState",
    "PosteriorSamples",
    "log_likelihood",
    "step_eta",
    "step_u",
    "step_kappa_u",
    "step_kappa_v",
    "run_chain",
    "reconstruct_field",
]


@dataclass(frozen=True)
class CountData:
    """Observed counts ``y`` and expected counts ``e``, one pair per region."""

    y: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.size and not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise ValueError("observed counts must be integers")
        y = y.astype(np.int64)
        e = np.asarray(self.e, dtype=np.float64)
        if y.ndim != 1 or e.shape != y.shape:
            raise ValueError("y and e must be 1-D arrays of equal length")
        if y.size == 0:
            raise ValueError("empty count data")
        if np.any(y < 0):
            raise ValueError("observed counts must be non-negative")
        if not np.all(e > 0):
            raise ValueError("expected counts must be strictly positive")
        y.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "e", e)

    @property
    def n(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class Hyperparams:
    """Prior parameters and run-length settings for :func:`run_chain`.

    ``a_u, b_u`` and ``a_v, b_v`` are Gamma shape/rate pairs for the two
    precision parameters; ``proposal_sd`` is the random-walk standard
    deviation of the Metropolis step. ``burn_in`` may equal ``iterations``
    (an empty retained set is valid).
    """

    a_u: float = 1.0
    b_u: float = 0.5
    a_v: float = 1.0
    b_v: float = 0.01
    proposal_sd: float = 0.3
    iterations: int = 110_000
    burn_in: int = 10_000
    thinning: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ("a_u", "b_u", "a_v", "b_v"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.proposal_sd > 0:
            raise ValueError("proposal_sd must be positive")
        if self.iterations < 0 or self.burn_in < 0:
            raise ValueError("iteration counts must be non-negative")
        if self.burn_in > self.iterations:
            raise ValueError("burn_in cannot exceed iterations")
        if self.thinning < 1:
            raise ValueError("thinning must be at least 1")

    @property
    def retained(self) -> int:
        """Number of states kept after burn-in and thinning."""
        return (self.iterations - self.burn_in) // self.thinning


@dataclass
class ChainState:
    """One point of the chain: fields ``u``, ``v`` and the two precisions.

    ``u`` sums to zero within every connected component; the total
    log-relative risk is ``u + v``.
    """

    u: np.ndarray
    v: np.ndarray
    kappa_u: float
    kappa_v: float

    def eta(self) -> np.ndarray:
        return self.u + self.v

    def copy(self) -> "ChainState":
        return ChainState(self.u.copy(), self.v.copy(), self.kappa_u, self.kappa_v)


class PosteriorSamples:
    """Retained draws of (u, v, kappa_u, kappa_v) plus acceptance counters.

    Arrays are stacked sample-major: ``u[s]`` is the structured field of
    retained sample ``s``. ``accepted`` counts accepted Metropolis
    proposals per site over the whole run (burn-in included);
    ``proposals`` is the per-site proposal count, equal to the iteration
    count.
    """

    def __init__(self, u, v, kappa_u, kappa_v, accepted, proposals, hyper, n_components=1):
        self.u = np.atleast_2d(np.asarray(u, dtype=np.float64))
        self.v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        self.kappa_u = np.asarray(kappa_u, dtype=np.float64).ravel()
        self.kappa_v = np.asarray(kappa_v, dtype=np.float64).ravel()
        self.accepted = np.asarray(accepted, dtype=np.int64).ravel()
        self.proposals = int(proposals)
        self.hyper = hyper
        self.n_components = int(n_components)
        if self.u.shape != self.v.shape or self.u.shape[1] != self.accepted.size:
            raise ValueError("inconsistent sample array shapes")
        if not (len(self.u) == len(self.v) == self.kappa_u.size == self.kappa_v.size):
            raise ValueError("inconsistent sample array lengths")

    @property
    def n(self) -> int:
        return self.accepted.size

    def __len__(self) -> int:
        return self.u.shape[0]

    def state(self, i: int) -> ChainState:
        return ChainState(self.u[i].copy(), self.v[i].copy(),
                          float(self.kappa_u[i]), float(self.kappa_v[i]))

    def eta(self) -> np.ndarray:
        """Log-relative-risk samples, shape (retained, n)."""
        return self.u + self.v

    def __eq__(self, other):
        if not isinstance(other, PosteriorSamples):
            return NotImplemented
        return (
            np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.kappa_u, other.kappa_u)
            and np.array_equal(self.kappa_v, other.kappa_v)
            and np.array_equal(self.accepted, other.accepted)
            and self.proposals == other.proposals
            and self.hyper == other.hyper
            and self.n_components == other.n_components
        )

    def __repr__(self):
        return f"PosteriorSamples(retained={len(self)}, n={self.n})"


def log_likelihood(data: CountData, eta) -> float:
    """Poisson log-likelihood ``sum(y*eta - e*exp(eta))``, up to the
    eta-free normalization constant."""
    eta = np.asarray(eta, dtype=np.float64)
    if eta.shape != (data.n,):
        raise ValueError(f"eta has length {eta.size}, expected {data.n}")
    if not np.all(np.isfinite(eta)):
        raise ValueError("eta contains non-finite entries")
    return float(np.sum(data.y * eta - data.e * np.exp(eta)))


def _site_log_target(y, e, u, kappa_v, eta):
    # per-site log density of eta given u and kappa_v (Poisson term plus
    # the Gaussian noise penalty); vectorized over sites
    with np.errstate(over="ignore"):
        return y * eta - e * np.exp(eta) - 0.5 * kappa_v * (eta - u) ** 2


def step_eta(state: ChainState, data: CountData, hyper: Hyperparams, rng) -> np.ndarray:
    """Random-walk Metropolis update of eta at every site.

    Sites are conditionally independent given (u, kappa_v), so all n
    proposals are drawn at once: first ``n`` normals, then ``n`` uniforms,
    which fixes the generator consumption order. Accepted sites update
    ``v`` (u is untouched, so eta moves by the same amount). Returns the
    per-site acceptance flags.
    """
    eta = state.u + state.v
    prop = eta + hyper.proposal_sd * rng.standard_normal(data.n)
    delta = _site_log_target(data.y, data.e, state.u, state.kappa_v, prop) - \
        _site_log_target(data.y, data.e, state.u, state.kappa_v, eta)
    with np.errstate(divide="ignore"):
        accept = np.log(rng.random(data.n)) < delta
    state.v = np.where(accept, prop - state.u, state.v)
    return accept


def step_u(state: ChainState, R: SparseSymmetric, rng, components=None,
           factorizer: ShiftedFactorizer | None = None) -> np.ndarray:
    """Exact Gaussian update of the structured field u.

    Given eta = u + v, u has a Gaussian full conditional with precision
    ``A = kappa_u R + kappa_v I`` and mean solving ``A m = kappa_v eta``.
    The draw is then recentered to sum zero within each connected
    component, with the removed mean absorbed into v, so eta is unchanged.

    A :class:`ShiftedFactorizer` built on R may be passed to amortize the
    structural factorization work across sweeps; the update is identical
    with or without it.
    """
    eta = state.u + state.v
    if factorizer is None:
        f = cholesky(scale_and_shift(R, state.kappa_u, state.kappa_v))
    else:
        f = factorizer.factor(state.kappa_u, state.kappa_v)
    m = f.solve(state.kappa_v * eta)
    draw = sample_gaussian_precision(f, m, rng)
    if components is None:
        components = np.zeros(R.n, dtype=np.int64)
    state.u = draw - smooth_infinity(draw, components)
    state.v = eta - state.u
    return state.u


def step_kappa_u(state: ChainState, R: SparseSymmetric, hyper: Hyperparams, rng,
                 rank: int | None = None) -> float:
    """Conjugate Gamma draw of the structured precision kappa_u.

    The shape uses the rank of R, which is ``n - k`` for a graph with k
    connected components (``n - 1`` when connected, the default); the rate
    adds half the pairwise-difference quadratic form of the current u.
    """
    if rank is None:
        rank = R.n - 1
    shape = hyper.a_u + 0.5 * rank
    rate = hyper.b_u + 0.5 * quad_form(R, state.u)
    state.kappa_u = float(rng.gamma(shape, 1.0 / rate))
    return state.kappa_u


def step_kappa_v(state: ChainState, hyper: Hyperparams, rng) -> float:
    """Conjugate Gamma draw of the noise precision kappa_v."""
    shape = hyper.a_v + 0.5 * state.v.size
    rate = hyper.b_v + 0.5 * float(state.v @ state.v)
    state.kappa_v = float(rng.gamma(shape, 1.0 / rate))
    return state.kappa_v


def initial_state(data: CountData, components) -> ChainState:
    """Starting point in the likelihood's bulk: eta from empirical rates
    (with a 0.5 offset guarding zero counts), u the centered part."""
    eta = np.log((data.y + 0.5) / data.e)
    u = eta - smooth_infinity(eta, components)
    return ChainState(u, eta - u, kappa_u=10.0, kappa_v=10.0)


def run_chain(data: CountData, g: AdjacencyGraph, hyper: Hyperparams) -> PosteriorSamples:
    """Run the full Gibbs/Metropolis sampler.

    Sweeps run in the order eta, u, kappa_u, kappa_v. States after
    burn-in are retained every ``thinning`` sweeps. The result is
    bit-reproducible from (data, g, hyper).

    Raises
    ------
    ValueError
        If data and graph dimensions disagree.
    """
    if data.n != g.n:
        raise ValueError(f"data has {data.n} regions but graph has {g.n}")
    R = build_igmrf1_precision(g)
    components = connected_components(g)
    rank = g.n - int(components.max()) - 1
    factorizer = ShiftedFactorizer(R)
    rng = np.random.default_rng(hyper.seed)
    state = initial_state(data, components)

    kept = hyper.retained
    u_out = np.empty((kept, g.n))
    v_out = np.empty((kept, g.n))
    ku_out = np.empty(kept)
    kv_out = np.empty(kept)
    accepted = np.zeros(g.n, dtype=np.int64)

    s = 0
    for t in range(1, hyper.iterations + 1):
        accepted += step_eta(state, data, hyper, rng)
        step_u(state, R, rng, components, factorizer)
        step_kappa_u(state, R, hyper, rng, rank)
        step_kappa_v(state, hyper, rng)
        past = t - hyper.burn_in
        if past > 0 and past % hyper.thinning == 0:
            u_out[s] = state.u
            v_out[s] = state.v
            ku_out[s] = state.kappa_u
            kv_out[s] = state.kappa_v
            s += 1
    assert s == kept
    return PosteriorSamples(u_out, v_out, ku_out, kv_out, accepted,
                            hyper.iterations, hyper, int(components.max()) + 1)


def reconstruct_field(data: CountData, state: ChainState) -> np.ndarray:
    """Poisson rates ``e * exp(u + v)`` implied by one chain state."""
    if state.u.size != data.n:
        raise ValueError(f"state has {state.u.size} regions, expected {data.n}")
    return data.e * np.exp(state.u + state.v)
