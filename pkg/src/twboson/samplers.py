"""Exact chain-rule samplers for single-photon and Gaussian boson sampling.

Single-photon sampling follows the Clifford-Clifford chain rule: draw a
uniform ordering alpha of the sources, then for k = 1..N draw output r_k with
probability proportional to |Per(U[r_1..r_k, alpha_1..alpha_k])|^2.

Gaussian sampling draws heterodyne outcomes for every mode, then for
k = 1..M conditions on the outcomes of modes k+1..M and draws the photon
number of mode k from the loop-hafnian marginal of the (pure) conditional
state, discarding the heterodyne outcome of mode k.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .gaussian import (
    GaussianState,
    apply_passive,
    build_input_state,
    complex_view,
    condition_on_heterodyne,
    gbs_probability,
    marginal_state,
    photon_truncation_threshold,
    with_displacement,
)
from .hafnian import BRUTEFORCE_MAX_N, loop_hafnian_bruteforce, loop_hafnian_treedp_weighted, repeat_matrix
from .oracles import OracleBudgetError, enumerate_outcomes
from .permanent import (
    permanent_ryser,
    permanent_treedp,
    permanent_treedp_weighted,
)
from .rng import stream

__all__ = [
    "Distribution",
    "OutcomeRecord",
    "SamplerConfig",
    "empirical_tvd",
    "gbs_exact_distribution",
    "gbs_sample",
    "gbs_sample_batch",
    "gbs_state",
    "read_samples",
    "spbs_exact_distribution",
    "spbs_sample",
    "spbs_sample_batch",
    "write_samples",
]

log = logging.getLogger(__name__)

UNITARY_TOL = 1e-8


@dataclass(frozen=True)
class OutcomeRecord:
    """One sample.

    Attributes:
        m: Photon numbers per mode (``None`` for "out").
        flag: ``"ok"`` or ``"out"``.
        seed: Seed of the run that produced it.
        index: Sample index within the run.
        truncated_mass: Sum over steps of the conditional probability that
            lay beyond the photon-number cutoff (Gaussian sampling).
        overload: Whether some step lost more than the configured epsilon.
    """

    m: tuple | None
    flag: str = "ok"
    seed: int | None = None
    index: int | None = None
    truncated_mass: float = 0.0
    overload: bool = False

    @property
    def r(self) -> tuple:
        """Sorted list of occupied modes with multiplicity."""
        if self.m is None:
            return ()
        return tuple(i for i, v in enumerate(self.m) for _ in range(v))

    def to_json(self) -> str:
        data = {"m": None if self.m is None else list(self.m), "flag": self.flag,
                "seed": self.seed, "index": self.index}
        if self.truncated_mass:
            # Rounded so that engines differing only by float round-off
            # serialize identically.
            data["truncated_mass"] = float(f"{self.truncated_mass:.12g}")
        if self.overload:
            data["overload"] = True
        return json.dumps(data)

    @classmethod
    def from_json(cls, line: str) -> "OutcomeRecord":
        d = json.loads(line)
        m = None if d.get("m") is None else tuple(int(v) for v in d["m"])
        flag = d.get("flag", "ok")
        if flag not in ("ok", "out"):
            raise ValueError(f"unknown flag {flag!r}")
        return cls(m, flag, d.get("seed"), d.get("index"),
                   float(d.get("truncated_mass", 0.0)), bool(d.get("overload", False)))


@dataclass(frozen=True)
class SamplerConfig:
    """Sampler settings.

    Attributes:
        engine: ``"treedp"`` or ``"oracle"``.
        strategy: Decomposition heuristic for the treedp engine.
        seed: Run seed; sample i uses the stream (seed, kind, i).
        m_max: Per-mode photon cutoff for Gaussian sampling (default from
            ``photon_truncation_threshold`` with ``epsilon``).
        cap: Collision cap for single-photon marginals.
        epsilon: Truncation tolerance.
        track_truncation: Compute the exact probability lost to the cutoff at
            every Gaussian step (costs one mixed-state evaluation per step).
        zero_tol: Threshold for graph edges.
    """

    engine: str = "treedp"
    strategy: str = "min_fill"
    seed: int = 0
    m_max: int | None = None
    cap: int | None = 4
    epsilon: float = 1e-6
    track_truncation: bool = True
    zero_tol: float = 0.0

    def __post_init__(self):
        if self.engine not in ("treedp", "oracle"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.m_max is not None and self.m_max < 2:
            raise ValueError("m_max must be at least 2")


@dataclass
class Distribution:
    """Probability mass function over photon patterns.

    Attributes:
        pmf: Mapping pattern -> probability.
        deficit: Probability not represented in ``pmf`` (truncation).
    """

    pmf: dict
    deficit: float = 0.0

    def total(self) -> float:
        return float(sum(self.pmf.values()))

    def to_dict(self) -> dict:
        items = sorted(self.pmf.items(), key=lambda kv: (kv[0] == "out", kv[0] if kv[0] != "out" else ()))
        return {"pmf": [[k if k == "out" else list(k), v] for k, v in items],
                "deficit": self.deficit}

    @classmethod
    def from_dict(cls, data: dict) -> "Distribution":
        pmf = {k if k == "out" else tuple(int(v) for v in k): float(p) for k, p in data["pmf"]}
        return cls(pmf, float(data.get("deficit", 0.0)))


def _check_unitary(U: np.ndarray) -> None:
    dev = np.linalg.norm(U.conj().T @ U - np.eye(U.shape[1]))
    if dev > UNITARY_TOL:
        raise ValueError(f"matrix is not unitary (deviation {dev:.2e})")


# ---------------------------------------------------------------------------
# Single-photon sampling


def spbs_exact_distribution(U, sources) -> Distribution:
    """Exact output distribution P(m) = |Per(U[r, S])|^2 / m! (oracle scale).

    Args:
        U: M x M unitary (M <= 8).
        sources: Input modes S (N <= 4).

    Returns:
        Distribution over all C(N + M - 1, N) patterns.
    """
    U = np.asarray(U, dtype=complex)
    sources = list(sources)
    M, N = U.shape[0], len(sources)
    if M > 8 or N > 4:
        raise OracleBudgetError("exact distribution limited to M <= 8 and N <= 4")
    _check_unitary(U)
    pmf = {}
    for m in enumerate_outcomes(M, N=N):
        r = [i for i, v in enumerate(m) for _ in range(v)]
        p = abs(permanent_ryser(U[np.ix_(r, sources)])) ** 2 / math.prod(math.factorial(v) for v in m)
        pmf[m] = float(p)
    return Distribution(pmf, 0.0)


def _permanent_weight(U: np.ndarray, rows: list, cols: list, config: SamplerConfig) -> complex:
    """Per(U[rows, cols]) with the configured engine (rows may repeat)."""
    if config.engine == "oracle":
        return permanent_ryser(U[np.ix_(rows, cols)])
    counts = Counter(rows)
    if max(counts.values(), default=0) <= 1:
        return permanent_treedp(U, rows, cols, strategy=config.strategy, zero_tol=config.zero_tol)
    n = [0] * U.shape[0]
    for a, v in counts.items():
        n[a] = v
    m = [0] * U.shape[1]
    for x in cols:
        m[x] += 1
    return permanent_treedp_weighted(U, n, m, cap=config.cap, strategy=config.strategy,
                                     zero_tol=config.zero_tol)


def _spbs_chain(U: np.ndarray, sources: list, config: SamplerConfig, rng,
                leak: bool = False, trace=None, memo: dict | None = None):
    """Run the chain rule; returns (pattern or None, overload flag).

    The candidate weights use the Laplace expansion along the new row,
    Per(U[r + [x], alpha_1..k]) = sum_l U[x, alpha_l] Per(U[r, alpha minus alpha_l]),
    so each step needs k engine evaluations instead of M.  Because the
    columns of a unitary are orthonormal, sum_x w(x) = sum_l |P_l|^2.  With
    ``leak`` the rows of U are only part of a larger unitary: the same sum is
    then the full normalisation and the missing mass is returned as "out".
    """
    M = U.shape[0]
    alpha = list(rng.permutation(sources))
    r: list = []
    overload = False
    memo = {} if memo is None else memo
    for k in range(1, len(alpha) + 1):
        cols = alpha[:k]
        minors = np.empty(k, dtype=complex)
        row_key = tuple(sorted(r))
        for l in range(k):
            sub = cols[:l] + cols[l + 1:]
            key = (row_key, tuple(sorted(sub)))
            if key not in memo:
                memo[key] = complex(_permanent_weight(U, list(row_key), sorted(sub), config)) \
                    if row_key else 1.0 + 0j
            minors[l] = memo[key]
        w = np.abs(U[:, cols] @ minors) ** 2
        if config.cap is not None:
            for x in set(r):
                if r.count(x) + 1 > config.cap:
                    overload = True
                    w[x] = 0.0
        inside = w.sum()
        total = float(np.sum(np.abs(minors) ** 2)) if leak else inside
        if trace is not None:
            trace.append((tuple(r), tuple(cols), w.copy(), total))
        if total <= 0:
            if overload:
                raise ValueError("collision cap exceeded: every admissible output has zero weight")
            raise ArithmeticError("all marginal probabilities vanish")
        u = rng.random()
        if u * total >= inside:
            return None, overload
        cdf = np.cumsum(w)
        x = int(min(np.searchsorted(cdf, u * total, side="right"), M - 1))
        while w[x] == 0 and x > 0:
            x -= 1
        r.append(x)
    m = [0] * M
    for x in r:
        m[x] += 1
    return tuple(m), overload


def spbs_sample(U, sources, config: SamplerConfig = SamplerConfig(), index: int = 0,
                trace=None, memo: dict | None = None) -> OutcomeRecord:
    """Draw one single-photon boson sampling outcome.

    Args:
        U: M x M unitary.
        sources: Input modes.
        config: Sampler settings.
        index: Sample index; selects the random stream.
        trace: Optional list collecting (r, alpha, weights, total) per step.
        memo: Optional dict caching sub-permanents across samples of the same
            circuit (pass the same dict for every sample of a batch).

    Returns:
        OutcomeRecord.
    """
    U = np.asarray(U, dtype=complex)
    _check_unitary(U)
    rng = stream(config.seed, "spbs", index)
    m, overload = _spbs_chain(U, list(sources), config, rng, trace=trace, memo=memo)
    return OutcomeRecord(m, "ok", config.seed, index, overload=overload)


def _spbs_chunk(U, sources, config, indices) -> list:
    memo: dict = {}
    return [spbs_sample(U, sources, config, i, memo=memo) for i in indices]


def _run_chunks(fn, fixed: tuple, indices: range, workers: int | None) -> list:
    """Evaluate ``fn(*fixed, chunk)`` over contiguous index chunks, in order."""
    if workers is None or workers <= 1:
        return fn(*fixed, indices)
    size = max(1, -(-len(indices) // (4 * workers)))
    chunks = [indices[i:i + size] for i in range(0, len(indices), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(fn, *zip(*[fixed + (c,) for c in chunks]))
        return [rec for part in parts for rec in part]


def spbs_sample_batch(U, sources, n: int, config: SamplerConfig = SamplerConfig(),
                      start: int = 0, workers: int | None = None) -> list:
    """Draw samples ``start .. start + n - 1`` (identical for any worker count)."""
    U = np.asarray(U, dtype=complex)
    _check_unitary(U)
    return _run_chunks(_spbs_chunk, (U, list(sources), config), range(start, start + n), workers)


# ---------------------------------------------------------------------------
# Gaussian sampling


def gbs_state(U, sources, r) -> GaussianState:
    """Output state of squeezed inputs on ``sources`` sent through U."""
    U = np.asarray(U, dtype=complex)
    return apply_passive(build_input_state(U.shape[0], sources, r), U)


def gbs_exact_distribution(U, sources, r, m_max: int,
                           max_total: int = BRUTEFORCE_MAX_N) -> Distribution:
    """Truncated exact distribution by matching enumeration.

    Patterns with every m_i <= m_max and at most ``max_total`` photons are
    evaluated; the rest of the probability is reported as ``deficit``.

    Args:
        U: M x M unitary (M <= 4).
        sources: Squeezed modes (N <= 2).
        r: Squeezing.
        m_max: Per-mode cutoff (<= 4).
        max_total: Largest total photon number evaluated (at most the
            matching-enumeration budget).

    Returns:
        Distribution with ``deficit`` = 1 - total retained mass.
    """
    U = np.asarray(U, dtype=complex)
    if U.shape[0] > 4 or len(list(sources)) > 2 or m_max > 4:
        raise OracleBudgetError("exact Gaussian distribution limited to M <= 4, N <= 2, m_max <= 4")
    max_total = min(max_total, BRUTEFORCE_MAX_N)
    view = complex_view(gbs_state(U, sources, r))
    pmf = {m: gbs_probability(view, m, engine="oracle")
           for m in enumerate_outcomes(U.shape[0], m_max=m_max) if sum(m) <= max_total}
    total = sum(pmf.values())
    return Distribution(pmf, max(0.0, 1.0 - total))


def _default_m_max(config: SamplerConfig, r) -> int:
    if config.m_max is not None:
        return config.m_max
    r_top = float(np.max(np.abs(np.atleast_1d(r)))) if np.size(r) else 0.0
    return photon_truncation_threshold(r_top, config.epsilon)


def _lhaf_vector(B: np.ndarray, g: np.ndarray, m: list, k: int, m_max: int,
                 config: SamplerConfig) -> np.ndarray:
    """lHaf(B~_(m_1..m_{k-1}, j)) for j = 0..m_max."""
    if config.engine == "oracle":
        return np.array([loop_hafnian_bruteforce(repeat_matrix(B, m + [j], g))
                         for j in range(m_max + 1)])
    return loop_hafnian_treedp_weighted(B, m + [0], loops=g, open_vertex=k - 1,
                                        open_cap=m_max, zero_tol=config.zero_tol,
                                        strategy=config.strategy)


@dataclass
class _GbsStep:
    rest: list
    measured_quads: list
    gain: np.ndarray
    view: object
    marginal: object | None


def _gbs_plan(state: GaussianState, track: bool) -> list:
    """Per-step quantities that do not depend on the heterodyne outcome.

    The covariance after heterodyne conditioning is independent of the
    outcome; only the displacement moves, linearly through ``gain``.
    """
    M = state.M
    W = state.V + np.eye(2 * M) / 2
    steps = []
    for k in range(1, M + 1):
        cond = condition_on_heterodyne(state, range(k, M), state.d[2 * k:])
        ia = list(range(2 * k))
        ib = list(range(2 * k, 2 * M))
        gain = state.V[np.ix_(ia, ib)] @ np.linalg.inv(W[np.ix_(ib, ib)]) if ib else \
            np.zeros((2 * k, 0))
        zero = GaussianState(cond.V, np.zeros(2 * k))
        view = complex_view(zero)
        marginal = None
        if track and k > 1:
            marginal = complex_view(marginal_state(zero, range(k - 1)))
        steps.append(_GbsStep(list(range(k)), ib, gain, view, marginal))
    return steps


def _gbs_chain(state: GaussianState, config: SamplerConfig, rng, m_max: int, plan=None):
    """Return (pattern, truncated mass, overload) for one Gaussian sample."""
    M = state.M
    if plan is None:
        plan = _gbs_plan(state, config.track_truncation)
    cov = state.V + np.eye(2 * M) / 2
    chol = np.linalg.cholesky(cov)
    mu = state.d + chol @ rng.standard_normal(2 * M)
    m: list = []
    lost = 0.0
    overload = False
    facts = np.array([math.factorial(j) for j in range(m_max + 1)], dtype=float)
    for k, step in enumerate(plan, start=1):
        ib = step.measured_quads
        d_k = state.d[: 2 * k] + step.gain @ (mu[ib] - state.d[ib])
        view = with_displacement(step.view, d_k)
        vec = _lhaf_vector(view.B, view.gamma[:k], m, k, m_max, config)
        weights = np.abs(vec) ** 2 / facts
        inside = weights.sum()
        if inside <= 0:
            raise ArithmeticError("all conditional photon-number probabilities vanish")
        norm = inside
        residual = 0.0
        if config.track_truncation:
            scale = view.prefactor() / math.prod(math.factorial(v) for v in m)
            if step.marginal is None:
                full = 1.0
            else:
                full = gbs_probability(with_displacement(step.marginal, d_k[: 2 * (k - 1)]), m)
            if full > 0:
                residual = max(0.0, 1.0 - scale * inside / full)
                norm = inside / (1.0 - residual)
            lost += residual
            if residual > config.epsilon:
                overload = True
                log.info("photon cutoff %d lost %.3g of the mass at mode %d", m_max, residual, k - 1)
        u = rng.random()
        if u * norm >= inside:
            # The draw fell in the mass beyond the cutoff: clamp and flag.
            overload = True
            m.append(m_max)
            continue
        cdf = np.cumsum(weights)
        j = int(min(np.searchsorted(cdf, u * norm, side="right"), m_max))
        m.append(j)
    return tuple(m), lost, overload


def gbs_sample(U, sources, r, config: SamplerConfig = SamplerConfig(),
               index: int = 0, state: GaussianState | None = None,
               plan: list | None = None) -> OutcomeRecord:
    """Draw one Gaussian boson sampling outcome.

    Args:
        U: M x M unitary (ignored when ``state`` is given).
        sources: Squeezed input modes.
        r: Squeezing parameter(s).
        config: Sampler settings.
        index: Sample index; selects the random stream.
        state: Optional precomputed output state.
        plan: Optional per-step data from a previous call on the same state.

    Returns:
        OutcomeRecord (``truncated_mass`` and ``overload`` describe cutoff loss).
    """
    if state is None:
        state = gbs_state(U, sources, r)
    m_max = _default_m_max(config, r)
    rng = stream(config.seed, "gbs", index)
    m, lost, overload = _gbs_chain(state, config, rng, m_max, plan)
    return OutcomeRecord(m, "ok", config.seed, index, lost, overload)


def _gbs_chunk(state, sources, r, config, indices) -> list:
    plan = _gbs_plan(state, config.track_truncation)
    return [gbs_sample(None, sources, r, config, i, state=state, plan=plan) for i in indices]


def gbs_sample_batch(U, sources, r, n: int, config: SamplerConfig = SamplerConfig(),
                     start: int = 0, workers: int | None = None,
                     state: GaussianState | None = None) -> list:
    """Draw samples ``start .. start + n - 1`` (identical for any worker count)."""
    if state is None:
        state = gbs_state(U, sources, r)
    return _run_chunks(_gbs_chunk, (state, list(sources), r, config), range(start, start + n), workers)


# ---------------------------------------------------------------------------
# Utilities


def empirical_tvd(samples: Iterable, pmf) -> float:
    """Half the L1 distance between the empirical distribution and ``pmf``.

    Samples flagged "out" count as their own outcome, which has zero
    probability under ``pmf`` unless the mapping has an ``"out"`` key.
    """
    pmf = pmf.pmf if isinstance(pmf, Distribution) else pmf
    counts: Counter = Counter()
    n = 0
    for s in samples:
        key = s
        if isinstance(s, OutcomeRecord):
            key = "out" if s.flag == "out" else s.m
        counts[tuple(key) if isinstance(key, (list, np.ndarray)) else key] += 1
        n += 1
    if n == 0:
        raise ValueError("no samples")
    keys = set(counts) | set(pmf)
    return 0.5 * float(sum(abs(counts.get(k, 0) / n - pmf.get(k, 0.0)) for k in keys))


def write_samples(path, records: Iterable[OutcomeRecord]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_samples(path) -> list:
    with open(path) as fh:
        return [OutcomeRecord.from_json(line) for line in fh if line.strip()]
