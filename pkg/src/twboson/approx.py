"""Approximate boson sampling from geometrically truncated circuits.

Entries of U that connect a source to modes farther than kappa * L on the
lattice are discarded (U~ = U - dU).  U~ is rescaled by its largest singular
value (U_bar = U~ / (1 + mu)) and embedded in a 2M x 2M unitary

    W = [[U_bar, R sqrt(1 - D_bar^2) V], [R sqrt(1 - D_bar^2) V, -U_bar]],

with U~ = R D~ V the singular value decomposition.  Sampling through W and
keeping only outcomes with every photon in the first M modes is cheap because
those marginals depend only on the sparse U_bar; any photon in the virtual
modes is reported as "out".  W is close to U_2M = U (+) -U, which bounds the
error of the approximate distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import (
    GaussianState,
    apply_passive,
    build_input_state,
    complex_view,
    condition_on_heterodyne,
    gbs_probability,
    marginal_state,
)
from .io import decode_complex, encode_complex
from .lattice import CircuitSpec, mode_distances
from .oracles import OracleBudgetError, enumerate_outcomes
from .permanent import permanent_ryser
from .rng import stream
from .samplers import (
    Distribution,
    OutcomeRecord,
    SamplerConfig,
    _gbs_plan,
    _run_chunks,
    _spbs_chain,
    gbs_sample,
)

__all__ = [
    "ApproxCircuit",
    "TruncationResult",
    "approx_gbs_distribution",
    "approx_gbs_sample",
    "approx_gbs_sample_batch",
    "approx_spbs_distribution",
    "approx_spbs_sample",
    "approx_spbs_sample_batch",
    "covariance_distance",
    "covariance_distance_bound",
    "dw_bound",
    "extend_to_unitary",
    "gbs_tvd_bound",
    "leakage_bound",
    "leakage_rate",
    "mirsky_holds",
    "spbs_tvd_bound",
    "truncate_unitary",
    "tvd",
]

UNITARITY_TOL = 1e-10


def _spec_of(lattice) -> CircuitSpec:
    return lattice if isinstance(lattice, CircuitSpec) else lattice.spec


def leakage_rate(U, source: int, threshold: float, lattice, metric: str | None = None) -> float:
    """eta = sum of |U[j, source]|^2 over modes farther than ``threshold``.

    Args:
        U: M x M unitary.
        source: Source mode.
        threshold: Lattice distance (kappa * L for the truncation).
        lattice: CircuitSpec or Circuit giving the mode coordinates.
        metric: Overrides the layout metric.

    Returns:
        The leakage rate.
    """
    U = np.asarray(U, dtype=complex)
    dist = mode_distances(_spec_of(lattice), source, metric)
    return float(np.sum(np.abs(U[dist > threshold, source]) ** 2))


def leakage_bound(d: int, l: float, t: float) -> float:
    """min(1, 2 d exp(-l^2 / 2t)): random-walk tail bound for spreading past l."""
    if t <= 0:
        raise ValueError("t must be positive")
    return float(min(1.0, 2 * d * math.exp(-l * l / (2 * t))))


@dataclass(frozen=True)
class TruncationResult:
    """Output of :func:`truncate_unitary`.

    Attributes:
        U_tilde: Truncated matrix.
        dU_norm: Frobenius norm of the removed part.
        leakage: Mapping source -> leakage rate eta_s(kappa).
    """

    U_tilde: np.ndarray
    dU_norm: float
    leakage: dict


def truncate_unitary(U, sources, lattice, kappa: float, metric: str | None = None) -> TruncationResult:
    """Zero U[j, s] for every source s and mode j farther than kappa * L.

    Args:
        U: M x M unitary.
        sources: Source modes (columns to truncate).
        lattice: CircuitSpec or Circuit.
        kappa: Truncation radius in units of L.
        metric: Overrides the layout metric.

    Returns:
        TruncationResult with ||dU||_F^2 = sum of the leakage rates.
    """
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    U = np.asarray(U, dtype=complex)
    spec = _spec_of(lattice)
    if U.shape != (spec.M, spec.M):
        raise ValueError("matrix size does not match the lattice")
    threshold = kappa * spec.L
    Ut = U.copy()
    leakage = {}
    for s in sources:
        if not 0 <= int(s) < spec.M:
            raise ValueError(f"source {s} is not a lattice mode")
        far = mode_distances(spec, int(s), metric) > threshold
        leakage[int(s)] = float(np.sum(np.abs(U[far, s]) ** 2))
        Ut[far, s] = 0.0
    return TruncationResult(Ut, float(np.linalg.norm(U - Ut)), leakage)


@dataclass(frozen=True)
class ApproxCircuit:
    """Truncated circuit embedded in a 2M-mode unitary.

    Attributes:
        U: Original unitary.
        U_tilde: Truncated matrix.
        kappa_scale: 1 + mu, the factor dividing U_tilde.
        W: 2M x 2M unitary extension.
        dU_norm: ||U - U_tilde||_F.
        dW_norm: ||U (+) -U  -  W||_F.
        clamp: Whether singular values above one were clamped instead of
            rescaling all of them.
    """

    U: np.ndarray
    U_tilde: np.ndarray
    kappa_scale: float
    W: np.ndarray
    dU_norm: float
    dW_norm: float
    clamp: bool = False

    @property
    def M(self) -> int:
        return self.U.shape[0]

    @property
    def mu(self) -> float:
        return self.kappa_scale - 1.0

    @property
    def U_bar(self) -> np.ndarray:
        """Top-left block of W."""
        return self.W[: self.M, : self.M]

    @property
    def U_2M(self) -> np.ndarray:
        Z = np.zeros_like(self.U)
        return np.block([[self.U, Z], [Z, -self.U]])

    def to_dict(self) -> dict:
        return {"U": encode_complex(self.U), "U_tilde": encode_complex(self.U_tilde),
                "clamp": self.clamp}

    @classmethod
    def from_dict(cls, data: dict) -> "ApproxCircuit":
        return extend_to_unitary(decode_complex(data["U_tilde"]), decode_complex(data["U"]),
                                 clamp=bool(data.get("clamp", False)))


def extend_to_unitary(U_tilde, U=None, clamp: bool = False) -> ApproxCircuit:
    """Rescale U_tilde and extend it to a 2M x 2M unitary W.

    Args:
        U_tilde: Truncated M x M matrix.
        U: Original unitary (defaults to U_tilde, giving dU = 0).
        clamp: Replace singular values above one by one instead of dividing
            all of them by the largest.

    Returns:
        ApproxCircuit.

    Raises:
        ValueError: Non-finite input or a W that fails the unitarity check.
    """
    Ut = np.asarray(U_tilde, dtype=complex)
    U = Ut if U is None else np.asarray(U, dtype=complex)
    if not np.all(np.isfinite(Ut)):
        raise ValueError("U_tilde contains non-finite entries")
    R, s, Vh = np.linalg.svd(Ut)
    kappa = max(float(s.max(initial=0.0)), 1.0)
    if clamp:
        D = np.minimum(s, 1.0)
        U_bar = (R * D) @ Vh
    else:
        D = s / kappa
        U_bar = Ut / kappa
    C = (R * np.sqrt(np.clip(1.0 - D ** 2, 0.0, None))) @ Vh
    W = np.block([[U_bar, C], [C, -U_bar]])
    dev = np.linalg.norm(W.conj().T @ W - np.eye(W.shape[0]))
    if dev > UNITARITY_TOL * max(1, W.shape[0]):
        raise ValueError(f"extension is not unitary (deviation {dev:.2e})")
    Z = np.zeros_like(U)
    dW = np.block([[U, Z], [Z, -U]]) - W
    return ApproxCircuit(U, Ut, kappa, W, float(np.linalg.norm(U - Ut)),
                         float(np.linalg.norm(dW)), clamp)


# ---------------------------------------------------------------------------
# Bounds


def mirsky_holds(circuit: ApproxCircuit, tol: float = 1e-12) -> bool:
    """mu^2 <= ||dU||_F^2 (singular values move by at most ||dU||)."""
    return circuit.mu ** 2 <= circuit.dU_norm ** 2 + tol


def dw_bound(M: int, dU_norm: float) -> float:
    """Upper bound 2 (sqrt(M) + 1)^2 (||dU||_F^2 + ||dU||_F) on ||dW||_F^2."""
    return 2 * (math.sqrt(M) + 1) ** 2 * (dU_norm ** 2 + dU_norm)


def spbs_tvd_bound(N: int, dW_norm: float) -> float:
    """N/2 ||dW||_F bound on the single-photon total variation distance."""
    return N / 2 * dW_norm


def covariance_distance_bound(dW_norm: float, M: int, N: int, r: float) -> float:
    """2 ||dW||_F sqrt(M [N cosh 4r + (M - N)]) bound on ||V_2M - V_bar_2M||_F."""
    return 2 * dW_norm * math.sqrt(M * (N * math.cosh(4 * r) + (M - N)))


def gbs_tvd_bound(N: int, r: float, dV_norm: float) -> float:
    """(N cosh 4r / 2)^(1/4) ||dV||_F^(1/2) bound on the Gaussian TVD."""
    return (N * math.cosh(4 * r) / 2) ** 0.25 * math.sqrt(dV_norm)


def _states_2m(circuit: ApproxCircuit, sources, r):
    inp = build_input_state(2 * circuit.M, sources, r)
    return apply_passive(inp, circuit.U_2M), apply_passive(inp, circuit.W)


def covariance_distance(circuit: ApproxCircuit, sources, r) -> float:
    """||V_2M - V_bar_2M||_F for squeezed inputs on ``sources``."""
    ideal, approx = _states_2m(circuit, sources, r)
    return float(np.linalg.norm(ideal.V - approx.V))


def tvd(p: Distribution | dict, q: Distribution | dict) -> float:
    """Half the L1 distance between two pmfs (keys missing on one side count as 0)."""
    p = p.pmf if isinstance(p, Distribution) else p
    q = q.pmf if isinstance(q, Distribution) else q
    return 0.5 * float(sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in set(p) | set(q)))


# ---------------------------------------------------------------------------
# Exact approximate distributions (oracle scale)


def approx_spbs_distribution(circuit: ApproxCircuit, sources) -> Distribution:
    """Distribution of the approximate sampler, with the key ``"out"``.

    Args:
        circuit: ApproxCircuit with M <= 8.
        sources: Input modes (N <= 4).

    Returns:
        Distribution over first-M patterns plus "out".
    """
    sources = list(sources)
    M, N = circuit.M, len(sources)
    if M > 8 or N > 4:
        raise OracleBudgetError("limited to M <= 8 and N <= 4")
    Ub = circuit.U_bar
    pmf = {}
    for m in enumerate_outcomes(M, N=N):
        rows = [i for i, v in enumerate(m) for _ in range(v)]
        pmf[m] = abs(permanent_ryser(Ub[np.ix_(rows, sources)])) ** 2 / \
            math.prod(math.factorial(v) for v in m)
    pmf["out"] = max(0.0, 1.0 - sum(pmf.values()))
    return Distribution(pmf, 0.0)


def approx_gbs_distribution(circuit: ApproxCircuit, sources, r, m_max: int,
                            max_total: int = 12) -> Distribution:
    """Truncated distribution of the approximate Gaussian sampler, with "out".

    P(m) is the probability of m on the first M modes and vacuum on the
    virtual modes; "out" is the probability of any virtual photon.

    Args:
        circuit: ApproxCircuit with M <= 2.
        sources: Squeezed modes.
        r: Squeezing.
        m_max: Per-mode cutoff (<= 4).
        max_total: Largest total photon number evaluated.

    Returns:
        Distribution whose ``deficit`` is the mass lost to the cutoffs.
    """
    M = circuit.M
    if M > 2 or m_max > 4:
        raise OracleBudgetError("limited to M <= 2 and m_max <= 4")
    _, approx = _states_2m(circuit, sources, r)
    view = complex_view(approx)
    pmf = {m: gbs_probability(view, list(m) + [0] * M, engine="oracle")
           for m in enumerate_outcomes(M, m_max=m_max) if sum(m) <= max_total}
    p_in = _virtual_vacuum_probability(approx, M)
    pmf["out"] = max(0.0, 1.0 - p_in)
    return Distribution(pmf, max(0.0, 1.0 - sum(pmf.values())))


# ---------------------------------------------------------------------------
# Samplers


def approx_spbs_sample(circuit: ApproxCircuit, sources, config: SamplerConfig = SamplerConfig(),
                       index: int = 0, memo: dict | None = None) -> OutcomeRecord:
    """Draw one approximate single-photon sample through W.

    Every step uses only U_bar; the conditional mass that would go to the
    virtual modes ends the chain with flag "out".  With dU = 0 the random
    stream and the result coincide with :func:`spbs_sample`.

    Args:
        circuit: ApproxCircuit.
        sources: Input modes (within the first M).
        config: Sampler settings.
        index: Sample index.
        memo: Optional sub-permanent cache shared across a batch.

    Returns:
        OutcomeRecord (flag "out" without a pattern when photons leave).
    """
    rng = stream(config.seed, "spbs", index)
    m, overload = _spbs_chain(circuit.U_bar, list(sources), config, rng, leak=True, memo=memo)
    if m is None:
        return OutcomeRecord(None, "out", config.seed, index, overload=overload)
    return OutcomeRecord(m, "ok", config.seed, index, overload=overload)


def _approx_spbs_chunk(circuit, sources, config, indices) -> list:
    memo: dict = {}
    return [approx_spbs_sample(circuit, sources, config, i, memo) for i in indices]


def approx_spbs_sample_batch(circuit: ApproxCircuit, sources, n: int,
                             config: SamplerConfig = SamplerConfig(), start: int = 0,
                             workers: int | None = None) -> list:
    """Approximate samples ``start .. start + n - 1``."""
    return _run_chunks(_approx_spbs_chunk, (circuit, list(sources), config),
                       range(start, start + n), workers)


def _virtual_vacuum_probability(state: GaussianState, M: int) -> float:
    virtual = marginal_state(state, range(M, 2 * M))
    return gbs_probability(complex_view(virtual), [0] * M)


def _approx_gbs_prepare(circuit: ApproxCircuit, sources, r):
    """(probability of no virtual photon, state of the first M modes given that)."""
    M = circuit.M
    _, approx = _states_2m(circuit, sources, r)
    p_in = _virtual_vacuum_probability(approx, M)
    # Projecting on vacuum is heterodyne conditioning on the outcome alpha = 0.
    cond = condition_on_heterodyne(approx, range(M, 2 * M), np.zeros(2 * M))
    return p_in, cond


def approx_gbs_sample(circuit: ApproxCircuit, sources, r, config: SamplerConfig = SamplerConfig(),
                      index: int = 0, prepared=None, plan=None) -> OutcomeRecord:
    """Draw one approximate Gaussian sample through W.

    The virtual modes are measured first (photons present or absent); a
    click returns "out", otherwise the first M modes are sampled from their
    state conditioned on vacuum in the virtual modes.

    Args:
        circuit: ApproxCircuit.
        sources: Squeezed modes (within the first M).
        r: Squeezing.
        config: Sampler settings.
        index: Sample index.
        prepared: Optional cached output of the virtual-mode step.
        plan: Optional cached per-step data of the conditional state.

    Returns:
        OutcomeRecord.
    """
    p_in, cond = prepared if prepared is not None else _approx_gbs_prepare(circuit, sources, r)
    u = stream(config.seed, "gbs-virtual", index).random()
    if u >= p_in:
        return OutcomeRecord(None, "out", config.seed, index)
    return gbs_sample(None, sources, r, config, index, state=cond, plan=plan)


def _approx_gbs_chunk(circuit, sources, r, config, indices) -> list:
    prepared = _approx_gbs_prepare(circuit, sources, r)
    plan = _gbs_plan(prepared[1], config.track_truncation)
    return [approx_gbs_sample(circuit, sources, r, config, i, prepared, plan) for i in indices]


def approx_gbs_sample_batch(circuit: ApproxCircuit, sources, r, n: int,
                            config: SamplerConfig = SamplerConfig(), start: int = 0,
                            workers: int | None = None) -> list:
    """Approximate Gaussian samples ``start .. start + n - 1``."""
    return _run_chunks(_approx_gbs_chunk, (circuit, list(sources), r, config),
                       range(start, start + n), workers)
