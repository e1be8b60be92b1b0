"""Log-likelihood ratio test between two sample sets under an ideal model.

For sample sets a and b of equal size the statistic is

    ratio = sum_i [log P_ideal(m_a^(i)) - log P_ideal(m_b^(i))],

optionally evaluated on the marginal distribution of a subset of modes.  A
positive value means the ideal model prefers set a.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .approx import ApproxCircuit
from .gaussian import complex_view, gbs_probability, marginal_state
from .permanent import permanent_ryser, permanent_treedp
from .samplers import OutcomeRecord, gbs_state

__all__ = [
    "Compensation",
    "GBSModel",
    "LikelihoodReport",
    "SPBSModel",
    "ZeroProbabilityError",
    "compensate_photon_number",
    "log_likelihood_ratio",
    "model_from_dict",
]


class ZeroProbabilityError(ValueError):
    """A sample has zero probability under the ideal model."""

    def __init__(self, which: str, index: int):
        super().__init__(f"sample {index} of set {which} has zero ideal probability")
        self.which = which
        self.index = index


def _pattern(sample) -> tuple:
    if isinstance(sample, OutcomeRecord):
        return sample.m
    return tuple(int(v) for v in sample)


class GBSModel:
    """Ideal Gaussian model: squeezed ``sources`` with squeezing r through U.

    Marginal probabilities are those of the reduced state on the chosen modes.
    """

    kind = "gbs"

    def __init__(self, U, sources, r, engine: str = "treedp"):
        self.U = np.asarray(U, dtype=complex)
        self.sources = list(sources)
        self.r = r
        self.engine = engine
        self._state = gbs_state(self.U, self.sources, r)
        self._views: dict = {}

    def probability(self, m, modes=None) -> float:
        m = list(m)
        modes = tuple(range(len(m))) if modes is None else tuple(modes)
        if modes not in self._views:
            self._views[modes] = complex_view(marginal_state(self._state, modes))
        return gbs_probability(self._views[modes], [m[i] for i in modes], engine=self.engine)

    def to_dict(self) -> dict:
        from .io import encode_complex
        return {"kind": "gbs", "U": encode_complex(self.U), "sources": self.sources,
                "r": np.asarray(self.r, dtype=float).tolist()}


class SPBSModel:
    """Ideal single-photon model.

    The marginal on modes K of a pattern with n_K photons there is

        sum over T, T' subsets of S with |T| = |T'| = n_K of
        Per(U[r_K, T]) conj(Per(U[r_K, T'])) Per(G[S - T, S - T']) / m_K!,

    with G[s, s'] = sum over modes j outside K of conj(U[j, s]) U[j, s'].
    """

    kind = "spbs"

    def __init__(self, U, sources, engine: str = "treedp"):
        self.U = np.asarray(U, dtype=complex)
        self.sources = list(sources)
        self.engine = engine

    def _per(self, rows, cols) -> complex:
        if not rows:
            return 1.0 + 0j
        if self.engine == "oracle" or len(set(rows)) < len(rows):
            return permanent_ryser(self.U[np.ix_(rows, cols)])
        return permanent_treedp(self.U, rows, cols)

    def probability(self, m, modes=None) -> float:
        m = [int(v) for v in m]
        M, N = self.U.shape[0], len(self.sources)
        if modes is None or len(modes) == M:
            if sum(m) != N:
                return 0.0
            rows = [i for i, v in enumerate(m) for _ in range(v)]
            return abs(self._per(rows, self.sources)) ** 2 / math.prod(math.factorial(v) for v in m)
        modes = sorted(modes)
        rows = [i for i in modes for _ in range(m[i])]
        n_k = len(rows)
        if n_k > N:
            return 0.0
        rest = [j for j in range(M) if j not in set(modes)]
        Us = self.U[:, self.sources]
        G = Us[rest].conj().T @ Us[rest]
        subsets = list(itertools.combinations(range(N), n_k))
        pers = [self._per(rows, [self.sources[t] for t in T]) for T in subsets]
        total = 0j
        for (T, pT), (T2, pT2) in itertools.product(zip(subsets, pers), repeat=2):
            comp = [i for i in range(N) if i not in T]
            comp2 = [i for i in range(N) if i not in T2]
            overlap = permanent_ryser(G[np.ix_(comp, comp2)]) if comp else 1.0
            total += np.conj(pT) * pT2 * overlap
        return float(total.real / math.prod(math.factorial(m[i]) for i in modes))

    def to_dict(self) -> dict:
        from .io import encode_complex
        return {"kind": "spbs", "U": encode_complex(self.U), "sources": self.sources}


def model_from_dict(data: dict, engine: str = "treedp"):
    """Rebuild a model written by ``to_dict``."""
    from .io import decode_complex
    U = decode_complex(data["U"])
    if data["kind"] == "gbs":
        return GBSModel(U, data["sources"], np.asarray(data["r"], dtype=float), engine)
    if data["kind"] == "spbs":
        return SPBSModel(U, data["sources"], engine)
    raise ValueError(f"unknown model kind {data['kind']!r}")


@dataclass
class LikelihoodReport:
    """Result of :func:`log_likelihood_ratio`.

    Attributes:
        ratio: The log-likelihood ratio (per sample when ``normalized``).
        logp_a: Log ideal probability of every sample of set a.
        logp_b: Same for set b.
        n_samples: Number of samples per set (a, b).
        marginal_modes: Modes the model was evaluated on (None = all).
        normalized: Whether the ratio is per sample.
        dropped: Number of "out" samples removed from (a, b).
    """

    ratio: float
    logp_a: np.ndarray
    logp_b: np.ndarray
    n_samples: tuple
    marginal_modes: tuple | None = None
    normalized: bool = False
    dropped: tuple = (0, 0)
    running: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"ratio": self.ratio, "n_samples": list(self.n_samples),
                "marginal_modes": None if self.marginal_modes is None else list(self.marginal_modes),
                "normalized": self.normalized, "dropped": list(self.dropped),
                "logp_a": self.logp_a.tolist(), "logp_b": self.logp_b.tolist(),
                "running": self.running.tolist()}

    def running_text(self) -> str:
        """Plain two-column series 'i partial_sum' for plotting."""
        return "\n".join(f"{i + 1} {v:.12g}" for i, v in enumerate(self.running))


def _log_probs(model, samples, modes, floor, which: str) -> np.ndarray:
    out = np.empty(len(samples))
    for i, s in enumerate(samples):
        p = model.probability(s, modes)
        if p <= 0:
            if floor is None:
                raise ZeroProbabilityError(which, i)
            p = floor
        out[i] = math.log(max(p, floor or 0.0))
    return out


def log_likelihood_ratio(samples_a, samples_b, model, marginal_modes=None,
                         normalize: bool = False, floor: float | None = None) -> LikelihoodReport:
    """Log-likelihood ratio of two sample sets under ``model``.

    Args:
        samples_a: Patterns or OutcomeRecords ("out" records are dropped).
        samples_b: Same for the second set.
        model: Object with ``probability(m, modes)`` (GBSModel, SPBSModel).
        marginal_modes: Optional subset of modes to evaluate the marginal on.
        normalize: Report the difference of per-sample means, allowing
            unequal set sizes.
        floor: Optional probability floor; by default a zero probability
            raises ZeroProbabilityError.

    Returns:
        LikelihoodReport with the running partial sums of the paired
        differences (or of the a-terms minus the mean b-term when sizes differ).
    """
    def clean(samples):
        kept = [_pattern(s) for s in samples
                if not (isinstance(s, OutcomeRecord) and s.flag == "out")]
        return kept, len(samples) - len(kept)

    a, drop_a = clean(list(samples_a))
    b, drop_b = clean(list(samples_b))
    if not normalize and len(a) != len(b):
        raise ValueError(f"sample counts differ ({len(a)} vs {len(b)}); pass normalize=True")
    if not a or not b:
        raise ValueError("empty sample set")
    modes = None if marginal_modes is None else tuple(sorted(int(k) for k in marginal_modes))
    la = _log_probs(model, a, modes, floor, "a")
    lb = _log_probs(model, b, modes, floor, "b")
    if normalize:
        ratio = float(np.mean(la) - np.mean(lb))
        running = np.cumsum(la) / np.arange(1, len(la) + 1) - np.mean(lb)
    else:
        ratio = float(np.sum(la) - np.sum(lb))
        running = np.cumsum(la - lb)
    return LikelihoodReport(ratio, la, lb, (len(a), len(b)), modes, normalize,
                            (drop_a, drop_b), running)


# ---------------------------------------------------------------------------
# Photon-number compensation


@dataclass(frozen=True)
class Compensation:
    """Adjusted input parameters.

    Attributes:
        r: Squeezing to use.
        thermal: Thermal occupation added to every source.
        mean_photons: Resulting mean photon number.
        target: Requested mean photon number.
    """

    r: float
    thermal: float
    mean_photons: float
    target: float


def _transmissions(circuit, sources) -> np.ndarray:
    T = circuit.U_bar if isinstance(circuit, ApproxCircuit) else np.asarray(circuit, dtype=complex)
    return np.sum(np.abs(T[:, list(sources)]) ** 2, axis=0).real


def _mean(eta: np.ndarray, r: float, thermal: float) -> float:
    """Sum over sources of eta_s ((n_th + 1/2) cosh 2r - 1/2)."""
    return float(np.sum(eta) * ((thermal + 0.5) * math.cosh(2 * r) - 0.5))


def compensate_photon_number(circuit, sources, r: float, target: float | None = None,
                             r_max: float = 5.0) -> Compensation:
    """Raise the squeezing (then add thermal photons) to restore a mean photon number.

    The transmitted mean photon number of independent squeezed thermal
    inputs through a (sub-unitary) transfer matrix T is
    sum_s ||T[:, s]||^2 ((n_th + 1/2) cosh 2r - 1/2).

    Args:
        circuit: ApproxCircuit (its U_bar is the transfer matrix onto the
            first M modes) or an explicit transfer matrix.
        sources: Source modes.
        r: Nominal squeezing.
        target: Mean photon number to reach; defaults to the lossless value
            len(sources) sinh^2 r.
        r_max: Largest squeezing allowed before thermal photons are added.

    Returns:
        Compensation.

    Raises:
        ValueError: When no positive transmission makes the target reachable.
    """
    eta = _transmissions(circuit, sources)
    if target is None:
        target = len(list(sources)) * math.sinh(r) ** 2
    current = _mean(eta, r, 0.0)
    if abs(current - target) <= 1e-12 * max(1.0, target):
        return Compensation(float(r), 0.0, current, float(target))
    if eta.sum() <= 0:
        raise ValueError("no transmitted photons: target not reachable")
    lo = 0.0
    if _mean(eta, r_max, 0.0) >= target:
        r_new = brentq(lambda x: _mean(eta, x, 0.0) - target, lo, r_max, xtol=1e-14)
        return Compensation(float(r_new), 0.0, _mean(eta, r_new, 0.0), float(target))
    f = lambda n: _mean(eta, r_max, n) - target  # noqa: E731
    hi = 1.0
    while f(hi) < 0:
        hi *= 2
        if hi > 1e12:
            raise ValueError("target mean photon number not bracketable")
    n_th = brentq(f, 0.0, hi, xtol=1e-14)
    return Compensation(float(r_max), float(n_th), _mean(eta, r_max, n_th), float(target))
