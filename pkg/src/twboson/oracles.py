"""Brute-force reference implementations.

Nothing here calls the tree-decomposition engines, so values computed by
these functions are independent checks of them.  Every oracle enforces a
size budget and raises instead of running for hours.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import linalg, signal

from .hafnian import BRUTEFORCE_MAX_N, loop_hafnian_bruteforce
from .permanent import RYSER_MAX_N, permanent_ryser

__all__ = [
    "FockAmplitudes",
    "OracleBudgetError",
    "enumerate_outcomes",
    "fock_expansion_gaussian",
    "hafnian_bruteforce",
    "loop_hafnian_bruteforce",
    "permanent_by_permutations",
    "permanent_ryser",
    "spbs_probability_bruteforce",
]

MAX_OUTCOMES = 10 ** 6
FOCK_MAX_MODES = 3
FOCK_MAX_CAP = 8
PERMUTATION_MAX_N = 8


class OracleBudgetError(ValueError):
    """An oracle was asked for more work than its budget allows."""


def hafnian_bruteforce(B) -> complex:
    """Hafnian (perfect matchings without loops), ignoring the diagonal.

    Args:
        B: Symmetric matrix with at most ``BRUTEFORCE_MAX_N`` rows.

    Returns:
        Haf(B); zero for odd sizes.
    """
    B = np.asarray(B, dtype=complex)
    n = B.shape[0]
    if n > BRUTEFORCE_MAX_N:
        raise OracleBudgetError(f"n={n} exceeds the oracle budget of {BRUTEFORCE_MAX_N}")
    if n % 2:
        return 0j

    @lru_cache(maxsize=None)
    def rec(mask: int) -> complex:
        if mask == 0:
            return 1.0 + 0j
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        total = 0j
        j_mask = rest
        while j_mask:
            j = (j_mask & -j_mask).bit_length() - 1
            j_mask &= j_mask - 1
            total += B[i, j] * rec(rest & ~(1 << j))
        return total

    return complex(rec((1 << n) - 1))


def permanent_by_permutations(U) -> complex:
    """Permanent as the explicit sum over permutations (n <= 8)."""
    U = np.asarray(U, dtype=complex)
    n = U.shape[0]
    if n > PERMUTATION_MAX_N:
        raise OracleBudgetError(f"n={n} exceeds the permutation budget")
    rows = np.arange(n)
    return complex(sum(np.prod(U[rows, list(p)]) for p in itertools.permutations(range(n))))


def spbs_probability_bruteforce(U, sources, m) -> float:
    """|Per(U[r, S])|^2 / m! with r the mode list of the pattern m."""
    U = np.asarray(U, dtype=complex)
    r = [i for i, v in enumerate(m) for _ in range(int(v))]
    if len(r) != len(sources):
        return 0.0
    sub = U[np.ix_(r, list(sources))]
    mfact = math.prod(math.factorial(int(v)) for v in m)
    return abs(permanent_by_permutations(sub)) ** 2 / mfact


def enumerate_outcomes(M: int, N: int | None = None, m_max: int | None = None) -> list:
    """All photon patterns in lexicographic order.

    Args:
        M: Number of modes.
        N: Fixed total photon number (single-photon sampling), or
        m_max: Per-mode cap (truncated Gaussian sampling).

    Returns:
        List of tuples.
    """
    if (N is None) == (m_max is None):
        raise ValueError("give exactly one of N and m_max")
    if N is not None:
        count = math.comb(N + M - 1, N)
        if count > MAX_OUTCOMES:
            raise OracleBudgetError(f"{count} outcomes exceed the budget")
        out = []
        for combo in itertools.combinations_with_replacement(range(M), N):
            m = [0] * M
            for i in combo:
                m[i] += 1
            out.append(tuple(m))
        return sorted(out)
    count = (m_max + 1) ** M
    if count > MAX_OUTCOMES:
        raise OracleBudgetError(f"{count} outcomes exceed the budget")
    return list(itertools.product(range(m_max + 1), repeat=M))


@dataclass(frozen=True)
class FockAmplitudes:
    """Fock amplitudes psi[m] for every pattern with m_i <= cap."""

    amplitudes: np.ndarray
    cap: int

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def captured_mass(self) -> float:
        return float(self.probabilities.sum())

    def probability(self, m) -> float:
        return float(self.probabilities[tuple(int(v) for v in m)])


def _single_mode_amplitudes(r: float, beta: complex, n_max: int, dim: int = 160) -> np.ndarray:
    """Amplitudes of D(beta) S |0> for n <= n_max in a truncated Fock space.

    S is the squeezer whose amplitudes are proportional to (+tanh r)^k.
    """
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    ad = a.T
    vac = np.zeros(dim, dtype=complex)
    vac[0] = 1.0
    psi = linalg.expm(0.5 * r * (ad @ ad - a @ a)) @ vac
    if beta != 0:
        psi = linalg.expm(beta * ad - np.conj(beta) * a) @ psi
    return psi[: n_max + 1]


def fock_expansion_gaussian(U, sources, r, cap: int, displacements=None) -> FockAmplitudes:
    """Fock amplitudes of squeezed (optionally displaced) inputs after U.

    Each source s is prepared as D(beta_s) S(r_s)|0> in a large truncated Fock
    space, written as a polynomial in its creation operator, and the
    creation operators are substituted a_s^dag -> sum_j U[j, s] a_j^dag.

    Args:
        U: M x M unitary, M <= 3.
        sources: Source modes.
        r: Squeezing (scalar or per source).
        cap: Largest photon number kept per output mode, <= 8.
        displacements: Optional complex amplitude per source.

    Returns:
        FockAmplitudes; a warning is issued when less than 1 - 1e-6 of the
        probability lies inside the cap.
    """
    U = np.asarray(U, dtype=complex)
    M = U.shape[0]
    if M > FOCK_MAX_MODES or cap > FOCK_MAX_CAP:
        raise OracleBudgetError("Fock oracle limited to M <= 3 and cap <= 8")
    sources = list(sources)
    rs = np.broadcast_to(np.asarray(r, dtype=float), (len(sources),))
    betas = np.zeros(len(sources), dtype=complex) if displacements is None else \
        np.asarray(displacements, dtype=complex)
    shape = (cap + 1,) * M
    n_in = cap * M
    state = np.zeros(shape, dtype=complex)
    state[(0,) * M] = 1.0
    for s, rv, bv in zip(sources, rs, betas):
        c = _single_mode_amplitudes(float(rv), complex(bv), n_in)
        poly = np.zeros(shape, dtype=complex)
        power = np.zeros(shape, dtype=complex)
        power[(0,) * M] = 1.0
        for n in range(n_in + 1):
            poly += c[n] / math.sqrt(math.factorial(n)) * power
            nxt = np.zeros(shape, dtype=complex)
            for j in range(M):
                src = [slice(None)] * M
                dst = [slice(None)] * M
                src[j] = slice(0, cap)
                dst[j] = slice(1, cap + 1)
                nxt[tuple(dst)] += U[j, s] * power[tuple(src)]
            power = nxt
        state = signal.convolve(state, poly, method="direct")[tuple(slice(0, cap + 1) for _ in range(M))]
    norms = np.ones(shape)
    for idx in itertools.product(range(cap + 1), repeat=M):
        norms[idx] = math.sqrt(math.prod(math.factorial(v) for v in idx))
    out = FockAmplitudes(state * norms, cap)
    if out.captured_mass < 1 - 1e-6:
        warnings.warn(f"Fock cap {cap} captures only {out.captured_mass:.8f} of the probability",
                      RuntimeWarning, stacklevel=2)
    return out


# Budgets re-exported for callers that want to check before asking.
ORACLE_BUDGETS = {"ryser": RYSER_MAX_N, "loop_hafnian": BRUTEFORCE_MAX_N,
                  "fock_modes": FOCK_MAX_MODES, "fock_cap": FOCK_MAX_CAP}
