"""Gaussian states in phase space.

Conventions:

* quadratures are ordered (x_1, p_1, x_2, p_2, ...) ("xpxp");
* the vacuum has covariance V = I/2 and a_j = (x_j + i p_j) / sqrt(2);
* a passive linear-optical circuit acts as a_out = U a_in;
* a squeezed input with parameter r > 0 has V = diag(e^{2r}, e^{-2r}) / 2,
  so that its photon-number amplitudes are proportional to (+tanh r)^k and
  B = U diag(tanh r) U^T.

The complex covariance uses xi = (a_1..a_M, a_1^dag..a_M^dag):
Sigma = F V F^dag where F first reorders to (x..., p...) and then applies
(1/sqrt 2) [[I, iI], [I, -iI]].  From it Q = Sigma + I/2, A = X (I - Q^-1)
with X = [[0, I], [I, 0]], and the loop weights gamma = beta^* - A beta for
the complex mean beta = (alpha, alpha^*).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg, stats

from .hafnian import loop_hafnian_bruteforce, loop_hafnian_treedp_weighted, repeat_matrix

__all__ = [
    "ComplexGaussianView",
    "GaussianState",
    "NumericalError",
    "apply_beam_splitter",
    "apply_passive",
    "b_matrix",
    "build_input_state",
    "complex_view",
    "condition_on_heterodyne",
    "fidelity_pure",
    "gbs_probability",
    "infidelity_bound",
    "marginal_state",
    "mean_photon_number",
    "negative_binomial_pmf",
    "negative_binomial_tail",
    "omega",
    "passive_symplectic",
    "photon_truncation_threshold",
    "schur_complement",
    "squeezing_symplectic",
]

PURITY_TOL = 1e-8
COND_LIMIT = 1e12


class NumericalError(ArithmeticError):
    """A matrix inversion or determinant failed its conditioning check."""


def omega(M: int) -> np.ndarray:
    """Symplectic form in xpxp ordering."""
    return np.kron(np.eye(M), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _xpxp_to_xxpp(M: int) -> np.ndarray:
    """Permutation matrix P with P @ v_xpxp = v_xxpp."""
    P = np.zeros((2 * M, 2 * M))
    for i in range(M):
        P[i, 2 * i] = 1.0
        P[M + i, 2 * i + 1] = 1.0
    return P


def _checked_inv(mat: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NumericalError(f"{what} is singular or ill-conditioned (cond={cond:.3g})")
    return linalg.inv(mat)


@dataclass(frozen=True)
class GaussianState:
    """Gaussian state by its Wigner covariance V (2M x 2M, xpxp) and mean d."""

    V: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        d = np.asarray(self.d, dtype=float)
        if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] % 2:
            raise ValueError("V must be a square matrix of even size")
        if d.shape != (V.shape[0],):
            raise ValueError("mean vector has the wrong length")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "d", d)

    @property
    def M(self) -> int:
        return self.V.shape[0] // 2

    @classmethod
    def vacuum(cls, M: int) -> "GaussianState":
        return cls(np.eye(2 * M) / 2, np.zeros(2 * M))

    def is_physical(self, tol: float = 1e-9) -> bool:
        """Symmetry and the uncertainty relation V + i Omega / 2 >= 0."""
        if np.max(np.abs(self.V - self.V.T), initial=0.0) > tol:
            return False
        H = self.V + 0.5j * omega(self.M)
        return bool(np.min(np.linalg.eigvalsh(H), initial=0.0) >= -tol)

    def is_pure(self, tol: float = PURITY_TOL) -> bool:
        target = 4.0 ** (-self.M)
        return abs(np.linalg.det(self.V) - target) / target <= tol

    def symplectic_eigenvalues(self) -> np.ndarray:
        ev = np.linalg.eigvals(1j * omega(self.M) @ self.V)
        return np.sort(np.abs(ev))[::2]

    def to_dict(self) -> dict:
        return {"M": self.M, "V": self.V.ravel().tolist(), "d": self.d.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianState":
        M = int(data["M"])
        return cls(np.asarray(data["V"], dtype=float).reshape(2 * M, 2 * M),
                   np.asarray(data["d"], dtype=float))


def _squeezing_vector(M: int, sources, r) -> np.ndarray:
    rs = np.zeros(M)
    sources = list(sources)
    if np.ndim(r) == 0:
        rs[sources] = float(r)
    else:
        r = np.asarray(r, dtype=float)
        if len(r) == M and len(sources) != M:
            rs = r.copy()
        else:
            rs[sources] = r
    return rs


def squeezing_symplectic(rs) -> np.ndarray:
    """Single-mode squeezers diag(e^{r}, e^{-r}) per mode (xpxp)."""
    rs = np.asarray(rs, dtype=float)
    return np.diag(np.ravel(np.column_stack([np.exp(rs), np.exp(-rs)])))


def build_input_state(M: int, sources, r) -> GaussianState:
    """Squeezed vacuum on the source modes, vacuum elsewhere.

    Args:
        M: Number of modes.
        sources: Source mode indices.
        r: Squeezing, a scalar or one value per source.

    Returns:
        GaussianState with V = S S^T / 2, S the squeezing symplectic.
    """
    for s in sources:
        if not 0 <= int(s) < M:
            raise ValueError(f"source {s} is not a mode")
    S = squeezing_symplectic(_squeezing_vector(M, sources, r))
    return GaussianState(S @ S.T / 2, np.zeros(2 * M))


def passive_symplectic(U) -> np.ndarray:
    """Real symplectic matrix (xpxp) of the passive circuit a -> U a."""
    U = np.asarray(U, dtype=complex)
    M = U.shape[0]
    S_xxpp = np.block([[U.real, -U.imag], [U.imag, U.real]])
    P = _xpxp_to_xxpp(M)
    return P.T @ S_xxpp @ P


def apply_passive(state: GaussianState, U) -> GaussianState:
    """Send the state through the passive circuit U."""
    S = passive_symplectic(U)
    return GaussianState(S @ state.V @ S.T, S @ state.d)


def beam_splitter_unitary(theta: float, phi: float) -> np.ndarray:
    """2 x 2 beam-splitter unitary [[cos t, -e^{-i phi} sin t], [e^{i phi} sin t, cos t]]."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -np.exp(-1j * phi) * s], [np.exp(1j * phi) * s, c]])


def apply_beam_splitter(state: GaussianState, i: int, j: int, theta: float,
                        phi: float = 0.0) -> GaussianState:
    """Apply a beam splitter between modes i and j.

    Args:
        state: Input state.
        i: First mode.
        j: Second mode (distinct from i).
        theta: Mixing angle; pi/2 swaps the modes.
        phi: Phase.

    Returns:
        Transformed state.
    """
    M = state.M
    if i == j or not (0 <= i < M and 0 <= j < M):
        raise ValueError(f"invalid mode pair ({i}, {j})")
    U = np.eye(M, dtype=complex)
    U[np.ix_([i, j], [i, j])] = beam_splitter_unitary(theta, phi)
    return apply_passive(state, U)


def b_matrix(U, r) -> np.ndarray:
    """B = U diag(tanh r) U^T for squeezing vector r (length = columns of U)."""
    U = np.asarray(U, dtype=complex)
    t = np.tanh(np.asarray(r, dtype=float))
    if t.ndim == 0:
        t = np.full(U.shape[1], float(t))
    return (U * t) @ U.T


@dataclass(frozen=True)
class ComplexGaussianView:
    """Complex-form objects derived from a Gaussian state."""

    Sigma: np.ndarray
    Q: np.ndarray
    Qinv: np.ndarray
    A: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    pure: bool

    @property
    def M(self) -> int:
        return self.Q.shape[0] // 2

    @property
    def B(self) -> np.ndarray:
        """Top-left block of A.

        With amplitudes ordered (alpha, alpha^*) a pure squeezed state has
        A = B^* (+) B, so this block is the complex conjugate of
        U diag(tanh r) U^T.  Probabilities only involve |lHaf|^2 of this block
        filled with the matching entries of gamma, so the conjugation drops out.
        """
        return self.A[: self.M, : self.M]

    def prefactor(self) -> float:
        """exp(-beta^dag Q^-1 beta / 2) / sqrt(det Q)."""
        det = np.linalg.det(self.Q).real
        if det <= 0:
            raise NumericalError("det(Q) is not positive: unphysical state")
        expo = -0.5 * (self.beta.conj() @ self.Qinv @ self.beta).real
        return float(math.exp(expo) / math.sqrt(det))


def complex_map(M: int) -> np.ndarray:
    """Matrix F taking xpxp quadratures to (alpha, alpha^*) amplitudes."""
    I = np.eye(M)
    return np.block([[I, 1j * I], [I, -1j * I]]) / math.sqrt(2) @ _xpxp_to_xxpp(M)


def with_displacement(view: ComplexGaussianView, d) -> ComplexGaussianView:
    """Same covariance as ``view`` but displacement ``d`` (xpxp quadratures)."""
    beta = complex_map(view.M) @ np.asarray(d, dtype=float)
    gamma = beta.conj() - view.A @ beta
    return replace(view, beta=beta, gamma=gamma)


def complex_view(state: GaussianState) -> ComplexGaussianView:
    """Compute Sigma, Q, A and gamma of a state."""
    M = state.M
    I = np.eye(M)
    F = complex_map(M)
    Sigma = F @ state.V @ F.conj().T
    Q = Sigma + np.eye(2 * M) / 2
    Qinv = _checked_inv(Q, "Q")
    X = np.block([[np.zeros((M, M)), I], [I, np.zeros((M, M))]])
    A = X @ (np.eye(2 * M) - Qinv)
    beta = F @ state.d
    gamma = beta.conj() - A @ beta
    return ComplexGaussianView(Sigma, Q, Qinv, A, beta, gamma, state.is_pure())


def schur_complement(mat, keep, drop) -> np.ndarray:
    """Schur complement mat/mat_BB = mat_AA - mat_AB mat_BB^-1 mat_BA.

    Args:
        mat: Square matrix.
        keep: Indices of block A.
        drop: Indices of block B.

    Returns:
        The Schur complement over ``keep``.
    """
    mat = np.asarray(mat)
    keep, drop = list(keep), list(drop)
    if not drop:
        return mat[np.ix_(keep, keep)].copy()
    inv = _checked_inv(mat[np.ix_(drop, drop)], "conditioning block")
    return mat[np.ix_(keep, keep)] - mat[np.ix_(keep, drop)] @ inv @ mat[np.ix_(drop, keep)]


def _quad_indices(modes) -> list[int]:
    return [q for m in modes for q in (2 * m, 2 * m + 1)]


def marginal_state(state: GaussianState, modes) -> GaussianState:
    """Reduced state on ``modes`` (partial trace)."""
    idx = _quad_indices(modes)
    return GaussianState(state.V[np.ix_(idx, idx)], state.d[idx])


def condition_on_heterodyne(state: GaussianState, measured, mu) -> GaussianState:
    """State of the unmeasured modes after heterodyne detection.

    Args:
        state: Joint state.
        measured: Measured modes B.
        mu: Outcome quadratures (x, p) per measured mode, length 2|B|.

    Returns:
        Conditional state over the remaining modes in increasing order.
    """
    measured = sorted(int(b) for b in measured)
    rest = [a for a in range(state.M) if a not in set(measured)]
    if not measured:
        return state
    ia, ib = _quad_indices(rest), _quad_indices(measured)
    W = state.V + np.eye(2 * state.M) / 2
    V_new = schur_complement(W, ia, ib) - np.eye(len(ia)) / 2
    inv = _checked_inv(W[np.ix_(ib, ib)], "conditioning block")
    mu = np.asarray(mu, dtype=float)
    d_new = state.d[ia] + state.V[np.ix_(ia, ib)] @ inv @ (mu - state.d[ib])
    return GaussianState((V_new + V_new.T) / 2, d_new)


def gbs_probability(view: ComplexGaussianView, m, engine: str = "treedp") -> float:
    """Probability of the photon pattern m.

    For pure states P(m) = prefactor |lHaf(B~_m)|^2 / m! with
    B~ = fdiag(B, gamma); mixed states use lHaf(A~_(m, m)) / m!.

    Args:
        view: Complex view of the state.
        m: Photon numbers per mode.
        engine: ``"treedp"`` or ``"oracle"`` (explicit repetition and matching
            enumeration).

    Returns:
        The probability (a real number in [0, 1]).
    """
    m = [int(v) for v in m]
    M = view.M
    if len(m) != M:
        raise ValueError("pattern length differs from the mode count")
    pref = view.prefactor()
    mfact = math.prod(math.factorial(v) for v in m)
    if view.pure:
        lh = _lhaf(view.B, view.gamma[:M], m, engine)
        value = abs(lh) ** 2
    else:
        lh = _lhaf(view.A, view.gamma, m + m, engine)
        value = lh.real
    return float(pref * value / mfact)


def _lhaf(B, loops, m, engine: str) -> complex:
    if engine == "treedp":
        return loop_hafnian_treedp_weighted(B, m, loops=loops)
    if engine == "oracle":
        return loop_hafnian_bruteforce(repeat_matrix(B, m, loops))
    raise ValueError(f"unknown engine {engine!r}")


def mean_photon_number(state: GaussianState) -> float:
    """Total mean photon number sum (V_xx + V_pp - 1) / 2 + |d|^2 / 2."""
    return float((np.trace(state.V) - state.M) / 2 + state.d @ state.d / 2)


def negative_binomial_pmf(N: int, r: float, k: int) -> float:
    """Probability of k photon pairs from N single-mode squeezers of strength r."""
    return float(stats.nbinom.pmf(k, N / 2, 1 / math.cosh(r) ** 2))


def negative_binomial_tail(N: int, r: float, k: int) -> float:
    """Probability of more than k photon pairs."""
    return float(stats.nbinom.sf(k, N / 2, 1 / math.cosh(r) ** 2))


def photon_truncation_threshold(r: float, epsilon: float) -> int:
    """m_max = max(2, ceil(2 sech^2 r log(1/epsilon)))."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return max(2, math.ceil(2 / math.cosh(r) ** 2 * math.log(1 / epsilon) - 1e-12))


def fidelity_pure(V1, V2) -> float:
    """Fidelity 1 / sqrt(det(V1 + V2)) between a pure state V1 and any V2 (zero means)."""
    V1 = np.asarray(V1, dtype=float)
    M = V1.shape[0] // 2
    target = 4.0 ** (-M)
    if abs(np.linalg.det(V1) - target) / target > PURITY_TOL:
        raise ValueError("first covariance matrix is not pure")
    return float(1 / math.sqrt(np.linalg.det(V1 + np.asarray(V2, dtype=float))))


def infidelity_bound(X, N: int, r: float) -> float:
    """First-order bound ||X||_F sqrt(N cosh(4r) / 2) on 1 - F."""
    return float(np.linalg.norm(X) * math.sqrt(N * math.cosh(4 * r) / 2))
