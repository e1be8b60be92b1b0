"""Local Haar-random beam-splitter circuits on d-dimensional lattices.

Modes sit on a hypercubic lattice of side n = M^{1/d}, indexed in row-major
order (the first axis varies slowest).  The lattice is tiled by N sublattice
cubes of edge L = (M/N)^{1/d}; each holds one source at its centre.

One round applies 2d steps: for each axis in turn, gates on the pairs whose
coordinate along that axis is even, then on those where it is odd.  Gates at
the open boundary are skipped.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .rng import stream

__all__ = [
    "BeamSplitterGate",
    "Circuit",
    "CircuitSpec",
    "DiffusionReport",
    "build_local_haar_circuit",
    "diffusion_check",
    "easy_depth",
    "gate_matrix",
    "mode_distances",
    "width_forecast",
]


def _int_root(value: float, d: int) -> int:
    n = int(round(value ** (1.0 / d)))
    if n < 1 or n ** d != round(value):
        raise ValueError(f"{value} is not a perfect {d}-th power")
    return n


@dataclass(frozen=True)
class CircuitSpec:
    """Lattice layout and circuit parameters.

    Attributes:
        d: Lattice dimension.
        M: Number of modes (a perfect d-th power).
        N: Number of sources (M/N a perfect d-th power, side divisible by L).
        depth: Number of rounds D.
        seed: Seed of the gate-angle stream.
        gamma: Exponent in M = k N^gamma; defaults to log M / log N (k = 1).
        metric: Lattice distance, ``"linf"`` or ``"l1"``.
    """

    d: int
    M: int
    N: int
    depth: int = 0
    seed: int = 0
    gamma: float | None = None
    metric: str = "linf"

    def __post_init__(self):
        if self.d < 1 or self.M < 1 or self.N < 1 or self.depth < 0:
            raise ValueError("invalid circuit specification")
        side = _int_root(self.M, self.d)
        if self.M % self.N:
            raise ValueError("M must be a multiple of N")
        L = _int_root(self.M // self.N, self.d)
        if side % L:
            raise ValueError("sublattice edge must divide the lattice side")
        if self.metric not in ("linf", "l1"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.gamma is None:
            g = math.log(self.M) / math.log(self.N) if self.N > 1 else 1.0
            object.__setattr__(self, "gamma", g)

    @property
    def side(self) -> int:
        return _int_root(self.M, self.d)

    @property
    def L(self) -> int:
        return _int_root(self.M // self.N, self.d)

    @property
    def k(self) -> float:
        return self.M / self.N ** self.gamma

    @property
    def coords(self) -> np.ndarray:
        """Lattice coordinates of every mode (M x d, row-major)."""
        grid = np.indices((self.side,) * self.d).reshape(self.d, -1).T
        return grid

    def index(self, coord) -> int:
        return int(np.ravel_multi_index(tuple(int(c) for c in coord), (self.side,) * self.d))

    @property
    def sources(self) -> tuple:
        """One source per sublattice, at offset floor(L/2) in each direction."""
        per_axis = self.side // self.L
        off = self.L // 2
        out = []
        for cell in itertools.product(range(per_axis), repeat=self.d):
            out.append(self.index([c * self.L + off for c in cell]))
        return tuple(sorted(out))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BeamSplitterGate:
    """Random beam splitter on modes (i, j) with angles in [0, 2 pi)."""

    round: int
    step: int
    i: int
    j: int
    theta: float
    phi0: float
    phi1: float
    phi2: float

    def matrix(self) -> np.ndarray:
        return gate_matrix(self.theta, self.phi0, self.phi1, self.phi2)


def gate_matrix(theta: float, phi0: float, phi1: float, phi2: float) -> np.ndarray:
    """2 x 2 gate acting on rows (i, j) of the circuit matrix.

    [[e^{i phi1} cos t,               e^{i (phi1 + phi0)} sin t],
     [-e^{i (phi2 - phi0)} sin t,     e^{i phi2} cos t        ]]
    """
    c, s = math.cos(theta), math.sin(theta)
    return np.array([
        [np.exp(1j * phi1) * c, np.exp(1j * (phi1 + phi0)) * s],
        [-np.exp(1j * (phi2 - phi0)) * s, np.exp(1j * phi2) * c],
    ])


@dataclass(frozen=True)
class Circuit:
    """A generated circuit: its unitary, gate list and layout."""

    spec: CircuitSpec
    U: np.ndarray
    gates: tuple = field(repr=False)

    @property
    def coords(self) -> np.ndarray:
        return self.spec.coords

    @property
    def sources(self) -> tuple:
        return self.spec.sources

    @property
    def L(self) -> int:
        return self.spec.L

    @property
    def metric(self) -> str:
        return self.spec.metric

    def to_dict(self, with_unitary: bool = False) -> dict:
        data = {
            "spec": self.spec.to_dict(),
            "gates": [asdict(g) for g in self.gates],
        }
        if with_unitary:
            data["U"] = np.stack([self.U.real, self.U.imag], axis=-1).tolist()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        """Rebuild from ``to_dict`` output (the gates define the unitary)."""
        return circuit_from_gates(CircuitSpec(**data["spec"]), data["gates"])


def _step_pairs(spec: CircuitSpec, axis: int, parity: int) -> np.ndarray:
    coords = spec.coords
    stride = spec.side ** (spec.d - 1 - axis)
    sel = (coords[:, axis] % 2 == parity) & (coords[:, axis] + 1 < spec.side)
    i = np.nonzero(sel)[0]
    return np.column_stack([i, i + stride])


def schedule(spec: CircuitSpec) -> list:
    """Mode pairs per (round, step) in application order."""
    steps = [_step_pairs(spec, axis, parity) for axis in range(spec.d) for parity in (0, 1)]
    return [(rnd, s, steps[s]) for rnd in range(spec.depth) for s in range(len(steps))]


def _apply_step(U: np.ndarray, pairs: np.ndarray, angles: np.ndarray) -> None:
    theta, phi0, phi1, phi2 = angles.T
    c, s = np.cos(theta), np.sin(theta)
    g11 = np.exp(1j * phi1) * c
    g12 = np.exp(1j * (phi1 + phi0)) * s
    g21 = -np.exp(1j * (phi2 - phi0)) * s
    g22 = np.exp(1j * phi2) * c
    top, bot = U[pairs[:, 0]], U[pairs[:, 1]]
    U[pairs[:, 0]] = g11[:, None] * top + g12[:, None] * bot
    U[pairs[:, 1]] = g21[:, None] * top + g22[:, None] * bot


def _step_angles(seed: int, rnd: int, step: int, n: int) -> np.ndarray:
    return stream(seed, "gates", rnd, step).uniform(0.0, 2 * math.pi, size=(n, 4))


def build_local_haar_circuit(spec: CircuitSpec, columns=None) -> Circuit:
    """Generate the circuit described by ``spec``.

    Angles of step s in round t come from a stream keyed by (seed, t, s), one
    row of four angles per gate in the step's pair order.

    Args:
        spec: Circuit specification.
        columns: Optional subset of columns to track; the returned matrix then
            has only those columns (useful for large ensembles).

    Returns:
        Circuit with U (M x M, or M x len(columns)) and its gate list.
    """
    cols = np.arange(spec.M) if columns is None else np.asarray(columns, dtype=int)
    U = np.eye(spec.M, dtype=complex)[:, cols]
    gates = []
    for rnd, s, pairs in schedule(spec):
        if len(pairs) == 0:
            continue
        angles = _step_angles(spec.seed, rnd, s, len(pairs))
        _apply_step(U, pairs, angles)
        if columns is None:
            gates.extend(BeamSplitterGate(rnd, s, int(i), int(j), *map(float, a))
                         for (i, j), a in zip(pairs, angles))
    return Circuit(spec, U, tuple(gates))


def circuit_from_gates(spec: CircuitSpec, gates) -> Circuit:
    """Rebuild a circuit from an explicit gate list."""
    U = np.eye(spec.M, dtype=complex)
    gates = tuple(g if isinstance(g, BeamSplitterGate) else BeamSplitterGate(**g) for g in gates)
    for g in gates:
        U[[g.i, g.j]] = g.matrix() @ U[[g.i, g.j]]
    return Circuit(spec, U, gates)


def mode_distances(spec: CircuitSpec, source: int, metric: str | None = None) -> np.ndarray:
    """Lattice distance from ``source`` to every mode."""
    coords = spec.coords
    diff = np.abs(coords - coords[source])
    metric = metric or spec.metric
    return diff.max(axis=1) if metric == "linf" else diff.sum(axis=1)


@dataclass
class DiffusionReport:
    """Ensemble statistics of one source column.

    Attributes:
        depths: Depths at which statistics were recorded.
        mean_profile: Mean |U[j, s]|^2 per depth (rows) and mode (columns).
        displacement_variance: Mean sum_j |U[j, s]|^2 |x_j - x_s|^2 per depth.
        slope: Least-squares slope of the variance against depth.
        r_squared: Coefficient of determination of that fit.
        mean_leakage: Mean leakage past each requested distance, per depth.
        gate_checks: Per-gate (predicted, observed, sigma) triples of the
            averaging identity on the first recorded round.
    """

    depths: np.ndarray
    mean_profile: np.ndarray
    displacement_variance: np.ndarray
    slope: float
    r_squared: float
    mean_leakage: dict
    gate_checks: list


def diffusion_check(spec: CircuitSpec, source: int | None = None, n_circuits: int = 1000,
                    distances=(), gate_check_round: int = 0) -> DiffusionReport:
    """Monte-Carlo statistics of single-source spreading over a circuit ensemble.

    Circuits use seeds spec.seed + 0, 1, ..., n_circuits - 1 and depth
    ``spec.depth``; statistics are recorded after every round.

    Args:
        spec: Template specification (its seed is the first ensemble seed).
        source: Source mode; defaults to the first source of the layout.
        n_circuits: Ensemble size (at least 100).
        distances: Distances l at which the mean leakage is recorded.
        gate_check_round: Round whose individual gates are checked against the
            averaging identity E|U'|^2 = (E|U_k|^2 + E|U_k+1|^2) / 2.

    Returns:
        DiffusionReport.
    """
    if n_circuits < 100:
        raise ValueError("diffusion statistics need at least 100 circuits")
    source = spec.sources[0] if source is None else int(source)
    sched = schedule(spec)
    dist = mode_distances(spec, source)
    disp2 = np.sum((spec.coords - spec.coords[source]) ** 2, axis=1)
    D = spec.depth
    profiles = np.zeros((D + 1, spec.M))
    sq_profiles = np.zeros((D + 1, spec.M))
    variances = np.zeros(D + 1)
    gate_before, gate_after = [], []
    for c in range(n_circuits):
        u = np.zeros((spec.M, 1), dtype=complex)
        u[source, 0] = 1.0
        w = np.abs(u[:, 0]) ** 2
        profiles[0] += w
        for rnd, s, pairs in sched:
            if len(pairs):
                if rnd == gate_check_round and s == 0:
                    gate_before.append(np.abs(u[:, 0]) ** 2)
                _apply_step(u, pairs, _step_angles(spec.seed + c, rnd, s, len(pairs)))
                if rnd == gate_check_round and s == 0:
                    gate_after.append(np.abs(u[:, 0]) ** 2)
            if s == 2 * spec.d - 1:
                w = np.abs(u[:, 0]) ** 2
                profiles[rnd + 1] += w
                sq_profiles[rnd + 1] += w ** 2
                variances[rnd + 1] += w @ disp2
    profiles /= n_circuits
    variances /= n_circuits
    depths = np.arange(D + 1)
    leak = {l: np.array([profiles[t][dist > l].sum() for t in depths]) for l in distances}
    if D >= 1:
        coef = np.polyfit(depths, variances, 1)
        fit = np.polyval(coef, depths)
        ss_res = float(np.sum((variances - fit) ** 2))
        ss_tot = float(np.sum((variances - variances.mean()) ** 2))
        slope, r2 = float(coef[0]), (1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0)
    else:
        slope, r2 = 0.0, 1.0
    checks = []
    if gate_before and D > gate_check_round:
        before = np.array(gate_before)
        after = np.array(gate_after)
        for i, j in _step_pairs(spec, 0, 0):
            pred = (before[:, i] + before[:, j]) / 2
            for mode in (i, j):
                diff = after[:, mode] - pred
                sigma = diff.std(ddof=1) / math.sqrt(len(diff)) if len(diff) > 1 else 0.0
                checks.append((float(pred.mean()), float(after[:, mode].mean()), float(sigma)))
    return DiffusionReport(depths, profiles, variances, slope, r2, leak, checks)


def easy_depth(spec: CircuitSpec, epsilon: float, variant: str = "standard",
               kappa: float = 0.5) -> float:
    """Depth below which photons stay close to their sublattice.

    ``standard``: d k^{2/d} N^{2(gamma - 1)/d - epsilon} / 8.
    ``1d_log``:   k^2 kappa^2 N^{2(gamma - 1) - epsilon} (log N)^2 / 2.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    d, k, g, N = spec.d, spec.k, spec.gamma, spec.N
    if variant == "standard":
        return d * k ** (2 / d) * N ** (2 * (g - 1) / d - epsilon) / 8
    if variant == "1d_log":
        return k ** 2 * kappa ** 2 * N ** (2 * (g - 1) - epsilon) * math.log(N) ** 2 / 2
    raise ValueError(f"unknown variant {variant!r}")


def width_forecast(d: int, N: int, alpha: float) -> float:
    """Order-of-magnitude treewidth N^{alpha/d + (d-1)/d} for kappa ~ N^{alpha/d}."""
    return N ** (alpha / d + (d - 1) / d)
