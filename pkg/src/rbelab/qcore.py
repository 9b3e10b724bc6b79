"""Exact dense statevector kernels for 1..8 qubits.

Conventions used across the package:

- Amplitude index i is read as the big-endian bit string of the qubit list,
  so qubit 0 is the most significant bit. ``tensor(a, b)`` puts ``a`` on the
  high-order side.
- All values are immutable after construction; every operation is a pure
  function returning new values.
- Equality is always tolerance-based. Amplitude math uses ``NORM_ATOL``
  (1e-12), unitarity checks use ``UNITARY_ATOL`` (1e-10).
- Measurement is projection + renormalization in the requested basis;
  measuring the same qubit twice in the same basis repeats the outcome.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 8
NORM_ATOL = 1e-12
UNITARY_ATOL = 1e-10
PHASE_TOL = 1e-10
ENSEMBLE_WEIGHT_ATOL = 1e-9


class StateVector:
    """Normalized complex amplitude vector over ``num_qubits`` qubits."""

    __slots__ = ("amplitudes", "num_qubits")

    def __init__(self, amplitudes: Sequence[complex] | np.ndarray):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1).copy()
        n = amps.size.bit_length() - 1
        if amps.size < 2 or amps.size != 1 << n:
            raise ValueError(f"amplitude count must be a power of two >= 2, got {amps.size}")
        if n > MAX_QUBITS:
            raise ValueError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit capacity")
        if not np.all(np.isfinite(amps.view(float))):
            raise ValueError("amplitudes must be finite")
        norm_sq = float(np.vdot(amps, amps).real)
        if abs(norm_sq - 1.0) > 1e-9:
            raise ValueError(f"state norm^2 = {norm_sq!r}, not a unit vector")
        # keep the invariant |norm-1| < NORM_ATOL exactly, absorbing fp drift
        amps /= math.sqrt(norm_sq)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "num_qubits", n)

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("StateVector is immutable")

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __repr__(self) -> str:
        terms = [
            f"({a:.4g})|{i:0{self.num_qubits}b}>"
            for i, a in enumerate(self.amplitudes)
            if abs(a) > 1e-9
        ]
        return " + ".join(terms) if terms else "0"


def computational_state(bits: str | Sequence[int]) -> StateVector:
    """|b1 b2 ... bn> for a bit string like "01" or [0, 1]."""
    values = [int(b) for b in bits]
    if not values or any(b not in (0, 1) for b in values):
        raise ValueError(f"bits must be a non-empty 0/1 sequence, got {bits!r}")
    index = 0
    for b in values:
        index = (index << 1) | b
    amps = np.zeros(1 << len(values), dtype=complex)
    amps[index] = 1.0
    return StateVector(amps)


def zero_state(num_qubits: int) -> StateVector:
    return computational_state([0] * num_qubits)


def single_qubit(alpha: complex, beta: complex) -> StateVector:
    return StateVector([alpha, beta])


class Unitary:
    """Square matrix validated as unitary (U†U = I within UNITARY_ATOL)."""

    __slots__ = ("matrix", "dim")

    def __init__(self, matrix: Sequence[Sequence[complex]] | np.ndarray):
        mat = np.asarray(matrix, dtype=complex).copy()
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"matrix must be square, got shape {mat.shape}")
        dim = mat.shape[0]
        if dim & (dim - 1) or dim < 2:
            raise ValueError(f"dimension must be a power of two >= 2, got {dim}")
        defect = np.abs(mat.conj().T @ mat - np.eye(dim)).max()
        if defect > UNITARY_ATOL:
            raise ValueError(f"matrix is not unitary (max |U†U - I| = {defect:.3e})")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "dim", dim)

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("Unitary is immutable")

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def dagger(self) -> "Unitary":
        return Unitary(self.matrix.conj().T)


_SQ2 = 1.0 / math.sqrt(2.0)

IDENTITY = Unitary(np.eye(2))
X = Unitary([[0, 1], [1, 0]])
Y = Unitary([[0, -1j], [1j, 0]])
Z = Unitary([[1, 0], [0, -1]])
HADAMARD = Unitary(np.array([[1, 1], [1, -1]]) * _SQ2)
CNOT = Unitary([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
SWAP = Unitary([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]])
# Hadamard on the control then CNOT: sends |00> to a Bell pair and, acting on
# |0>⊗(basis element), to a balanced superposition in that same basis.
D_GATE = Unitary(CNOT.matrix @ np.kron(HADAMARD.matrix, np.eye(2)))
# Exchanges |0>/|1> and |+>/|-> up to global phase (equals -iY).
BASIS_FLIP = Unitary([[0, 1], [-1, 0]])


def controlled_not(num_controls: int) -> Unitary:
    """C^nNOT: identity except the bottom-right 2x2 block is X."""
    if num_controls < 0 or num_controls + 1 > MAX_QUBITS:
        raise ValueError(f"num_controls out of range: {num_controls}")
    dim = 1 << (num_controls + 1)
    mat = np.eye(dim, dtype=complex)
    mat[dim - 2:, dim - 2:] = X.matrix
    return Unitary(mat)


@dataclass(frozen=True)
class OrthonormalBasis:
    """Single-qubit measurement basis {|psi0>, |psi1>} parameterized by (theta, phi).

    psi0 = (cos(theta/2), e^{i phi} sin(theta/2))
    psi1 = (sin(theta/2), -e^{i phi} cos(theta/2))
    """

    theta: float
    phi: float
    psi0: np.ndarray
    psi1: np.ndarray

    def __post_init__(self):
        psi0 = np.array(self.psi0, dtype=complex)
        psi1 = np.array(self.psi1, dtype=complex)
        for v in (psi0, psi1):
            if abs(float(np.vdot(v, v).real) - 1.0) > NORM_ATOL:
                raise ValueError("basis vectors must be unit norm")
        if abs(np.vdot(psi0, psi1)) > NORM_ATOL:
            raise ValueError("basis vectors must be orthogonal")
        psi0.setflags(write=False)
        psi1.setflags(write=False)
        object.__setattr__(self, "psi0", psi0)
        object.__setattr__(self, "psi1", psi1)

    @property
    def matrix(self) -> np.ndarray:
        """Columns are the basis elements (maps computational coords to this basis)."""
        return np.column_stack([self.psi0, self.psi1])

    def to_computational(self) -> Unitary:
        """Unitary whose action expresses a state in this basis's coordinates."""
        return Unitary(self.matrix.conj().T)


def basis_from_angles(theta: float, phi: float) -> OrthonormalBasis:
    if not (math.isfinite(theta) and math.isfinite(phi)):
        raise ValueError(f"angles must be finite, got theta={theta}, phi={phi}")
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    e = complex(math.cos(phi), math.sin(phi))
    psi0 = np.array([c, e * s], dtype=complex)
    psi1 = np.array([s, -e * c], dtype=complex)
    return OrthonormalBasis(theta=theta, phi=phi, psi0=psi0, psi1=psi1)


# theta=0, phi=pi gives the computational vectors; constructed directly so the
# constant is bit-exact rather than carrying sin(pi) rounding.
COMPUTATIONAL = OrthonormalBasis(
    theta=0.0,
    phi=math.pi,
    psi0=np.array([1.0, 0.0], dtype=complex),
    psi1=np.array([0.0, 1.0], dtype=complex),
)
HADAMARD_BASIS = basis_from_angles(math.pi / 2.0, 0.0)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Kronecker product; a's qubits take the high-order positions."""
    if a.num_qubits + b.num_qubits > MAX_QUBITS:
        raise ValueError(
            f"{a.num_qubits}+{b.num_qubits} qubits exceeds the {MAX_QUBITS}-qubit capacity"
        )
    return StateVector(np.kron(a.amplitudes, b.amplitudes))


def apply(state: StateVector, gate: Unitary, targets: Sequence[int]) -> StateVector:
    """Apply `gate` to the listed qubits (first listed = gate's most significant)."""
    targets = list(targets)
    k = len(targets)
    if gate.dim != 1 << k:
        raise ValueError(f"gate dim {gate.dim} does not match {k} target qubit(s)")
    if len(set(targets)) != k:
        raise ValueError(f"duplicate target qubits in {targets}")
    for t in targets:
        if not 0 <= t < state.num_qubits:
            raise ValueError(f"target {t} out of range for {state.num_qubits} qubits")
    n = state.num_qubits
    front = list(range(k))
    psi = state.amplitudes.reshape([2] * n)
    psi = np.moveaxis(psi, targets, front)
    out = gate.matrix @ psi.reshape(1 << k, -1)
    out = np.moveaxis(out.reshape([2] * n), front, targets)
    return StateVector(out.reshape(-1))


def _split_on_qubit(state: StateVector, qubit: int) -> np.ndarray:
    """View amplitudes as (2, rest) with `qubit` on the first axis."""
    n = state.num_qubits
    psi = state.amplitudes.reshape([2] * n)
    return np.moveaxis(psi, qubit, 0).reshape(2, -1)


def project_qubit(
    state: StateVector, qubit: int, bra: np.ndarray
) -> tuple[float, np.ndarray]:
    """Contract <bra| into `qubit`.

    Returns (probability, unnormalized reduced amplitudes with that qubit
    removed). The reduced array is flat over the remaining qubits in order.
    """
    if not 0 <= qubit < state.num_qubits:
        raise ValueError(f"qubit {qubit} out of range")
    block = _split_on_qubit(state, qubit)
    reduced = bra.conj() @ block
    prob = float(np.vdot(reduced, reduced).real)
    return prob, reduced


def measure_in_basis(
    state: StateVector,
    qubit: int,
    basis: OrthonormalBasis,
    rng: np.random.Generator,
) -> tuple[int, StateVector]:
    """Projective measurement of one qubit in `basis`; collapses in place.

    P(0) is the squared norm of the projection onto |psi0> at that qubit; the
    post state keeps the measured qubit, collapsed to the observed element.
    """
    p0, red0 = project_qubit(state, qubit, basis.psi0)
    outcome = 0 if rng.random() < p0 else 1
    if outcome == 0:
        vec, reduced, p = basis.psi0, red0, p0
    else:
        p1, red1 = project_qubit(state, qubit, basis.psi1)
        vec, reduced, p = basis.psi1, red1, p1
    post = np.tensordot(vec, reduced / math.sqrt(p), axes=0)
    n = state.num_qubits
    post = np.moveaxis(post.reshape([2] * n), 0, qubit).reshape(-1)
    return outcome, StateVector(post)


def measure_and_discard(
    state: StateVector, qubit: int, rng: np.random.Generator
) -> tuple[int, StateVector]:
    """Computational-basis measurement of `qubit`, dropping the measured wire."""
    p0, red0 = project_qubit(state, qubit, np.array([1.0, 0.0], dtype=complex))
    outcome = 0 if rng.random() < p0 else 1
    if outcome == 0:
        reduced, p = red0, p0
    else:
        p1, red1 = project_qubit(state, qubit, np.array([0.0, 1.0], dtype=complex))
        reduced, p = red1, p1
    return outcome, StateVector(reduced / math.sqrt(p))


def outcome_distribution(
    state: StateVector, bases: Sequence[OrthonormalBasis]
) -> np.ndarray:
    """Exact probabilities over bit strings when qubit j is measured in bases[j].

    Index i of the result is the big-endian outcome string.
    """
    if len(bases) != state.num_qubits:
        raise ValueError(f"need one basis per qubit ({state.num_qubits}), got {len(bases)}")
    coords = state
    for j, basis in enumerate(bases):
        coords = apply(coords, basis.to_computational(), [j])
    probs = coords.probabilities()
    total = float(probs.sum())
    if abs(total - 1.0) > NORM_ATOL:  # pragma: no cover - guarded by unitarity
        raise AssertionError(f"distribution sums to {total!r}")
    return probs


def equal_up_to_global_phase(
    a: StateVector, b: StateVector, tol: float = PHASE_TOL
) -> bool:
    """True iff |<a|b>| >= 1 - tol."""
    if a.num_qubits != b.num_qubits:
        raise ValueError("states must have the same number of qubits")
    return bool(abs(np.vdot(a.amplitudes, b.amplitudes)) >= 1.0 - tol)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, PSD matrix over a power-of-two dimension."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] & (mat.shape[0] - 1):
            raise ValueError(f"bad density matrix shape {mat.shape}")
        if np.abs(mat - mat.conj().T).max() > NORM_ATOL:
            raise ValueError("density matrix must be Hermitian")
        if abs(np.trace(mat).real - 1.0) > NORM_ATOL:
            raise ValueError(f"trace must be 1, got {np.trace(mat)!r}")
        if np.linalg.eigvalsh(mat).min() < -1e-10:
            raise ValueError("density matrix must be positive semidefinite")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def density_of(state: StateVector) -> DensityMatrix:
    return DensityMatrix(np.outer(state.amplitudes, state.amplitudes.conj()))


def average_density(
    states: Iterable[StateVector], weights: Sequence[float] | None = None
) -> DensityMatrix:
    """Weighted ensemble average; weights default to uniform and must sum to 1."""
    states = list(states)
    if not states:
        raise ValueError("empty ensemble")
    if weights is None:
        weights = [1.0 / len(states)] * len(states)
    if len(weights) != len(states):
        raise ValueError("one weight per state required")
    total = float(sum(weights))
    if abs(total - 1.0) > ENSEMBLE_WEIGHT_ATOL:
        raise ValueError(f"ensemble weights sum to {total!r}, not 1")
    acc = np.zeros((len(states[0].amplitudes),) * 2, dtype=complex)
    for w, s in zip(weights, states):
        acc += w * np.outer(s.amplitudes, s.amplitudes.conj())
    return DensityMatrix(acc)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """Half the sum of |eigenvalues| of a - b."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    eigs = np.linalg.eigvalsh(a.matrix - b.matrix)
    return float(0.5 * np.abs(eigs).sum())


def bloch_coordinates(state: StateVector) -> tuple[float, float, float]:
    """Debug helper: (x, y, z) of a single qubit on the unit sphere."""
    if state.num_qubits != 1:
        raise ValueError("bloch coordinates are defined for one qubit")
    alpha, beta = state.amplitudes
    cross = np.conj(alpha) * beta
    return (2.0 * cross.real, 2.0 * cross.imag, float(abs(alpha) ** 2 - abs(beta) ** 2))
