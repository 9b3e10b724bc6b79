"""Random-basis encryption of classical bits, its homomorphic gates, and
numerical security scans.

A key is an angle pair (theta, phi) with phi restricted to ±pi/2; encrypting a
bit places it on the corresponding element of the keyed basis. NOT and
cleartext-controlled NOTs act homomorphically on such ciphertexts (up to
global phase); Hadamard does not, which ``hadamard_probe`` quantifies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import qcore
from .qcore import (
    CNOT,
    D_GATE,
    HADAMARD,
    OrthonormalBasis,
    StateVector,
    Unitary,
    X,
    basis_from_angles,
    computational_state,
    tensor,
)
from .seeding import chunk_layout, derive_rng

HALF_PI = math.pi / 2.0
TWO_PI = 2.0 * math.pi
MAX_CONTROLS = 4


@dataclass(frozen=True)
class RbeKey:
    """Secret angle pair; phi must be exactly +pi/2 or -pi/2."""

    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= TWO_PI:
            raise ValueError(f"theta must lie in [0, 2pi], got {self.theta}")
        if self.phi not in (HALF_PI, -HALF_PI):
            raise ValueError(f"phi must be +pi/2 or -pi/2, got {self.phi}")

    def basis(self) -> OrthonormalBasis:
        mat = self.matrix
        return OrthonormalBasis(
            theta=self.theta, phi=self.phi, psi0=mat[:, 0], psi1=mat[:, 1]
        )

    @property
    def matrix(self) -> np.ndarray:
        """Encryption gate: columns are the keyed basis elements.

        Built directly: phi is exactly ±pi/2, so the phase factor is exactly
        ±i (no sin/cos rounding dust on the real part).
        """
        c, s = math.cos(self.theta / 2.0), math.sin(self.theta / 2.0)
        e = 1j if self.phi > 0 else -1j
        return np.array([[c, s], [e * s, -e * c]], dtype=complex)


@dataclass(frozen=True)
class KeySpace:
    """Key distribution: theta continuous on [0, 2pi) or drawn from {2pi n/N}."""

    mode: str = "continuous"
    n: int | None = None

    def __post_init__(self):
        if self.mode not in ("continuous", "discrete"):
            raise ValueError(f"mode must be 'continuous' or 'discrete', got {self.mode!r}")
        if self.mode == "discrete":
            if not self.n or self.n < 1:
                raise ValueError("discrete mode needs a positive N")
        elif self.n is not None:
            raise ValueError("continuous mode takes no N")

    def thetas(self) -> np.ndarray:
        """The discrete theta grid {2pi n/N : n = 1..N}."""
        if self.mode != "discrete":
            raise ValueError("theta grid only exists in discrete mode")
        return TWO_PI * np.arange(1, self.n + 1) / self.n

    def keys(self) -> Iterator[RbeKey]:
        """All keys of a discrete space (theta grid x both phi values)."""
        for theta in self.thetas():
            for phi in (HALF_PI, -HALF_PI):
                yield RbeKey(float(theta), phi)

    def sample_thetas(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.mode == "continuous":
            return rng.uniform(0.0, TWO_PI, size=count)
        return TWO_PI * rng.integers(1, self.n + 1, size=count) / self.n


CONTINUOUS = KeySpace("continuous")
# Default experiment grid; dense enough that discretization is invisible at our
# trial counts.
DEFAULT_DISCRETE = KeySpace("discrete", 4096)


def gen(space: KeySpace, rng: np.random.Generator) -> RbeKey:
    """Draw a uniform key from the configured space."""
    theta = float(space.sample_thetas(1, rng)[0])
    phi = HALF_PI if rng.random() < 0.5 else -HALF_PI
    return RbeKey(theta, phi)


@dataclass(frozen=True)
class Ciphertext:
    """A single encrypted bit: one qubit on the keyed basis."""

    qubit: StateVector

    def __post_init__(self):
        if self.qubit.num_qubits != 1:
            raise ValueError("ciphertext must be a single qubit")


def enc(bit: int, key: RbeKey) -> Ciphertext:
    """Encrypt: column `bit` of the key matrix, exactly (no phase cleanup)."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    return Ciphertext(StateVector(key.matrix[:, bit]))


def decrypt_probabilities(c: Ciphertext, key: RbeKey) -> np.ndarray:
    """Exact outcome distribution of dec(): |K† q|^2 componentwise."""
    coords = key.matrix.conj().T @ c.qubit.amplitudes
    return np.abs(coords) ** 2


def dec(c: Ciphertext, key: RbeKey, rng: np.random.Generator) -> int:
    """Apply the inverse key gate and measure in the computational basis."""
    rotated = qcore.apply(c.qubit, Unitary(key.matrix.conj().T), [0])
    outcome, _ = qcore.measure_in_basis(rotated, 0, qcore.COMPUTATIONAL, rng)
    return outcome


def eval_not(c: Ciphertext) -> Ciphertext:
    """Homomorphic NOT: X maps each basis element to the other, up to ±i."""
    return Ciphertext(qcore.apply(c.qubit, X, [0]))


def eval_d(c: Ciphertext) -> StateVector:
    """Server-side balanced superposition via a fresh |0> ancilla.

    Prepends |0>, applies Hadamard-on-ancilla then CNOT. Measuring the
    ciphertext wire in the key basis afterwards yields 0/1 with probability
    1/2 each, which Hadamard alone cannot achieve on a keyed basis.
    """
    joint = tensor(qcore.zero_state(1), c.qubit)
    return qcore.apply(joint, D_GATE, [0, 1])


def eval_cnot(control_bit: int, c: Ciphertext) -> StateVector:
    """CNOT with a cleartext computational control and ciphertext target."""
    if control_bit not in (0, 1):
        raise ValueError(f"control bit must be 0 or 1, got {control_bit}")
    joint = tensor(computational_state([control_bit]), c.qubit)
    return qcore.apply(joint, CNOT, [0, 1])


def eval_cn_not(control_bits: list[int], c: Ciphertext) -> StateVector:
    """C^nNOT with cleartext controls; flips the ciphertext iff all are 1."""
    if any(b not in (0, 1) for b in control_bits):
        raise ValueError(f"control bits must be 0/1, got {control_bits}")
    n = len(control_bits)
    if n > MAX_CONTROLS:
        raise ValueError(f"at most {MAX_CONTROLS} controls supported, got {n}")
    if n == 0:
        return eval_not(c).qubit
    state = tensor(computational_state(control_bits), c.qubit)
    return qcore.apply(state, qcore.controlled_not(n), list(range(n + 1)))


def hadamard_probe(key: RbeKey) -> float:
    """P(outcome 0) when H applied to enc(0) is measured in the key basis.

    Computed from raw amplitudes; equals cos(theta)^2 / 2, so H is not
    homomorphic except where that happens to be 1/2.
    """
    basis = key.basis()
    rotated = HADAMARD.matrix @ basis.psi0
    return float(abs(np.vdot(basis.psi0, rotated)) ** 2)


@dataclass(frozen=True)
class NoGoCheck:
    """One requirement a keyed-control CNOT analogue would have to satisfy."""

    theta: float
    phi: float
    input_label: str
    required_label: str
    input_state: StateVector
    required_state: StateVector
    fidelity: float
    satisfied: bool


@dataclass(frozen=True)
class NoGoReport:
    checks: tuple[NoGoCheck, ...]
    conflict_note: str = field(
        default=(
            "the two key settings jointly require P|00> = |00> and P|00> = |01>, "
            "so no unitary satisfies all four checks"
        )
    )

    @property
    def violated(self) -> tuple[NoGoCheck, ...]:
        return tuple(ch for ch in self.checks if not ch.satisfied)

    @property
    def consistent(self) -> bool:
        return not self.violated


def cnot_no_go_witness(candidate: Unitary, tol: float = qcore.PHASE_TOL) -> NoGoReport:
    """Test a candidate two-qubit gate against the decisive key settings.

    A gate keeping the control-target structure on every keyed basis would
    have to fix |psi0 psi0> and send |psi1 psi1> to |psi1 psi0> for all keys;
    the settings (theta, phi) = (0, pi) and (pi, 0) already make that
    impossible, and the report pinpoints which requirement the candidate
    breaks.
    """
    if candidate.dim != 4:
        raise ValueError("candidate must act on two qubits")
    checks = []
    for theta, phi in ((0.0, math.pi), (math.pi, 0.0)):
        basis = basis_from_angles(theta, phi)
        psi0 = StateVector(basis.psi0)
        psi1 = StateVector(basis.psi1)
        cases = (
            ("psi0 psi0", tensor(psi0, psi0), "psi0 psi0", tensor(psi0, psi0)),
            ("psi1 psi1", tensor(psi1, psi1), "psi1 psi0", tensor(psi1, psi0)),
        )
        for in_label, in_state, out_label, out_state in cases:
            image = qcore.apply(in_state, candidate, [0, 1])
            fidelity = float(abs(np.vdot(out_state.amplitudes, image.amplitudes)) ** 2)
            checks.append(
                NoGoCheck(
                    theta=theta,
                    phi=phi,
                    input_label=in_label,
                    required_label=out_label,
                    input_state=in_state,
                    required_state=out_state,
                    fidelity=fidelity,
                    satisfied=fidelity >= 1.0 - tol,
                )
            )
    return NoGoReport(checks=tuple(checks))


def zero_outcome_closed_form(theta: float, phi: float, theta0: float, phi0: float) -> float:
    """P(outcome 0) when enc(0) under key (theta, phi) is measured in the
    (theta0, phi0) basis, via the trig identity rather than inner products."""
    return 0.5 * (
        math.cos((theta + theta0) / 2.0) ** 2
        + math.cos((theta - theta0) / 2.0) ** 2
        + math.sin(theta) * math.sin(theta0) * math.cos(phi - phi0)
    )


@dataclass(frozen=True)
class AdversaryScan:
    """Monte Carlo estimate of an eavesdropper's outcome statistics."""

    p0_given_enc0: float
    p0_given_enc1: float
    trials: int
    standard_error: float


def scan_adversary_outcomes(
    adversary_basis: OrthonormalBasis,
    space: KeySpace,
    trials: int,
    seed: int,
    workers: int = 1,
) -> AdversaryScan:
    """Measure enc(0) and enc(1) in a fixed adversary basis over random keys.

    The probability per trial is computed from raw inner products (not the
    closed form), then sampled. Chunked streams keep the result identical for
    any worker count.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    v0 = adversary_basis.psi0.conj()

    def run_chunk(args: tuple[int, int]) -> tuple[int, int]:
        idx, count = args
        rng = derive_rng(seed, "adversary-scan", idx)
        thetas = space.sample_thetas(count, rng)
        phis = np.where(rng.random(count) < 0.5, HALF_PI, -HALF_PI)
        half = thetas / 2.0
        e = np.exp(1j * phis)
        # enc(0) and enc(1) amplitudes for every trial
        amp0 = v0[0] * np.cos(half) + v0[1] * e * np.sin(half)
        amp1 = v0[0] * np.sin(half) - v0[1] * e * np.cos(half)
        zeros0 = int((rng.random(count) < np.abs(amp0) ** 2).sum())
        zeros1 = int((rng.random(count) < np.abs(amp1) ** 2).sum())
        return zeros0, zeros1

    chunks = chunk_layout(trials)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_chunk, chunks))
    else:
        results = [run_chunk(ch) for ch in chunks]
    zeros0 = sum(r[0] for r in results)
    zeros1 = sum(r[1] for r in results)
    p0, p1 = zeros0 / trials, zeros1 / trials
    stderr = math.sqrt(0.25 / trials)  # binomial sigma at p = 1/2
    return AdversaryScan(p0, p1, trials, stderr)


def _grid_space(space: KeySpace, resolution: int | None) -> KeySpace:
    if space.mode == "discrete":
        return space
    if resolution is None or resolution < 3:
        raise ValueError("continuous mode integrates on a grid; resolution must be >= 3")
    return KeySpace("discrete", resolution)


def enc_average_density(
    bit: int, space: KeySpace, resolution: int | None = None
) -> qcore.DensityMatrix:
    """Key-averaged density of enc(bit); exact sum over the (grid) key space."""
    grid = _grid_space(space, resolution)
    acc = np.zeros((2, 2), dtype=complex)
    count = 0
    for key in grid.keys():
        amps = enc(bit, key).qubit.amplitudes
        acc += np.outer(amps, amps.conj())
        count += 1
    return qcore.DensityMatrix(acc / count)


def density_gap(space: KeySpace, resolution: int | None = None) -> float:
    """Trace distance between the averaged enc(0) and enc(1) densities."""
    rho0 = enc_average_density(0, space, resolution)
    rho1 = enc_average_density(1, space, resolution)
    return qcore.trace_distance(rho0, rho1)
