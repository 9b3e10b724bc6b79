"""Securing-entanglement experiments.

Covers locking EPR halves with a Pauli one-time pad or with random-basis
keys, theft/recovery odds against key-guessing thieves, secure sharing of a
pair over an interceptable channel, and the 3x3 parity game as the utility
yardstick for a (possibly locked) entangled resource.

Conventions: the two-qubit pair orders Alice's qubit first; the four-qubit
game resource orders qubits (Alice1, Alice2, Bob1, Bob2) and is the tensor
product of two antisymmetric pairs across the Alice/Bob cut.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from . import qcore
from .qcore import DensityMatrix, StateVector, Unitary
from .rbe import CONTINUOUS, KeySpace, RbeKey, gen
from .seeding import derive_rng

_EPR = np.array([1.0, 0.0, 0.0, 1.0], dtype=complex) / math.sqrt(2.0)


@dataclass(frozen=True)
class EprPair:
    state: StateVector

    def __post_init__(self):
        if self.state.num_qubits != 2:
            raise ValueError("an EPR pair holds exactly two qubits")


def epr_pair() -> EprPair:
    """(|00> + |11>)/sqrt(2)."""
    return EprPair(StateVector(_EPR))


def fidelity_with_epr(state: StateVector) -> float:
    if state.num_qubits != 2:
        raise ValueError("fidelity_with_epr expects two qubits")
    return float(abs(np.vdot(_EPR, state.amplitudes)) ** 2)


@dataclass(frozen=True)
class QotpKey:
    """One party's pad: X applied if x_bit, then Z if z_bit."""

    x_bit: int
    z_bit: int

    def __post_init__(self):
        if self.x_bit not in (0, 1) or self.z_bit not in (0, 1):
            raise ValueError("pad entries must be bits")

    @property
    def matrix(self) -> np.ndarray:
        mat = np.eye(2, dtype=complex)
        if self.z_bit:
            mat = qcore.Z.matrix @ mat
        if self.x_bit:
            mat = qcore.X.matrix @ mat
        return mat


def _lock_with(pair: EprPair, mat_a: np.ndarray, mat_b: np.ndarray) -> EprPair:
    state = qcore.apply(pair.state, Unitary(mat_a), [0])
    state = qcore.apply(state, Unitary(mat_b), [1])
    return EprPair(state)


def qotp_lock(pair: EprPair, alice_key: QotpKey, bob_key: QotpKey) -> EprPair:
    return _lock_with(pair, alice_key.matrix, bob_key.matrix)


def qotp_unlock(pair: EprPair, alice_key: QotpKey, bob_key: QotpKey) -> EprPair:
    return _lock_with(pair, alice_key.matrix.conj().T, bob_key.matrix.conj().T)


def rbe_lock(pair: EprPair, key_a: RbeKey, key_b: RbeKey) -> EprPair:
    return _lock_with(pair, key_a.matrix, key_b.matrix)


def rbe_unlock(pair: EprPair, key_a: RbeKey, key_b: RbeKey) -> EprPair:
    return _lock_with(pair, key_a.matrix.conj().T, key_b.matrix.conj().T)


def all_qotp_keys() -> list[QotpKey]:
    return [QotpKey(x, z) for x in (0, 1) for z in (0, 1)]


def qotp_average_density() -> DensityMatrix:
    """Exact average of the locked pair over all 16 key pairs."""
    acc = np.zeros((4, 4), dtype=complex)
    fresh = epr_pair()
    for ka in all_qotp_keys():
        for kb in all_qotp_keys():
            amps = qotp_lock(fresh, ka, kb).state.amplitudes
            acc += np.outer(amps, amps.conj()) / 16.0
    return DensityMatrix(acc)


def rbe_average_density(space: KeySpace) -> DensityMatrix:
    """Exact average of the locked pair over a discrete key grid.

    The two sides are independent, so the double average is taken as two
    sequential single-side averages (linear maps commute with the mean).
    """
    if space.mode != "discrete":
        raise ValueError("exact averaging needs a discrete key space")
    rho = np.outer(_EPR, _EPR.conj())
    for side in (0, 1):
        acc = np.zeros((4, 4), dtype=complex)
        count = 0
        for key in space.keys():
            k = key.matrix
            full = np.kron(k, np.eye(2)) if side == 0 else np.kron(np.eye(2), k)
            acc += full @ rho @ full.conj().T
            count += 1
        rho = acc / count
    return DensityMatrix(rho)


# ---------------------------------------------------------------------------
# theft and recovery


@dataclass(frozen=True)
class TheftRecoveryResult:
    scheme: str
    trials: int
    successes: int
    empirical_rate: float
    exact_rate: float | None  # brute-force enumeration over (key, guess) pairs
    exact_key_guess_rate: float  # chance of naming the key itself
    threshold: float
    standard_error: float


def qotp_theft_oracle(threshold: float) -> float:
    """Recovery rate over all 16 x 16 (key pair, guess pair) combinations."""
    fresh = epr_pair()
    hits = 0
    keys = all_qotp_keys()
    for ka, kb in product(keys, keys):
        locked = qotp_lock(fresh, ka, kb)
        for ga, gb in product(keys, keys):
            recovered = qotp_unlock(locked, ga, gb)
            hits += fidelity_with_epr(recovered.state) >= threshold
    return hits / 16.0**2


def rbe_theft_oracle(space: KeySpace, threshold: float) -> float:
    """Recovery rate over all (key pair, guess pair) combinations on a grid.

    Uses the identity <00+11|(A ⊗ B)|00+11>/2 = Tr(A B^T)/2 to stay cheap.
    """
    if space.mode != "discrete":
        raise ValueError("the oracle enumerates a discrete key space")
    mats = np.stack([key.matrix for key in space.keys()])  # (K, 2, 2)
    # residual per (key, guess) on one side: guess† @ key
    residual = np.einsum("gji,kjl->kgil", mats.conj(), mats)  # (K, G, 2, 2)
    k = mats.shape[0]
    flat = residual.reshape(k * k, 2, 2)
    # fidelity over both sides: |Tr(A B^T)|^2 / 4
    traces = np.einsum("ail,bli->ab", flat, np.transpose(flat, (0, 2, 1)))
    fidelity = np.abs(traces) ** 2 / 4.0
    return float((fidelity >= threshold).mean())


def theft_recovery_experiment(
    scheme: str,
    trials: int,
    seed: int,
    threshold: float = 1.0 - 1e-9,
    key_space: KeySpace | None = None,
    guess_space: KeySpace | None = None,
) -> TheftRecoveryResult:
    """Lock with random keys, let thieves guess keys, score fidelity recovery.

    For "qotp" the guess space is the full 16-element pad space. For "rbe"
    the keys come from `key_space` (default continuous) and the guesses from
    `guess_space` (default a 64-point grid); the exact enumeration rate is
    available when both live on the same discrete grid.
    """
    if scheme not in ("qotp", "rbe"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = derive_rng(seed, "theft", scheme)
    # lock-then-guessed-unlock acts as (G_a† K_a) ⊗ (G_b† K_b); on the pair,
    # written as a 2x2 amplitude matrix P, that is A P B^T
    pair_matrix = _EPR.reshape(2, 2)

    def recovered_fidelity(res_a: np.ndarray, res_b: np.ndarray) -> float:
        out = res_a @ pair_matrix @ res_b.T
        return float(abs(np.vdot(_EPR, out.reshape(-1))) ** 2)

    successes = 0
    if scheme == "qotp":
        mats = [k.matrix for k in all_qotp_keys()]
        for _ in range(trials):
            ka, kb = mats[rng.integers(4)], mats[rng.integers(4)]
            ga, gb = mats[rng.integers(4)], mats[rng.integers(4)]
            fid = recovered_fidelity(ga.conj().T @ ka, gb.conj().T @ kb)
            successes += fid >= threshold
        exact = qotp_theft_oracle(threshold)
        key_guess = 1.0 / 16.0
    else:
        key_space = key_space or CONTINUOUS
        guess_space = guess_space or KeySpace("discrete", 64)
        for _ in range(trials):
            ka, kb = gen(key_space, rng).matrix, gen(key_space, rng).matrix
            ga, gb = gen(guess_space, rng).matrix, gen(guess_space, rng).matrix
            fid = recovered_fidelity(ga.conj().T @ ka, gb.conj().T @ kb)
            successes += fid >= threshold
        same_grid = (
            key_space.mode == "discrete"
            and guess_space.mode == "discrete"
            and key_space.n == guess_space.n
        )
        exact = rbe_theft_oracle(key_space, threshold) if same_grid else None
        if key_space.mode == "discrete":
            key_guess = 1.0 / (2 * key_space.n) ** 2
        else:
            key_guess = 0.0  # continuous keys: exact match has measure zero
    rate = successes / trials
    return TheftRecoveryResult(
        scheme=scheme,
        trials=trials,
        successes=successes,
        empirical_rate=rate,
        exact_rate=exact,
        exact_key_guess_rate=key_guess,
        threshold=threshold,
        standard_error=math.sqrt(max(rate * (1.0 - rate), 1e-12) / trials),
    )


# ---------------------------------------------------------------------------
# the 3x3 parity game

_P = {"I": np.eye(2, dtype=complex), "X": qcore.X.matrix, "Y": qcore.Y.matrix, "Z": qcore.Z.matrix}


def _obs(first: str, second: str, sign: float = 1.0) -> np.ndarray:
    return sign * np.kron(_P[first], _P[second])


# Alice's row observables: every row multiplies to +I and entries commute.
ALICE_OBSERVABLES = (
    (_obs("I", "Z"), _obs("Z", "I"), _obs("Z", "Z")),
    (_obs("X", "I"), _obs("I", "X"), _obs("X", "X")),
    (_obs("X", "Z", -1.0), _obs("Z", "X", -1.0), _obs("Y", "Y")),
)
# Bob's column observables: every column multiplies to -I, and each aligned
# pair (Alice's (i,j), Bob's (i,j)) has the shared resource as a +1
# eigenstate, which is what forces the intersection bits to agree.
BOB_OBSERVABLES = (
    (_obs("I", "Z", -1.0), _obs("Z", "I", -1.0), _obs("Z", "Z")),
    (_obs("X", "I", -1.0), _obs("I", "X", -1.0), _obs("X", "X")),
    (_obs("X", "Z", -1.0), _obs("Z", "X", -1.0), _obs("Y", "Y")),
)

_RESOURCE = np.zeros(16, dtype=complex)
_RESOURCE[0b0011] = 0.5
_RESOURCE[0b0110] = -0.5
_RESOURCE[0b1001] = -0.5
_RESOURCE[0b1100] = 0.5


@dataclass(frozen=True)
class FourQubitResource:
    """The shared game state: two antisymmetric pairs across the A/B cut."""

    state: StateVector

    def __post_init__(self):
        if self.state.num_qubits != 4:
            raise ValueError("the game resource holds four qubits")


def magic_square_resource() -> FourQubitResource:
    state = StateVector(_RESOURCE)
    if np.abs(state.amplitudes - _RESOURCE).max() > qcore.NORM_ATOL:
        raise AssertionError("resource amplitudes drifted")
    return FourQubitResource(state)


@dataclass(frozen=True)
class MagicSquareInstance:
    i: int  # row given to Alice, 1..3
    j: int  # column given to Bob, 1..3
    alice_row: tuple[int, int, int]
    bob_col: tuple[int, int, int]
    win: bool

    def __post_init__(self):
        if not (1 <= self.i <= 3 and 1 <= self.j <= 3):
            raise ValueError("inputs must lie in 1..3")
        if sum(self.alice_row) % 2 != 0:
            raise ValueError("Alice's row must have even parity")
        if sum(self.bob_col) % 2 != 1:
            raise ValueError("Bob's column must have odd parity")
        if self.win != (self.alice_row[self.j - 1] == self.bob_col[self.i - 1]):
            raise ValueError("win flag inconsistent with the intersection")


# eigenvalue +1 projectors of every lifted observable, built once
_ALICE_PLUS = tuple(
    tuple(0.5 * (np.eye(16) + np.kron(obs, np.eye(4))) for obs in row)
    for row in ALICE_OBSERVABLES
)
_BOB_PLUS = tuple(
    tuple(0.5 * (np.eye(16) + np.kron(np.eye(4), obs)) for obs in row)
    for row in BOB_OBSERVABLES
)


def _measure_plus(amps: np.ndarray, plus: np.ndarray, rng: np.random.Generator):
    """Projective +-1 measurement; bit 0 means eigenvalue +1."""
    projected = plus @ amps
    p_plus = float(np.vdot(projected, projected).real)
    if rng.random() < p_plus:
        return 0, projected / math.sqrt(p_plus)
    rest = amps - projected
    return 1, rest / np.linalg.norm(rest)


def _play_on_state(
    state: StateVector, i: int, j: int, rng: np.random.Generator
) -> MagicSquareInstance:
    for value in (i, j):
        if not 1 <= value <= 3:
            raise ValueError("inputs must lie in 1..3")
    amps = state.amplitudes
    alice_bits = []
    for col in range(3):
        bit, amps = _measure_plus(amps, _ALICE_PLUS[i - 1][col], rng)
        alice_bits.append(bit)
    bob_bits = []
    for row in range(3):
        bit, amps = _measure_plus(amps, _BOB_PLUS[row][j - 1], rng)
        bob_bits.append(bit)
    return MagicSquareInstance(
        i=i,
        j=j,
        alice_row=tuple(alice_bits),
        bob_col=tuple(bob_bits),
        win=alice_bits[j - 1] == bob_bits[i - 1],
    )


def magic_square_play(
    resource: FourQubitResource, i: int, j: int, rng: np.random.Generator
) -> MagicSquareInstance:
    """One round of the parity game with the commuting-observable strategy."""
    return _play_on_state(resource.state, i, j, rng)


@dataclass(frozen=True)
class ClassicalBound:
    max_wins: int
    total_inputs: int
    strategy_pairs: int
    perfect_strategies: int

    @property
    def probability(self) -> float:
        return self.max_wins / self.total_inputs


def magic_square_classical_bound() -> ClassicalBound:
    """Exhaustive maximum over deterministic strategies (uniform inputs).

    Each player picks one parity-respecting filling per input: 4 choices per
    input, 4^3 strategies per player, 4096 pairs scored on all 9 inputs.
    """
    even = [r for r in product((0, 1), repeat=3) if sum(r) % 2 == 0]
    odd = [r for r in product((0, 1), repeat=3) if sum(r) % 2 == 1]
    best = 0
    perfect = 0
    for alice in product(range(4), repeat=3):
        for bob in product(range(4), repeat=3):
            wins = sum(
                even[alice[i]][j] == odd[bob[j]][i] for i in range(3) for j in range(3)
            )
            best = max(best, wins)
            perfect += wins == 9
    return ClassicalBound(
        max_wins=best, total_inputs=9, strategy_pairs=4096, perfect_strategies=perfect
    )


@dataclass(frozen=True)
class UtilityReport:
    lock: str
    plays: int
    wins: int
    win_rate: float
    standard_error: float


LOCK_KINDS = ("none", "qotp_unknown_keys", "rbe_unknown_keys")


def locked_resource_utility(
    lock: str,
    plays: int,
    seed: int,
    key_space: KeySpace | None = None,
    unlock_correctly: bool = False,
    lock_sides: str = "both",
) -> UtilityReport:
    """Win rate when the resource was locked with keys the players ignore.

    Fresh keys per play (applied to Bob's qubits, or to all four with
    lock_sides="both"); the players run the standard strategy as if nothing
    happened. With `unlock_correctly` the inverses are applied first, which
    restores the unlocked baseline.
    """
    if lock not in LOCK_KINDS:
        raise ValueError(f"unknown lock {lock!r}")
    if lock_sides not in ("both", "bob"):
        raise ValueError(f"lock_sides must be 'both' or 'bob', got {lock_sides!r}")
    if plays < 1:
        raise ValueError("plays must be >= 1")
    space = key_space or CONTINUOUS
    rng = derive_rng(seed, "utility", lock, lock_sides)
    qubits = (0, 1, 2, 3) if lock_sides == "both" else (2, 3)
    wins = 0
    for _ in range(plays):
        i, j = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        state = magic_square_resource().state
        if lock != "none":
            mats = []
            for _q in qubits:
                if lock == "qotp_unknown_keys":
                    mats.append(QotpKey(int(rng.integers(2)), int(rng.integers(2))).matrix)
                else:
                    mats.append(gen(space, rng).matrix)
            for q, mat in zip(qubits, mats):
                state = qcore.apply(state, Unitary(mat), [q])
            if unlock_correctly:
                for q, mat in zip(qubits, mats):
                    state = qcore.apply(state, Unitary(mat.conj().T), [q])
        wins += _play_on_state(state, i, j, rng).win
    rate = wins / plays
    return UtilityReport(
        lock=lock,
        plays=plays,
        wins=wins,
        win_rate=rate,
        standard_error=math.sqrt(max(rate * (1.0 - rate), 1e-12) / plays),
    )


# ---------------------------------------------------------------------------
# secure transmission of a self-generated pair


@dataclass(frozen=True)
class SharingReport:
    eve_intercepts: bool
    key_leaked: bool
    fidelity: float
    eve_marginal_gap: float | None  # trace distance of Eve's key-averaged qubit from I/2
    utility: UtilityReport | None


def _eve_marginal_gap(space: KeySpace) -> float:
    """Average over the grid of Eve's held (encrypted) qubit vs I/2."""
    acc = np.zeros((2, 2), dtype=complex)
    count = 0
    fresh = epr_pair().state
    for key in space.keys():
        locked = qcore.apply(fresh, Unitary(key.matrix), [1])
        rho = np.outer(locked.amplitudes, locked.amplitudes.conj()).reshape(2, 2, 2, 2)
        acc += np.trace(rho, axis1=0, axis2=2)  # trace out Alice's qubit
        count += 1
    gap = qcore.trace_distance(
        DensityMatrix(acc / count), DensityMatrix(np.eye(2) / 2.0)
    )
    return gap


def secure_epr_sharing(
    eve_intercepts: bool,
    seed: int,
    key_space: KeySpace | None = None,
    leak_key: bool = False,
    utility_plays: int = 0,
) -> SharingReport:
    """Simulate the four-step flow: generate, encrypt halves, transmit one,
    reveal its key over the secure channel, decrypt.

    If Eve intercepts the transit qubit she takes Bob's place without the
    key; her half stays encrypted, its key-averaged state is maximally mixed,
    and (optionally probed) her game utility collapses to chance, below the
    classical bound. Leaking the key is the negative control.
    """
    space = key_space or KeySpace("discrete", 256)
    rng = derive_rng(seed, "sharing", int(eve_intercepts), int(leak_key))
    key_a, key_b = gen(space, rng), gen(space, rng)
    state = rbe_lock(epr_pair(), key_a, key_b).state
    # Alice always decrypts her own half
    state = qcore.apply(state, Unitary(key_a.matrix.conj().T), [0])
    receiver_knows_key = (not eve_intercepts) or leak_key
    if receiver_knows_key:
        state = qcore.apply(state, Unitary(key_b.matrix.conj().T), [1])
    fidelity = fidelity_with_epr(state)
    gap = None
    utility = None
    if eve_intercepts and not leak_key:
        gap = _eve_marginal_gap(space)
        if utility_plays:
            utility = locked_resource_utility(
                "rbe_unknown_keys",
                utility_plays,
                seed,
                key_space=space,
                lock_sides="bob",
            )
    return SharingReport(
        eve_intercepts=eve_intercepts,
        key_leaked=leak_key,
        fidelity=fidelity,
        eve_marginal_gap=gap,
        utility=utility,
    )
