"""The key-bit guessing game: Eve wins a trial by outputting (e, i) with
a_i = b_i = e.

Two execution modes:

- "full": every trial runs a complete protocol instance through the event-level
  runners. Honest but slow; used for structural checks and cross-validation.
- "conditioned": each trial simulates just the targeted transmission with the
  branch amplitudes evaluated directly (vectorized over trials), with the
  BB84 basis match enforced the way the informed variant would. This reaches
  millions of effective trials cheaply and is cross-checked against "full".

Success is reported conditioned on Eve delivering an output. Because a
disturbed round can leave Alice and Bob holding different bits, the result
also carries ``guess_match_rate`` (Eve's guess against Alice's bit alone) and
``key_agreement_failures``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..rbe import HALF_PI, KeySpace
from ..seeding import chunk_layout, derive_rng
from .eve import EveStrategy
from .runners import run_protocol
from .transcripts import ProtocolConfig

_SQ2 = 1.0 / math.sqrt(2.0)


@dataclass
class _Tally:
    trials: int = 0
    outputs: int = 0
    correct: int = 0
    guess_match: int = 0
    agreement_failures: int = 0
    checked: int = 0
    matched_checked: int = 0
    detected: int = 0
    aborts: int = 0

    def add(self, other: "_Tally") -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))


@dataclass(frozen=True)
class GameResult:
    protocol: str
    attack: str
    epsilon: float
    trials: int
    eve_outputs: int
    eve_correct: int
    guess_matches: int
    key_agreement_failures: int
    checked_targets: int
    detected: int
    aborts: int
    conditional_success: float
    guess_match_rate: float
    detection_rate: float | None
    standard_error: float

    def __post_init__(self):
        if not 0 <= self.eve_correct <= self.eve_outputs <= self.trials:
            raise ValueError("counts must satisfy correct <= outputs <= trials")
        for rate in (self.conditional_success, self.guess_match_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValueError("rates must lie in [0, 1]")
        if self.detection_rate is not None and not 0.0 <= self.detection_rate <= 1.0:
            raise ValueError("rates must lie in [0, 1]")

    @property
    def advantage(self) -> float:
        return abs(self.conditional_success - 0.5)


def _result(protocol: str, eve: EveStrategy, tally: _Tally) -> GameResult:
    outputs = tally.outputs
    success = tally.correct / outputs if outputs else 0.0
    stderr = math.sqrt(success * (1.0 - success) / outputs) if outputs else 0.0
    return GameResult(
        protocol=protocol,
        attack=eve.kind,
        epsilon=eve.epsilon,
        trials=tally.trials,
        eve_outputs=outputs,
        eve_correct=tally.correct,
        guess_matches=tally.guess_match,
        key_agreement_failures=tally.agreement_failures,
        checked_targets=tally.matched_checked,
        detected=tally.detected,
        aborts=tally.aborts,
        conditional_success=success,
        guess_match_rate=tally.guess_match / outputs if outputs else 0.0,
        detection_rate=(tally.detected / tally.matched_checked)
        if tally.matched_checked
        else None,
        standard_error=stderr,
    )


# ---------------------------------------------------------------------------
# full-protocol mode


def _full_game(
    config: ProtocolConfig, eve: EveStrategy, trials: int, seed: int
) -> _Tally:
    tally = _Tally()
    for trial in range(trials):
        rng = derive_rng(seed, "game-full", trial)
        tr = run_protocol(config, eve, rng)
        tally.trials += 1
        tally.aborts += tr.abort
        if tr.eve_output is not None:
            e, i = tr.eve_output
            tally.outputs += 1
            tally.guess_match += tr.alice_key[i] == e
            tally.correct += tr.alice_key[i] == e == tr.bob_key[i]
            tally.agreement_failures += tr.alice_key[i] != tr.bob_key[i]
        if tr.target_checked:
            tally.checked += 1
            if tr.target_basis_matched:
                tally.matched_checked += 1
                tally.detected += bool(tr.target_mismatch)
    return tally


# ---------------------------------------------------------------------------
# conditioned (vectorized) mode; each chunk draws its own Philox stream so the
# result is identical for any worker count


def _wm_couple(q0: np.ndarray, q1: np.ndarray, epsilon: float, u: np.ndarray):
    """Vectorized W(epsilon) coupling of per-trial qubits (q0, q1) to fresh
    ancillas, measuring the ancillas with uniforms `u`.

    Returns (e, r0, r1): ancilla bits and the renormalized residual qubits.
    """
    w = math.sqrt(1.0 - epsilon)
    s = 1j * math.sqrt(epsilon)
    a00 = (w + s) * q0  # |q=0, anc=0|
    a10 = w * q1  # |q=1, anc=0|
    a11 = s * q1  # |q=1, anc=1|
    p1 = np.abs(a11) ** 2
    e = u < p1
    norm0 = np.sqrt(np.maximum(1.0 - p1, 1e-300))
    r0 = np.where(e, 0.0, a00 / norm0)
    r1 = np.where(e, 1.0 + 0.0j, a10 / norm0)
    return e.astype(np.int8), r0, r1


def _hadamard_rows(q0: np.ndarray, q1: np.ndarray):
    return (q0 + q1) * _SQ2, (q0 - q1) * _SQ2


def _bb84_chunk(epsilon: float, check_fraction: float, seed: int, idx: int, count: int) -> _Tally:
    rng = derive_rng(seed, "game-bb84", idx)
    a = rng.integers(2, size=count)
    b = rng.integers(2, size=count)
    # prepared qubit: |b> or (|0> + (-1)^b |1>)/sqrt(2)
    q0 = np.where(a == 1, _SQ2, (b == 0).astype(float)).astype(complex)
    q1 = np.where(a == 1, _SQ2 * np.where(b == 1, -1.0, 1.0), (b == 1).astype(float)).astype(
        complex
    )
    e, q0, q1 = _wm_couple(q0, q1, epsilon, rng.random(count))
    h0, h1 = _hadamard_rows(q0, q1)
    q0 = np.where(a == 1, h0, q0)  # Bob decodes with c = a (conditioned branch)
    q1 = np.where(a == 1, h1, q1)
    x = (rng.random(count) < np.abs(q1) ** 2).astype(np.int8)
    checked = rng.random(count) < check_fraction
    output = ~checked
    bob_ok = x == b
    eve_ok = e == b
    t = _Tally(trials=count)
    t.outputs = int(output.sum())
    t.correct = int((output & bob_ok & eve_ok).sum())
    t.guess_match = int((output & eve_ok).sum())
    t.agreement_failures = int((output & ~bob_ok).sum())
    t.checked = t.matched_checked = int(checked.sum())
    t.detected = int((checked & ~bob_ok).sum())
    t.aborts = t.detected
    return t


def _measure_in_conjugate(q0, q1, basis_bit, u):
    """Outcome of measuring per-trial qubits in computational (basis_bit=0) or
    Hadamard (basis_bit=1) basis with uniforms `u`."""
    h0, h1 = _hadamard_rows(q0, q1)
    m1 = np.where(basis_bit == 1, h1, q1)
    return (u < np.abs(m1) ** 2).astype(np.int8)


def _dl04_chunk(
    epsilon: float,
    check_fraction: float,
    informed_check: bool,
    seed: int,
    idx: int,
    count: int,
) -> _Tally:
    rng = derive_rng(seed, "game-dl04", idx)
    a = rng.integers(2, size=count)
    b = rng.integers(2, size=count)
    q0 = np.where(a == 1, _SQ2, (b == 0).astype(float)).astype(complex)
    q1 = np.where(a == 1, _SQ2 * np.where(b == 1, -1.0, 1.0), (b == 1).astype(float)).astype(
        complex
    )
    e1, q0, q1 = _wm_couple(q0, q1, epsilon, rng.random(count))

    checked = rng.random(count) < check_fraction
    # first-leg eavesdropping check by Alice
    d = a.copy() if informed_check else rng.integers(2, size=count)
    y = _measure_in_conjugate(q0, q1, d, rng.random(count))
    comparable = checked & (d == a)
    mismatch = comparable & (y != b)

    # return leg for the survivors
    c = rng.integers(2, size=count)
    f0 = np.where(c == 1, q1, q0)  # conditional flip: (q0, q1) -> (q1, -q0)
    f1 = np.where(c == 1, -q0, q1)
    e2, f0, f1 = _wm_couple(f0, f1, epsilon, rng.random(count))
    y2 = _measure_in_conjugate(f0, f1, a, rng.random(count))
    bob_key = y2 ^ b
    eve_guess = e1 ^ e2

    output = ~checked
    eve_ok = eve_guess == c
    bob_ok = bob_key == c
    t = _Tally(trials=count)
    t.outputs = int(output.sum())
    t.correct = int((output & eve_ok & bob_ok).sum())
    t.guess_match = int((output & eve_ok).sum())
    t.agreement_failures = int((output & ~bob_ok).sum())
    t.checked = int(checked.sum())
    t.matched_checked = int(comparable.sum())
    t.detected = int(mismatch.sum())
    t.aborts = t.detected
    return t


def _rbe_chunk(
    epsilon: float,
    check_fraction: float,
    space: KeySpace,
    seed: int,
    idx: int,
    count: int,
) -> _Tally:
    rng = derive_rng(seed, "game-rbe", idx)
    theta = space.sample_thetas(count, rng)
    phi = np.where(rng.random(count) < 0.5, HALF_PI, -HALF_PI)
    btilde = rng.integers(2, size=count)
    half = theta / 2.0
    e_phi = np.exp(1j * phi)
    # keyed basis elements per trial
    p00, p01 = np.cos(half).astype(complex), e_phi * np.sin(half)
    p10, p11 = np.sin(half).astype(complex), -e_phi * np.cos(half)
    q0 = np.where(btilde == 1, p10, p00)
    q1 = np.where(btilde == 1, p11, p01)

    e1, q0, q1 = _wm_couple(q0, q1, epsilon, rng.random(count))

    checked = rng.random(count) < check_fraction
    # Alice decrypts checked ciphertexts with the revealed key
    wrong0 = np.where(btilde == 1, p00, p10)  # the element coding 1 - btilde
    wrong1 = np.where(btilde == 1, p01, p11)
    p_wrong = np.abs(wrong0.conj() * q0 + wrong1.conj() * q1) ** 2
    mismatch = checked & (rng.random(count) < p_wrong)

    # survivors: Alice flips per her message bit and returns
    m = rng.integers(2, size=count)
    f0 = np.where(m == 1, q1, q0)
    f1 = np.where(m == 1, q0, q1)
    e2, f0, f1 = _wm_couple(f0, f1, epsilon, rng.random(count))
    p_dec1 = np.abs(p10.conj() * f0 + p11.conj() * f1) ** 2
    decoded = (rng.random(count) < p_dec1).astype(np.int8)
    bob_key = decoded ^ btilde
    eve_guess = e1 ^ e2

    output = ~checked
    eve_ok = eve_guess == m
    bob_ok = bob_key == m
    t = _Tally(trials=count)
    t.outputs = int(output.sum())
    t.correct = int((output & eve_ok & bob_ok).sum())
    t.guess_match = int((output & eve_ok).sum())
    t.agreement_failures = int((output & ~bob_ok).sum())
    t.checked = t.matched_checked = int(checked.sum())
    t.detected = int(mismatch.sum())
    t.aborts = t.detected
    return t


_CONDITIONED = {
    ("bb84", "wm_bb84"),
    ("bb84_informed", "wm_bb84"),
    ("dl04", "wm_dl04"),
    ("rbe_qkd", "wm_rbe"),
}


def _conditioned_game(
    config: ProtocolConfig, eve: EveStrategy, trials: int, seed: int, workers: int
) -> _Tally:
    if (config.protocol, eve.kind) not in _CONDITIONED:
        raise ValueError(
            f"conditioned mode is defined for weak-measurement attacks, "
            f"not {eve.kind!r} on {config.protocol!r}"
        )

    def chunk_fn(args: tuple[int, int]) -> _Tally:
        idx, count = args
        if eve.kind == "wm_bb84":
            return _bb84_chunk(eve.epsilon, config.check_fraction, seed, idx, count)
        if eve.kind == "wm_dl04":
            return _dl04_chunk(
                eve.epsilon, config.check_fraction, config.informed_check, seed, idx, count
            )
        return _rbe_chunk(eve.epsilon, config.check_fraction, config.key_space, seed, idx, count)

    chunks = chunk_layout(trials)
    total = _Tally()
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            for tally in pool.map(chunk_fn, chunks):
                total.add(tally)
    else:
        for ch in chunks:
            total.add(chunk_fn(ch))
    return total


def key_bit_guessing_game(
    config: ProtocolConfig,
    eve: EveStrategy,
    trials: int,
    seed: int,
    mode: str = "auto",
    workers: int = 1,
) -> GameResult:
    """Run `trials` independent game instances and tally Eve's statistics.

    mode "auto" picks "conditioned" for weak-measurement strategies (each
    trial is one targeted transmission, basis match enforced) and "full"
    otherwise.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if mode not in ("auto", "full", "conditioned"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "auto":
        mode = "conditioned" if eve.is_weak_measurement else "full"
    if mode == "conditioned":
        tally = _conditioned_game(config, eve, trials, seed, workers)
    else:
        tally = _full_game(config, eve, trials, seed)
    return _result(config.protocol, eve, tally)
