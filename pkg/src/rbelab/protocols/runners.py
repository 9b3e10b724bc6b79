"""Event-level state machines for the four key-distribution protocols.

Each runner plays one full protocol instance against a pluggable
eavesdropper and returns a Transcript: the ordered classical+quantum record,
the sifted/check/key index sets, both final keys, and what Eve saw. These are
the reference implementations; the vectorized engines in ``game`` reproduce
their per-target statistics at scale and are cross-checked against them.
"""
from __future__ import annotations

import numpy as np

from .. import qcore
from ..qcore import BASIS_FLIP, HADAMARD, StateVector
from ..rbe import Ciphertext, dec, enc, eval_not, gen
from ..weakmeas import weak_measure
from .eve import EveStrategy
from .transcripts import ProtocolConfig, Transcript


def _bb84_state(a: int, b: int) -> StateVector:
    """H^a X^b |0>."""
    state = qcore.zero_state(1)
    if b:
        state = qcore.apply(state, qcore.X, [0])
    if a:
        state = qcore.apply(state, HADAMARD, [0])
    return state


def _check_eve(protocol: str, eve: EveStrategy, allowed: tuple[str, ...]) -> None:
    if eve.kind not in allowed:
        raise ValueError(f"strategy {eve.kind!r} is not defined for {protocol}")


def _draw_check_set(indices: list[int], fraction: float, rng: np.random.Generator) -> list[int]:
    count = int(round(fraction * len(indices)))
    picked = rng.permutation(len(indices))[:count]
    return sorted(indices[i] for i in picked)


def _rank_in(indices: list[int], target: int) -> int:
    return indices.index(target)


def run_bb84(config: ProtocolConfig, eve: EveStrategy, rng: np.random.Generator) -> Transcript:
    """Guessing BB84: Bob picks c at random, rounds with a != c are discarded."""
    if config.protocol != "bb84":
        raise ValueError("config.protocol must be 'bb84'")
    _check_eve("bb84", eve, ("none", "intercept_resend", "wm_bb84"))
    return _run_bb84_like(config, eve, rng, informed=False)


def run_bb84_informed(
    config: ProtocolConfig, eve: EveStrategy, rng: np.random.Generator
) -> Transcript:
    """BB84 with Alice revealing the basis after delivery; every round is usable."""
    if config.protocol != "bb84_informed":
        raise ValueError("config.protocol must be 'bb84_informed'")
    _check_eve("bb84_informed", eve, ("none", "intercept_resend", "wm_bb84"))
    return _run_bb84_like(config, eve, rng, informed=True)


def _run_bb84_like(
    config: ProtocolConfig, eve: EveStrategy, rng: np.random.Generator, informed: bool
) -> Transcript:
    total = config.num_transmissions
    t = Transcript(config.protocol, config.n)
    target = int(rng.integers(total)) if eve.kind == "wm_bb84" else None
    t.eve_target = target

    a_bits: list[int] = []
    b_bits: list[int] = []
    c_bits: list[int] = []
    x_bits: list[int] = []
    eve_bits: list[int | None] = []
    eve_e: int | None = None

    for r in range(total):
        a, b = int(rng.integers(2)), int(rng.integers(2))
        t.log(r, "alice", "prepare", a=a, b=b)
        state = _bb84_state(a, b)
        tapped: int | None = None
        if eve.kind == "wm_bb84" and r == target:
            out = weak_measure(state, 0, eve.epsilon, rng)
            state, tapped, eve_e = out.post_state, out.ancilla_bit, out.ancilla_bit
            t.log(r, "eve", "tap", e=tapped)
        elif eve.kind == "intercept_resend":
            tapped, state = qcore.measure_in_basis(state, 0, qcore.COMPUTATIONAL, rng)
            t.log(r, "eve", "tap", e=tapped)
        eve_bits.append(tapped)
        t.log(r, "channel", "deliver")

        if informed:
            t.log(r, "bob", "confirm_receipt")
            t.log(r, "public", "announce_basis", a=a)
            c = a
            t.log(r, "bob", "choose_basis", c=c, informed=True)
        else:
            c = int(rng.integers(2))
            t.log(r, "bob", "choose_basis", c=c)
        if c:
            state = qcore.apply(state, HADAMARD, [0])
        x, _ = qcore.measure_in_basis(state, 0, qcore.COMPUTATIONAL, rng)
        t.log(r, "bob", "measure", outcome=x)
        if not informed:
            t.log(r, "public", "announce_bases", a=a, c=c)
        a_bits.append(a)
        b_bits.append(b)
        c_bits.append(c)
        x_bits.append(x)

    sifted = [r for r in range(total) if a_bits[r] == c_bits[r]]
    check = _draw_check_set(sifted, config.check_fraction, rng)
    check_set = set(check)
    mismatches = 0
    for r in check:
        match = b_bits[r] == x_bits[r]
        mismatches += not match
        t.log(r, "public", "compare", alice_bit=b_bits[r], bob_bit=x_bits[r], match=match)
    key_indices = [r for r in sifted if r not in check_set]

    t.sifted_indices = sifted
    t.check_indices = check
    t.key_indices = key_indices
    t.alice_key = [b_bits[r] for r in key_indices]
    t.bob_key = [x_bits[r] for r in key_indices]
    t.mismatches = mismatches
    t.abort = mismatches > 0

    if eve.kind == "wm_bb84":
        matched = a_bits[target] == c_bits[target]
        t.target_basis_matched = matched
        t.target_checked = target in check_set
        if matched:
            t.target_mismatch = b_bits[target] != x_bits[target]
        if matched and target in key_indices:
            t.eve_output = (eve_e, _rank_in(key_indices, target))
    elif eve.kind == "intercept_resend" and key_indices:
        pick = int(rng.integers(len(key_indices)))
        t.eve_output = (eve_bits[key_indices[pick]], pick)
    return t


def run_dl04(config: ProtocolConfig, eve: EveStrategy, rng: np.random.Generator) -> Transcript:
    """Two-leg protocol: Bob sends prepared qubits, Alice checks some and
    encodes her key bit on the rest with a conditional flip, Bob decodes."""
    if config.protocol != "dl04":
        raise ValueError("config.protocol must be 'dl04'")
    _check_eve("dl04", eve, ("none", "wm_dl04"))
    total = config.num_transmissions
    t = Transcript(config.protocol, config.n)
    target = int(rng.integers(total)) if eve.kind == "wm_dl04" else None
    t.eve_target = target

    a_bits: list[int] = []
    b_bits: list[int] = []
    states: list[StateVector] = []
    e1: int | None = None
    for r in range(total):
        a, b = int(rng.integers(2)), int(rng.integers(2))
        t.log(r, "bob", "prepare", a=a, b=b)
        state = _bb84_state(a, b)
        if r == target:
            out = weak_measure(state, 0, eve.epsilon, rng)
            state, e1 = out.post_state, out.ancilla_bit
            t.log(r, "eve", "tap", leg=1, e=e1)
        t.log(r, "channel", "deliver")
        a_bits.append(a)
        b_bits.append(b)
        states.append(state)

    check = _draw_check_set(list(range(total)), config.check_fraction, rng)
    check_set = set(check)
    t.log(None, "public", "check_set", indices=check)
    mismatches = 0
    for r in check:
        if config.informed_check:
            t.log(r, "alice", "request_basis")
            t.log(r, "bob", "reveal_basis", a=a_bits[r])
            d = a_bits[r]
        else:
            d = int(rng.integers(2))
        basis = qcore.HADAMARD_BASIS if d else qcore.COMPUTATIONAL
        y, _ = qcore.measure_in_basis(states[r], 0, basis, rng)
        t.log(r, "alice", "check_measure", basis=d, outcome=y)
        t.log(r, "public", "announce_outcome", basis=d, outcome=y)
        comparable = d == a_bits[r]
        match = (y == b_bits[r]) if comparable else None
        if comparable and not match:
            mismatches += 1
        t.log(r, "bob", "verify", comparable=comparable, match=match)

    survivors = [r for r in range(total) if r not in check_set]
    alice_key: list[int] = []
    bob_key: list[int] = []
    e2: int | None = None
    for r in survivors:
        c = int(rng.integers(2))
        state = states[r]
        if c:
            state = qcore.apply(state, BASIS_FLIP, [0])
        t.log(r, "alice", "encode", c=c)
        if r == target:
            out = weak_measure(state, 0, eve.epsilon, rng)
            state, e2 = out.post_state, out.ancilla_bit
            t.log(r, "eve", "tap", leg=2, e=e2)
        t.log(r, "channel", "deliver_return")
        if a_bits[r]:
            state = qcore.apply(state, HADAMARD, [0])
        y, _ = qcore.measure_in_basis(state, 0, qcore.COMPUTATIONAL, rng)
        key_bit = y ^ b_bits[r]
        t.log(r, "bob", "decode", outcome=y, key_bit=key_bit)
        alice_key.append(c)
        bob_key.append(key_bit)

    t.sifted_indices = survivors
    t.check_indices = check
    t.key_indices = survivors
    t.alice_key = alice_key
    t.bob_key = bob_key
    t.mismatches = mismatches
    t.abort = mismatches > 0

    if eve.kind == "wm_dl04":
        t.target_checked = target in check_set
        if t.target_checked:
            ev = [x for x in t.events_for_round(target) if x.kind == "check_measure"][0]
            matched = config.informed_check or ev.data["basis"] == a_bits[target]
            t.target_basis_matched = matched
            if matched:
                t.target_mismatch = ev.data["outcome"] != b_bits[target]
        else:
            t.eve_output = (e1 ^ e2, _rank_in(survivors, target))
    return t


def run_rbe_qkd(config: ProtocolConfig, eve: EveStrategy, rng: np.random.Generator) -> Transcript:
    """Random-basis encrypted key transport (the seven-step flow).

    Bob sends 2n encrypted random bits; Alice checks n of them after Bob
    reveals those keys, flips the survivors carrying her message bits with
    the homomorphic NOT, and returns them; Bob decrypts and XORs.
    """
    if config.protocol != "rbe_qkd":
        raise ValueError("config.protocol must be 'rbe_qkd'")
    _check_eve("rbe_qkd", eve, ("none", "wm_rbe"))
    total = config.num_transmissions
    space = config.key_space
    t = Transcript(config.protocol, config.n)
    target = int(rng.integers(total)) if eve.kind == "wm_rbe" else None
    t.eve_target = target

    keys = []
    bprime: list[int] = []
    states: list[StateVector] = []
    e1: int | None = None
    for r in range(total):
        key = gen(space, rng)
        bit = int(rng.integers(2))
        t.log(r, "bob", "prepare", bit=bit, theta=key.theta, phi=key.phi)
        state = enc(bit, key).qubit
        if r == target:
            out = weak_measure(state, 0, eve.epsilon, rng)
            state, e1 = out.post_state, out.ancilla_bit
            t.log(r, "eve", "tap", leg=1, e=e1)
        t.log(r, "channel", "deliver")
        keys.append(key)
        bprime.append(bit)
        states.append(state)

    check = _draw_check_set(list(range(total)), config.check_fraction, rng)
    check_set = set(check)
    t.log(None, "public", "check_set", indices=check)
    mismatches = 0
    for r in check:
        t.log(r, "bob", "reveal_key", theta=keys[r].theta, phi=keys[r].phi)
        outcome = dec(Ciphertext(states[r]), keys[r], rng)
        t.log(r, "alice", "check_decrypt", outcome=outcome)
        t.log(r, "public", "announce_outcome", outcome=outcome)
        match = outcome == bprime[r]
        mismatches += not match
        t.log(r, "bob", "verify", match=match)

    survivors = [r for r in range(total) if r not in check_set]
    alice_key: list[int] = []
    bob_key: list[int] = []
    e2: int | None = None
    for r in survivors:
        message_bit = int(rng.integers(2))
        cipher = Ciphertext(states[r])
        if message_bit:
            cipher = eval_not(cipher)
        t.log(r, "alice", "encode", bit=message_bit)
        state = cipher.qubit
        if r == target:
            out = weak_measure(state, 0, eve.epsilon, rng)
            state, e2 = out.post_state, out.ancilla_bit
            t.log(r, "eve", "tap", leg=2, e=e2)
        t.log(r, "channel", "deliver_return")
        decoded = dec(Ciphertext(state), keys[r], rng)
        key_bit = decoded ^ bprime[r]
        t.log(r, "bob", "decode", outcome=decoded, key_bit=key_bit)
        alice_key.append(message_bit)
        bob_key.append(key_bit)

    t.sifted_indices = survivors
    t.check_indices = check
    t.key_indices = survivors
    t.alice_key = alice_key
    t.bob_key = bob_key
    t.mismatches = mismatches
    t.abort = mismatches > 0

    if eve.kind == "wm_rbe":
        t.target_checked = target in check_set
        if t.target_checked:
            ev = [x for x in t.events_for_round(target) if x.kind == "check_decrypt"][0]
            t.target_basis_matched = True  # Alice decrypts with the true key
            t.target_mismatch = ev.data["outcome"] != bprime[target]
        else:
            t.eve_output = (e1 ^ e2, _rank_in(survivors, target))
    return t


_RUNNERS = {
    "bb84": run_bb84,
    "bb84_informed": run_bb84_informed,
    "dl04": run_dl04,
    "rbe_qkd": run_rbe_qkd,
}


def run_protocol(config: ProtocolConfig, eve: EveStrategy, rng: np.random.Generator) -> Transcript:
    return _RUNNERS[config.protocol](config, eve, rng)
