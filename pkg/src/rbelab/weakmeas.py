"""Weak measurement: couple a fresh ancilla via W(eps), then measure it.

W(eps) = sqrt(eps)*i*CNOT + sqrt(1-eps)*I⊗I interpolates between doing
nothing (eps=0, admitted as the identity limit) and a full computational-basis
copy (eps=1). Computational-basis inputs pass through undisturbed while the
ancilla picks up their value with probability eps; superpositions get biased.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qcore
from .qcore import StateVector, Unitary


def w_epsilon(epsilon: float) -> Unitary:
    """The coupling gate; unitary because CNOT is Hermitian."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    mat = (
        math.sqrt(epsilon) * 1j * qcore.CNOT.matrix
        + math.sqrt(1.0 - epsilon) * np.eye(4)
    )
    return Unitary(mat)


@dataclass(frozen=True)
class WeakOutcome:
    ancilla_bit: int
    post_state: StateVector  # ancilla wire already removed
    p_one: float  # exact pre-measurement P(ancilla = 1)


def _coupled(state: StateVector, target: int, epsilon: float) -> StateVector:
    joint = qcore.tensor(state, qcore.zero_state(1))
    ancilla = state.num_qubits  # appended last, never visible to the caller
    return qcore.apply(joint, w_epsilon(epsilon), [target, ancilla])


def weak_measure(
    state: StateVector, target: int, epsilon: float, rng: np.random.Generator
) -> WeakOutcome:
    """Sampled weak measurement of `target`; returns the residual state."""
    joint = _coupled(state, target, epsilon)
    ancilla = state.num_qubits
    p1, _ = qcore.project_qubit(joint, ancilla, np.array([0.0, 1.0], dtype=complex))
    bit, residual = qcore.measure_and_discard(joint, ancilla, rng)
    return WeakOutcome(ancilla_bit=bit, post_state=residual, p_one=p1)


def weak_branches(
    state: StateVector, target: int, epsilon: float
) -> list[tuple[float, int, StateVector]]:
    """Exact (probability, ancilla bit, residual state) branches.

    Lets probability trees be evaluated without sampling; branches with
    (numerically) zero weight are dropped.
    """
    joint = _coupled(state, target, epsilon)
    ancilla = state.num_qubits
    out = []
    for bit, bra in ((0, np.array([1.0, 0.0], dtype=complex)),
                     (1, np.array([0.0, 1.0], dtype=complex))):
        prob, reduced = qcore.project_qubit(joint, ancilla, bra)
        if prob > 1e-15:
            out.append((prob, bit, StateVector(reduced / math.sqrt(prob))))
    return out
