"""Pluggable eavesdropper strategies for the key-bit guessing game."""
from __future__ import annotations

from dataclasses import dataclass

EVE_KINDS = ("none", "wm_bb84", "wm_dl04", "wm_rbe", "intercept_resend")
WM_KINDS = frozenset({"wm_bb84", "wm_dl04", "wm_rbe"})


@dataclass(frozen=True)
class EveStrategy:
    """Attack behavior. Weak-measurement kinds pick one transmission uniformly
    at random, couple via W(epsilon), and follow the public channel to decide
    between outputting (e, i) and aborting with ⊥."""

    kind: str = "none"
    epsilon: float = 0.0

    def __post_init__(self):
        if self.kind not in EVE_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")

    @property
    def is_weak_measurement(self) -> bool:
        return self.kind in WM_KINDS


def no_eve() -> EveStrategy:
    return EveStrategy("none")


def wm_attack_bb84(epsilon: float) -> EveStrategy:
    return EveStrategy("wm_bb84", epsilon)


def wm_attack_dl04(epsilon: float) -> EveStrategy:
    """Couples on both legs of the targeted qubit and guesses e1 XOR e2."""
    return EveStrategy("wm_dl04", epsilon)


def wm_attack_rbe(epsilon: float) -> EveStrategy:
    """The same two-leg W(epsilon) tactic pointed at the random-basis protocol."""
    return EveStrategy("wm_rbe", epsilon)


def intercept_resend() -> EveStrategy:
    """Measure every transit qubit in the computational basis and resend."""
    return EveStrategy("intercept_resend")
