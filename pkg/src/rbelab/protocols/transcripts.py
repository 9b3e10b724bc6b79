"""Configs, the event-level transcript record, and its serialization.

A transcript is an ordered event log plus a summary. Ordering is the point:
the causality invariant (no announcement before the round's qubit delivery)
is checked structurally against the sequence numbers, and the line-delimited
serialization keeps one round per record for audit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..rbe import KeySpace

PROTOCOLS = ("bb84", "bb84_informed", "dl04", "rbe_qkd")

# Event kinds that expose classical information on the public channel, and the
# delivery kinds that must precede them within a round.
ANNOUNCEMENT_KINDS = frozenset(
    {
        "announce_bases",
        "announce_basis",
        "announce_outcome",
        "reveal_basis",
        "reveal_key",
        "compare",
    }
)
DELIVERY_KINDS = frozenset({"deliver", "deliver_return"})


@dataclass(frozen=True)
class ProtocolConfig:
    protocol: str
    n: int
    key_space: KeySpace | None = None
    check_fraction: float = 0.5
    informed_check: bool = False  # DL04 variant: Alice asks for the basis before checking
    transmissions: int | None = None

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 < self.check_fraction < 1.0:
            raise ValueError("check_fraction must lie in (0, 1)")
        if self.protocol == "rbe_qkd" and self.key_space is None:
            object.__setattr__(self, "key_space", KeySpace("discrete", 4096))
        if self.informed_check and self.protocol != "dl04":
            raise ValueError("informed_check is a DL04 flag")

    @property
    def num_transmissions(self) -> int:
        if self.transmissions is not None:
            return self.transmissions
        # guessing BB84 needs ~4n sends to keep n key bits; the others use 2n
        return 4 * self.n if self.protocol == "bb84" else 2 * self.n


@dataclass(frozen=True)
class TranscriptEvent:
    seq: int
    round: int | None
    actor: str
    kind: str
    data: dict


@dataclass
class Transcript:
    protocol: str
    n: int
    events: list[TranscriptEvent] = field(default_factory=list)
    # summary, filled by the runner
    sifted_indices: list[int] = field(default_factory=list)
    check_indices: list[int] = field(default_factory=list)
    key_indices: list[int] = field(default_factory=list)
    alice_key: list[int] = field(default_factory=list)
    bob_key: list[int] = field(default_factory=list)
    mismatches: int = 0
    abort: bool = False
    eve_target: int | None = None
    eve_output: tuple[int, int] | None = None  # (e, i) or None for ⊥
    target_checked: bool | None = None
    target_basis_matched: bool | None = None
    target_mismatch: bool | None = None

    def log(self, round_: int | None, actor: str, kind: str, **data) -> None:
        self.events.append(TranscriptEvent(len(self.events), round_, actor, kind, data))

    def events_for_round(self, round_: int) -> list[TranscriptEvent]:
        return [ev for ev in self.events if ev.round == round_]

    def announcements_follow_delivery(self) -> bool:
        """True iff every announcement in a round comes after some delivery of
        that round (classical values are never public before the qubit moved)."""
        first_delivery: dict[int, int] = {}
        for ev in self.events:
            if ev.kind in DELIVERY_KINDS and ev.round is not None:
                first_delivery.setdefault(ev.round, ev.seq)
        for ev in self.events:
            if ev.kind in ANNOUNCEMENT_KINDS and ev.round is not None:
                if ev.round not in first_delivery or ev.seq < first_delivery[ev.round]:
                    return False
        return True

    def usable_fraction(self) -> float:
        return len(self.sifted_indices) / max(
            1, len({ev.round for ev in self.events if ev.kind == "deliver"})
        )

    def to_jsonl(self) -> str:
        """Header record, then one record per round with its ordered events."""
        header = {
            "record": "summary",
            "protocol": self.protocol,
            "n": self.n,
            "abort": self.abort,
            "mismatches": self.mismatches,
            "sifted_indices": self.sifted_indices,
            "check_indices": self.check_indices,
            "key_indices": self.key_indices,
            "alice_key": self.alice_key,
            "bob_key": self.bob_key,
            "eve_output": list(self.eve_output) if self.eve_output else None,
        }
        lines = [json.dumps(header, sort_keys=True)]
        rounds = sorted({ev.round for ev in self.events if ev.round is not None})
        for r in rounds:
            rec = {
                "record": "round",
                "round": r,
                "events": [
                    {"seq": ev.seq, "actor": ev.actor, "kind": ev.kind, "data": ev.data}
                    for ev in self.events_for_round(r)
                ],
            }
            lines.append(json.dumps(rec, sort_keys=True))
        return "\n".join(lines) + "\n"
