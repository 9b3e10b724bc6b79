"""Protocol state machines, eavesdropper strategies, the key-bit guessing
game harness, and the analytic reference curves."""
from .analytic import (
    AnalyticCurves,
    AttackTree,
    TwoLegAttackExact,
    analytic_curves,
    attack_outcome_tree,
    dl04_attack_exact,
    first_leg_detection_exact,
    intercept_resend_mismatch_exact,
    rbe_attack_exact,
    sweep_grid,
)
from .eve import (
    EveStrategy,
    intercept_resend,
    no_eve,
    wm_attack_bb84,
    wm_attack_dl04,
    wm_attack_rbe,
)
from .game import GameResult, key_bit_guessing_game
from .runners import run_bb84, run_bb84_informed, run_dl04, run_protocol, run_rbe_qkd
from .transcripts import ProtocolConfig, Transcript, TranscriptEvent

__all__ = [
    "AnalyticCurves",
    "AttackTree",
    "EveStrategy",
    "GameResult",
    "ProtocolConfig",
    "Transcript",
    "TranscriptEvent",
    "TwoLegAttackExact",
    "analytic_curves",
    "attack_outcome_tree",
    "dl04_attack_exact",
    "first_leg_detection_exact",
    "intercept_resend",
    "intercept_resend_mismatch_exact",
    "key_bit_guessing_game",
    "no_eve",
    "rbe_attack_exact",
    "run_bb84",
    "run_bb84_informed",
    "run_dl04",
    "run_protocol",
    "run_rbe_qkd",
    "sweep_grid",
    "wm_attack_bb84",
    "wm_attack_dl04",
    "wm_attack_rbe",
]
