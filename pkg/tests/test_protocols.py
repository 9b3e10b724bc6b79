"""Protocol runners, the guessing game, and the analytic cross-checks."""
import json
import math

import numpy as np
import pytest

from rbelab import qcore
from rbelab.protocols import (
    ProtocolConfig,
    analytic_curves,
    attack_outcome_tree,
    dl04_attack_exact,
    first_leg_detection_exact,
    intercept_resend,
    intercept_resend_mismatch_exact,
    key_bit_guessing_game,
    no_eve,
    rbe_attack_exact,
    run_bb84,
    run_bb84_informed,
    run_dl04,
    run_protocol,
    run_rbe_qkd,
    wm_attack_bb84,
    wm_attack_dl04,
    wm_attack_rbe,
)
from rbelab.protocols.game import GameResult
from rbelab.rbe import KeySpace
from rbelab.seeding import derive_rng


def rng(*path):
    return derive_rng(20250810, "proto-tests", *path)


def _3sigma(p, n):
    return 3 * math.sqrt(max(p * (1 - p), 1e-9) / n)


class TestHonestCompleteness:
    @pytest.mark.parametrize("protocol", ["bb84", "bb84_informed", "dl04", "rbe_qkd"])
    def test_no_eve_never_aborts_and_keys_agree(self, protocol):
        config = ProtocolConfig(protocol, n=4)
        for trial in range(200):
            tr = run_protocol(config, no_eve(), rng(protocol, trial))
            assert not tr.abort
            assert tr.mismatches == 0
            assert tr.alice_key == tr.bob_key

    def test_bb84_sifted_fraction_is_about_half(self):
        total_rounds = 0
        kept = 0
        for trial in range(50):
            tr = run_bb84(ProtocolConfig("bb84", n=25), no_eve(), rng("sift", trial))
            total_rounds += 100
            kept += len(tr.sifted_indices)
        assert abs(kept / total_rounds - 0.5) < 4 * math.sqrt(0.25 / total_rounds)

    def test_informed_uses_every_round(self):
        tr = run_bb84_informed(ProtocolConfig("bb84_informed", n=16), no_eve(), rng("informed"))
        assert len(tr.sifted_indices) == tr.events[-1].round + 1 == 32

    def test_dl04_recovers_alices_bits_exactly(self):
        for trial in range(100):
            tr = run_dl04(ProtocolConfig("dl04", n=6), no_eve(), rng("dl04", trial))
            assert tr.alice_key == tr.bob_key
            assert len(tr.alice_key) == 6

    def test_rbe_qkd_check_stage_is_clean(self):
        for trial in range(100):
            tr = run_rbe_qkd(ProtocolConfig("rbe_qkd", n=4), no_eve(), rng("rbe", trial))
            verify_events = [ev for ev in tr.events if ev.kind == "verify"]
            assert len(verify_events) == 4
            assert all(ev.data["match"] for ev in verify_events)
            assert tr.alice_key == tr.bob_key


class TestTranscriptStructure:
    @pytest.mark.parametrize(
        "protocol,eve",
        [
            ("bb84", no_eve()),
            ("bb84", wm_attack_bb84(0.7)),
            ("bb84", intercept_resend()),
            ("bb84_informed", no_eve()),
            ("bb84_informed", wm_attack_bb84(0.7)),
            ("dl04", wm_attack_dl04(0.7)),
            ("rbe_qkd", wm_attack_rbe(0.7)),
        ],
    )
    def test_announcements_follow_delivery(self, protocol, eve):
        config = ProtocolConfig(protocol, n=4)
        for trial in range(25):
            tr = run_protocol(config, eve, rng("causality", protocol, eve.kind, trial))
            assert tr.announcements_follow_delivery()

    def test_informed_ordering_within_round(self):
        tr = run_bb84_informed(ProtocolConfig("bb84_informed", n=4), no_eve(), rng("order"))
        for r in range(8):
            kinds = [ev.kind for ev in tr.events_for_round(r)]
            assert kinds.index("deliver") < kinds.index("confirm_receipt")
            assert kinds.index("confirm_receipt") < kinds.index("announce_basis")
            assert kinds.index("announce_basis") < kinds.index("measure")

    def test_jsonl_round_records(self):
        tr = run_bb84(ProtocolConfig("bb84", n=3), no_eve(), rng("jsonl"))
        lines = tr.to_jsonl().strip().split("\n")
        header = json.loads(lines[0])
        assert header["record"] == "summary"
        assert header["alice_key"] == tr.alice_key
        rounds = [json.loads(ln) for ln in lines[1:]]
        assert [r["round"] for r in rounds] == list(range(12))
        for r in rounds:
            seqs = [ev["seq"] for ev in r["events"]]
            assert seqs == sorted(seqs)

    def test_eve_output_implies_no_abort(self):
        # "if Eve delivers an output ... Alice and Bob also do not abort"
        outputs = 0
        for trial in range(400):
            tr = run_bb84(ProtocolConfig("bb84", n=3), wm_attack_bb84(1.0), rng("noabort", trial))
            if tr.eve_output is not None:
                outputs += 1
                assert not tr.abort
        assert outputs > 50  # the consistency claim actually got exercised

    def test_eve_output_well_formed_for_rbe(self):
        for trial in range(100):
            tr = run_rbe_qkd(ProtocolConfig("rbe_qkd", n=3), wm_attack_rbe(0.9), rng("wf", trial))
            if tr.eve_output is None:
                assert tr.target_checked
            else:
                e, i = tr.eve_output
                assert e in (0, 1)
                assert 0 <= i < len(tr.alice_key)


class TestInterceptResend:
    def test_checked_bit_mismatch_rate_is_one_quarter(self):
        exact = intercept_resend_mismatch_exact()
        assert abs(exact - 0.25) < 1e-12
        compared = 0
        mismatched = 0
        for trial in range(120):
            tr = run_bb84(
                ProtocolConfig("bb84", n=110), intercept_resend(), rng("ir", trial)
            )
            for ev in tr.events:
                if ev.kind == "compare":
                    compared += 1
                    mismatched += not ev.data["match"]
        assert compared > 10_000
        assert abs(mismatched / compared - exact) < _3sigma(exact, compared)

    def test_informed_matches_guessing_statistics(self):
        # informed rounds reproduce the guessing protocol conditioned on a = c
        compared = {"bb84": [0, 0], "bb84_informed": [0, 0]}
        for trial in range(60):
            for protocol in compared:
                config = ProtocolConfig(protocol, n=60 if protocol == "bb84" else 120)
                tr = run_protocol(config, intercept_resend(), rng("dist", protocol, trial))
                for ev in tr.events:
                    if ev.kind == "compare":
                        compared[protocol][0] += 1
                        compared[protocol][1] += not ev.data["match"]
        rates = {k: v[1] / v[0] for k, v in compared.items()}
        sigma = math.sqrt(sum(0.25 * 0.75 / v[0] for v in compared.values()))
        assert abs(rates["bb84"] - rates["bb84_informed"]) < 4 * sigma


class TestAnalyticCurves:
    def test_zero_strength(self):
        c = analytic_curves(0.0)
        assert (c.bb84_success, c.bb84_detect, c.dl04_success, c.dl04_detect) == (
            0.5,
            0.0,
            0.5,
            0.0,
        )

    def test_published_dl04_spot_value_at_full_strength(self):
        assert analytic_curves(1.0).dl04_success == pytest.approx(7 / 8, abs=1e-15)

    def test_midpoint_values(self):
        c = analytic_curves(0.5)
        assert c.bb84_success == pytest.approx(0.5625, abs=1e-15)
        assert c.bb84_detect == pytest.approx(0.125, abs=1e-15)


class TestAttackTree:
    def test_masses_on_grid(self):
        for eps in np.linspace(0.0, 1.0, 200):
            tree = attack_outcome_tree(float(eps))
            assert abs(tree.eve_correct_mass - (0.5 + eps / 8)) < 1e-12
            assert abs(tree.bob_error_mass - eps / 4) < 1e-12
            assert abs(tree.total() - 1.0) < 1e-12

    def test_disputed_leaf_value(self):
        # the matched-Hadamard no-fire leaf carries (4 - 3 eps)/16, which is
        # what makes the masses come out right
        eps = 0.52
        tree = attack_outcome_tree(eps)
        assert tree.leaves[(1, 0, 0, 0)] == pytest.approx((4 - 3 * eps) / 16, abs=1e-12)
        assert tree.leaves[(1, 1, 1, 1)] == pytest.approx(eps / 16, abs=1e-12)

    def test_zero_strength_margins(self):
        tree = attack_outcome_tree(0.0)
        assert tree.eve_correct_mass == pytest.approx(0.5, abs=1e-12)
        assert tree.bob_error_mass == pytest.approx(0.0, abs=1e-12)

    def test_full_strength_error_mass(self):
        assert attack_outcome_tree(1.0).bob_error_mass == pytest.approx(0.25, abs=1e-12)


class TestExactEnumerations:
    def test_dl04_guess_rate_closed_form(self):
        # brute-force branch enumeration collapses to 1/2 + eps^2/2
        for eps in (0.0, 0.1, 0.25, 0.5, 0.75, 1.0):
            exact = dl04_attack_exact(eps)
            assert exact.guess_match == pytest.approx(0.5 + eps**2 / 2, abs=1e-12)
            assert exact.strict_win == pytest.approx(
                0.5 - 3 * eps / 8 + 5 * eps**2 / 8, abs=1e-12
            )

    def test_dl04_enumeration_diverges_from_published_curve(self):
        # the published closed form is not what the pipeline produces
        exact = dl04_attack_exact(1.0)
        assert exact.guess_match == pytest.approx(1.0, abs=1e-12)
        assert analytic_curves(1.0).dl04_success == pytest.approx(7 / 8, abs=1e-15)
        assert abs(exact.strict_win - analytic_curves(1.0).dl04_success) > 0.1

    def test_rbe_matches_dl04_attack_statistics(self):
        # flip-reading is basis independent: same curves on the keyed protocol
        for eps in (0.3, 0.8):
            rbe_exact = rbe_attack_exact(eps, KeySpace("discrete", 16))
            assert rbe_exact.guess_match == pytest.approx(0.5 + eps**2 / 2, abs=1e-12)
            assert rbe_exact.strict_win == pytest.approx(
                0.5 - 3 * eps / 8 + 5 * eps**2 / 8, abs=1e-12
            )

    def test_first_leg_detection_is_quarter_eps(self):
        for eps in np.linspace(0.0, 1.0, 50):
            assert first_leg_detection_exact(float(eps)) == pytest.approx(eps / 4, abs=1e-12)


class TestConditionedGame:
    def test_bb84_matches_tree(self):
        eps = 0.8
        config = ProtocolConfig("bb84", n=4)
        result = key_bit_guessing_game(config, wm_attack_bb84(eps), 400_000, seed=2)
        tree = attack_outcome_tree(eps)
        assert abs(result.conditional_success - tree.eve_correct_mass) < 3 * result.standard_error
        n_checked = result.checked_targets
        assert abs(result.detection_rate - eps / 4) < _3sigma(eps / 4, n_checked)

    def test_zero_strength_gives_exactly_half_statistics(self):
        config = ProtocolConfig("bb84", n=4)
        result = key_bit_guessing_game(config, wm_attack_bb84(0.0), 200_000, seed=3)
        assert abs(result.conditional_success - 0.5) < 3 * result.standard_error
        assert result.detected == 0

    def test_dl04_matches_enumeration(self):
        eps = 0.5
        config = ProtocolConfig("dl04", n=4)
        result = key_bit_guessing_game(config, wm_attack_dl04(eps), 400_000, seed=4)
        exact = dl04_attack_exact(eps)
        assert abs(result.conditional_success - exact.strict_win) < 3 * result.standard_error
        assert abs(result.guess_match_rate - exact.guess_match) < 4 * result.standard_error
        assert abs(result.detection_rate - eps / 4) < _3sigma(eps / 4, result.checked_targets)

    def test_dl04_informed_check_flag_detection(self):
        eps = 0.6
        config = ProtocolConfig("dl04", n=4, informed_check=True)
        result = key_bit_guessing_game(config, wm_attack_dl04(eps), 200_000, seed=5)
        # informed checks are always comparable
        assert result.checked_targets > 0.4 * result.trials
        assert abs(result.detection_rate - eps / 4) < _3sigma(eps / 4, result.checked_targets)

    def test_rbe_matches_enumeration(self):
        eps = 0.7
        config = ProtocolConfig("rbe_qkd", n=4, key_space=KeySpace("discrete", 4096))
        result = key_bit_guessing_game(config, wm_attack_rbe(eps), 400_000, seed=6)
        exact = rbe_attack_exact(eps, KeySpace("discrete", 64))
        assert abs(result.conditional_success - exact.strict_win) < 3 * result.standard_error
        assert abs(result.guess_match_rate - exact.guess_match) < 4 * result.standard_error

    def test_determinism_and_worker_invariance(self):
        config = ProtocolConfig("dl04", n=4)
        a = key_bit_guessing_game(config, wm_attack_dl04(0.4), 150_000, seed=9, workers=1)
        b = key_bit_guessing_game(config, wm_attack_dl04(0.4), 150_000, seed=9, workers=4)
        assert a == b

    def test_conditioned_mode_rejects_mismatched_strategy(self):
        config = ProtocolConfig("bb84", n=4)
        with pytest.raises(ValueError):
            key_bit_guessing_game(config, intercept_resend(), 100, seed=1, mode="conditioned")


class TestFullGameCrossValidation:
    @pytest.mark.parametrize(
        "protocol,strategy,eps",
        [
            ("bb84", wm_attack_bb84, 0.8),
            ("dl04", wm_attack_dl04, 0.8),
            ("rbe_qkd", wm_attack_rbe, 0.8),
        ],
    )
    def test_full_pipeline_agrees_with_conditioned_engine(self, protocol, strategy, eps):
        config = ProtocolConfig(protocol, n=3)
        full = key_bit_guessing_game(config, strategy(eps), 1500, seed=12, mode="full")
        fast = key_bit_guessing_game(config, strategy(eps), 400_000, seed=13)
        sigma_full = math.sqrt(0.25 / max(full.eve_outputs, 1))
        assert full.eve_outputs > 200
        assert abs(full.conditional_success - fast.conditional_success) < 4 * sigma_full

    def test_full_bb84_unconditioned_output_rate(self):
        # Eve outputs iff basis matched and target uncheckd: about 1/4 of trials
        config = ProtocolConfig("bb84", n=3)
        full = key_bit_guessing_game(config, wm_attack_bb84(0.5), 2000, seed=14, mode="full")
        rate = full.eve_outputs / full.trials
        assert abs(rate - 0.25) < 4 * math.sqrt(0.25 * 0.75 / 2000)


class TestGameResultInvariants:
    def test_valid_counts_enforced(self):
        with pytest.raises(ValueError):
            GameResult(
                protocol="bb84",
                attack="wm_bb84",
                epsilon=0.5,
                trials=10,
                eve_outputs=11,
                eve_correct=5,
                guess_matches=5,
                key_agreement_failures=0,
                checked_targets=0,
                detected=0,
                aborts=0,
                conditional_success=0.5,
                guess_match_rate=0.5,
                detection_rate=None,
                standard_error=0.1,
            )
