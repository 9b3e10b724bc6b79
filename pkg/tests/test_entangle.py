"""Entanglement locking, theft/recovery, secure sharing, and the parity game."""
import math

import numpy as np
import pytest

from rbelab import entangle, qcore
from rbelab.rbe import CONTINUOUS, KeySpace, RbeKey, gen
from rbelab.seeding import derive_rng

HALF_PI = math.pi / 2


def rng(*path):
    return derive_rng(20250810, "entangle-tests", *path)


class TestLocking:
    def test_all_zero_pad_is_identity(self):
        pair = entangle.epr_pair()
        locked = entangle.qotp_lock(pair, entangle.QotpKey(0, 0), entangle.QotpKey(0, 0))
        assert np.allclose(locked.state.amplitudes, pair.state.amplitudes)

    def test_x_on_both_halves_fixes_the_pair(self):
        pair = entangle.epr_pair()
        locked = entangle.qotp_lock(pair, entangle.QotpKey(1, 0), entangle.QotpKey(1, 0))
        assert qcore.equal_up_to_global_phase(locked.state, pair.state)

    def test_qotp_sixteen_key_average_is_maximally_mixed(self):
        rho = entangle.qotp_average_density()
        assert np.abs(rho.matrix - np.eye(4) / 4).max() < 1e-12

    def test_qotp_round_trip(self):
        pair = entangle.epr_pair()
        r = rng("qotp-rt")
        for _ in range(32):
            ka = entangle.QotpKey(int(r.integers(2)), int(r.integers(2)))
            kb = entangle.QotpKey(int(r.integers(2)), int(r.integers(2)))
            back = entangle.qotp_unlock(entangle.qotp_lock(pair, ka, kb), ka, kb)
            assert abs(entangle.fidelity_with_epr(back.state) - 1.0) < 1e-12

    def test_trivial_angle_keys_are_phase_only(self):
        key = RbeKey(0.0, HALF_PI)
        locked = entangle.rbe_lock(entangle.epr_pair(), key, key)
        # K(0, pi/2) is diagonal, so only the |11> amplitude picks up a phase
        assert abs(abs(locked.state.amplitudes[0]) - 1 / math.sqrt(2)) < 1e-12
        assert abs(abs(locked.state.amplitudes[3]) - 1 / math.sqrt(2)) < 1e-12
        assert abs(locked.state.amplitudes[1]) < 1e-12 and abs(locked.state.amplitudes[2]) < 1e-12

    def test_rbe_round_trip(self):
        r = rng("rbe-rt")
        pair = entangle.epr_pair()
        for _ in range(32):
            ka, kb = gen(CONTINUOUS, r), gen(CONTINUOUS, r)
            back = entangle.rbe_unlock(entangle.rbe_lock(pair, ka, kb), ka, kb)
            assert abs(entangle.fidelity_with_epr(back.state) - 1.0) < 1e-12

    def test_wrong_theta_guess_loses_fidelity(self):
        pair = entangle.epr_pair()
        ka, kb = RbeKey(1.0, HALF_PI), RbeKey(2.0, HALF_PI)
        locked = entangle.rbe_lock(pair, ka, kb)
        wrong = entangle.rbe_unlock(locked, RbeKey(1.0 + HALF_PI, HALF_PI), kb)
        assert entangle.fidelity_with_epr(wrong.state) < 1.0 - 1e-3

    def test_rbe_grid_average_is_maximally_mixed(self):
        rho = entangle.rbe_average_density(KeySpace("discrete", 64))
        assert np.abs(rho.matrix - np.eye(4) / 4).max() < 1e-12


class TestTheftRecovery:
    def test_qotp_oracle_value_is_one_quarter(self):
        # Pauli pads act through their XOR class: 4 good guesses per key pair
        assert entangle.qotp_theft_oracle(1 - 1e-9) == pytest.approx(0.25, abs=1e-15)

    def test_qotp_empirical_matches_oracle(self):
        report = entangle.theft_recovery_experiment("qotp", 20_000, seed=21)
        exact = report.exact_rate
        sigma = math.sqrt(exact * (1 - exact) / report.trials)
        assert abs(report.empirical_rate - exact) < 3 * sigma
        assert report.exact_key_guess_rate == pytest.approx(1 / 16)

    def test_rbe_discrete_grid_matches_oracle(self):
        grid = KeySpace("discrete", 8)
        report = entangle.theft_recovery_experiment(
            "rbe", 20_000, seed=22, key_space=grid, guess_space=grid
        )
        assert report.exact_rate is not None
        sigma = math.sqrt(max(report.exact_rate * (1 - report.exact_rate), 1e-9) / report.trials)
        assert abs(report.empirical_rate - report.exact_rate) < 3 * sigma

    def test_continuous_keys_are_never_recovered(self):
        report = entangle.theft_recovery_experiment("rbe", 100_000, seed=23)
        assert report.successes == 0
        assert report.empirical_rate < 1e-3
        assert report.exact_rate is None
        assert report.exact_key_guess_rate == 0.0

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            entangle.theft_recovery_experiment("qotp", 10, seed=1, threshold=0.0)


class TestMagicSquare:
    def test_resource_amplitudes(self):
        state = entangle.magic_square_resource().state
        expected = np.zeros(16)
        expected[0b0011] = 0.5
        expected[0b0110] = -0.5
        expected[0b1001] = -0.5
        expected[0b1100] = 0.5
        assert np.abs(state.amplitudes - expected).max() < 1e-12

    def test_observable_table_identities(self):
        for i in range(3):
            row = entangle.ALICE_OBSERVABLES[i]
            assert np.allclose(row[0] @ row[1] @ row[2], np.eye(4), atol=1e-12)
        for j in range(3):
            col = [entangle.BOB_OBSERVABLES[i][j] for i in range(3)]
            assert np.allclose(col[0] @ col[1] @ col[2], -np.eye(4), atol=1e-12)

    def test_every_input_pair_wins(self):
        r = rng("plays")
        for i in range(1, 4):
            for j in range(1, 4):
                for _ in range(60):
                    inst = entangle.magic_square_play(
                        entangle.magic_square_resource(), i, j, r
                    )
                    assert inst.win
                    assert sum(inst.alice_row) % 2 == 0
                    assert sum(inst.bob_col) % 2 == 1

    def test_instance_validation(self):
        with pytest.raises(ValueError):
            entangle.MagicSquareInstance(1, 1, (1, 0, 0), (1, 0, 0), True)

    def test_classical_bound_is_exactly_eight_ninths(self):
        bound = entangle.magic_square_classical_bound()
        assert bound.max_wins == 8
        assert bound.total_inputs == 9
        assert bound.strategy_pairs == 4096
        assert bound.perfect_strategies == 0
        assert bound.probability == pytest.approx(8 / 9)


class TestLockedUtility:
    def test_unlocked_resource_always_wins(self):
        report = entangle.locked_resource_utility("none", 300, seed=31)
        assert report.win_rate == 1.0

    def test_lock_then_unlock_restores_baseline(self):
        report = entangle.locked_resource_utility(
            "rbe_unknown_keys", 200, seed=32, unlock_correctly=True
        )
        assert report.win_rate == 1.0

    @pytest.mark.parametrize("lock", ["qotp_unknown_keys", "rbe_unknown_keys"])
    def test_unknown_keys_degrade_below_classical_bound(self, lock):
        report = entangle.locked_resource_utility(lock, 3000, seed=33)
        assert report.win_rate < 8 / 9 - 3 * report.standard_error
        # fully twirled resource leaves the players at chance
        assert abs(report.win_rate - 0.5) < 4 * math.sqrt(0.25 / report.plays)

    def test_unknown_lock_rejected(self):
        with pytest.raises(ValueError):
            entangle.locked_resource_utility("rot13", 10, seed=1)


class TestSecureSharing:
    def test_honest_delivery_restores_the_pair(self):
        report = entangle.secure_epr_sharing(eve_intercepts=False, seed=41)
        assert report.fidelity == pytest.approx(1.0, abs=1e-12)
        assert report.eve_marginal_gap is None

    def test_interception_without_key(self):
        report = entangle.secure_epr_sharing(eve_intercepts=True, seed=42, utility_plays=1500)
        assert report.fidelity < 1.0 - 1e-6
        assert report.eve_marginal_gap < 1e-12  # key-averaged qubit is I/2
        assert report.utility.win_rate <= 8 / 9 + 3 * report.utility.standard_error

    def test_interception_with_leaked_key_is_negative_control(self):
        report = entangle.secure_epr_sharing(eve_intercepts=True, seed=43, leak_key=True)
        assert report.fidelity == pytest.approx(1.0, abs=1e-12)
