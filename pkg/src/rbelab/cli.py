"""Batch experiment runner.

Subcommands: ``selftest`` (exact-identity suite), ``qkd`` (one game
configuration), ``sweep`` (epsilon grid with analytic reference columns),
``tree`` (exact conditioned attack tree), ``entangle`` (locking / theft /
game experiments).

Output is deterministic: identical spec+seed produces identical bytes at any
worker count. JSON numbers use the shortest round-trip representation; CSV
uses 17 significant digits with a plain decimal point. Wall-clock time goes
to the stderr run log, never into the canonical payload. The environment
variable ``RBELAB_OUTPUT_DIR`` supplies a base directory for relative output
paths. Exit codes: 0 success, 1 selftest/assertion or I/O failure, 2 usage.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, entangle, qcore, rbe
from .protocols import (
    EveStrategy,
    ProtocolConfig,
    analytic_curves,
    attack_outcome_tree,
    key_bit_guessing_game,
    sweep_grid,
)
from .protocols.eve import intercept_resend, no_eve, wm_attack_bb84, wm_attack_dl04, wm_attack_rbe
from .seeding import derive_rng

CSV_COLUMNS = (
    "epsilon",
    "trials",
    "success",
    "success_analytic",
    "detection",
    "detection_analytic",
    "stderr",
    "seed",
)


@dataclass
class ResultRecord:
    command: str
    spec: dict
    seed: int
    metrics: dict
    analytic: dict = field(default_factory=dict)
    tool_version: str = __version__
    wall_clock_seconds: float | None = None  # stderr log only, never emitted

    def canonical(self) -> dict:
        return {
            "command": self.command,
            "spec": self.spec,
            "seed": self.seed,
            "metrics": self.metrics,
            "analytic": self.analytic,
            "tool_version": self.tool_version,
        }


def _g17(value: float | None) -> str:
    if value is None:
        return ""
    return format(float(value), ".17g")


def emit(records: list[ResultRecord], fmt: str, stream: io.TextIOBase) -> None:
    """Write records as JSON lines or as the fixed-column CSV."""
    if fmt == "json":
        for rec in records:
            stream.write(json.dumps(rec.canonical(), sort_keys=True, separators=(",", ":")))
            stream.write("\n")
    elif fmt == "csv":
        stream.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            m, a = rec.metrics, rec.analytic
            row = (
                _g17(m.get("epsilon")),
                str(m.get("trials", "")),
                _g17(m.get("success")),
                _g17(a.get("success")),
                _g17(m.get("detection")),
                _g17(a.get("detection")),
                _g17(m.get("stderr")),
                str(rec.seed),
            )
            stream.write(",".join(row) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def parse_csv(text: str) -> list[dict]:
    """Inverse of the CSV emission (header + .17g numeric fields)."""
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    out = []
    for line in lines[1:]:
        row = {}
        for key, cell in zip(header, line.split(",")):
            if cell == "":
                row[key] = None
            elif key in ("trials", "seed"):
                row[key] = int(cell)
            else:
                row[key] = float(cell)
        out.append(row)
    return out


def _open_output(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    base = os.environ.get("RBELAB_OUTPUT_DIR")
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    return open(path, "w", encoding="utf-8", newline="\n"), True


def _strategy(protocol: str, attack: str, epsilon: float) -> EveStrategy:
    if attack == "none":
        return no_eve()
    if attack == "intercept_resend":
        return intercept_resend()
    if attack == "wm":
        if protocol in ("bb84", "bb84_informed"):
            return wm_attack_bb84(epsilon)
        if protocol == "dl04":
            return wm_attack_dl04(epsilon)
        return wm_attack_rbe(epsilon)
    raise ValueError(f"unknown attack {attack!r}")


def _analytic_for(protocol: str, attack: str, epsilon: float) -> dict:
    if attack != "wm":
        return {}
    curves = analytic_curves(epsilon)
    if protocol in ("bb84", "bb84_informed"):
        return {"success": curves.bb84_success, "detection": curves.bb84_detect}
    if protocol == "dl04":
        return {"success": curves.dl04_success, "detection": curves.dl04_detect}
    # random-basis protocol: the claim is "no advantage", detection has no
    # published reference value
    return {"success": 0.5, "detection": None}


def _game_record(args, epsilon: float) -> ResultRecord:
    config = ProtocolConfig(
        protocol=args.protocol,
        n=args.n,
        key_space=rbe.KeySpace("discrete", args.key_grid) if args.protocol == "rbe_qkd" else None,
        check_fraction=args.check_fraction,
    )
    eve = _strategy(args.protocol, args.attack, epsilon)
    start = time.perf_counter()
    result = key_bit_guessing_game(
        config, eve, args.trials, args.seed, mode=args.mode, workers=args.workers
    )
    elapsed = time.perf_counter() - start
    metrics = {
        "epsilon": epsilon,
        "trials": result.trials,
        "eve_outputs": result.eve_outputs,
        "eve_correct": result.eve_correct,
        "success": result.conditional_success,
        "guess_match_rate": result.guess_match_rate,
        "advantage": result.advantage,
        "detection": result.detection_rate,
        "checked_targets": result.checked_targets,
        "detected": result.detected,
        "key_agreement_failures": result.key_agreement_failures,
        "aborts": result.aborts,
        "stderr": result.standard_error,
    }
    return ResultRecord(
        command="qkd",
        spec={
            "protocol": args.protocol,
            "attack": args.attack,
            "epsilon": epsilon,
            "trials": args.trials,
            "n": args.n,
            "mode": args.mode,
            "check_fraction": args.check_fraction,
        },
        seed=args.seed,
        metrics=metrics,
        analytic=_analytic_for(args.protocol, args.attack, epsilon),
        wall_clock_seconds=elapsed,
    )


def _cmd_qkd(args) -> list[ResultRecord]:
    return [_game_record(args, args.epsilon)]


def _cmd_sweep(args) -> list[ResultRecord]:
    grid = sweep_grid(args.eps_from, args.eps_to, args.steps)
    records = []
    for eps in grid:
        rec = _game_record(args, float(eps))
        rec.command = "sweep"
        rec.spec["eps_from"], rec.spec["eps_to"], rec.spec["steps"] = (
            args.eps_from,
            args.eps_to,
            args.steps,
        )
        records.append(rec)
    return records


def _cmd_tree(args) -> list[ResultRecord]:
    tree = attack_outcome_tree(args.epsilon)
    curves = analytic_curves(args.epsilon)
    leaves = {
        f"a={a},b={b},bob={x},eve={y}": p for (a, b, x, y), p in sorted(tree.leaves.items())
    }
    return [
        ResultRecord(
            command="tree",
            spec={"epsilon": args.epsilon},
            seed=args.seed,
            metrics={
                "epsilon": args.epsilon,
                "eve_correct_mass": tree.eve_correct_mass,
                "bob_error_mass": tree.bob_error_mass,
                "undetected_miss_mass": tree.undetected_miss_mass,
                "total": tree.total(),
                "leaves": leaves,
            },
            analytic={
                "eve_correct_mass": curves.bb84_success,
                "bob_error_mass": curves.bb84_detect,
            },
        )
    ]


def _cmd_entangle(args) -> list[ResultRecord]:
    seed = args.seed
    kind = args.experiment
    if kind == "locking":
        qotp_gap = qcore.trace_distance(
            entangle.qotp_average_density(), qcore.DensityMatrix(np.eye(4) / 4.0)
        )
        rbe_gap = qcore.trace_distance(
            entangle.rbe_average_density(rbe.KeySpace("discrete", args.key_grid)),
            qcore.DensityMatrix(np.eye(4) / 4.0),
        )
        metrics = {"qotp_average_gap": qotp_gap, "rbe_average_gap": rbe_gap}
    elif kind in ("theft_qotp", "theft_rbe"):
        scheme = "qotp" if kind == "theft_qotp" else "rbe"
        spaces = {}
        if scheme == "rbe":
            grid = rbe.KeySpace("discrete", args.key_grid)
            spaces = {"key_space": grid, "guess_space": grid}
        report = entangle.theft_recovery_experiment(
            scheme, args.trials, seed, threshold=args.threshold, **spaces
        )
        metrics = {
            "empirical_rate": report.empirical_rate,
            "exact_rate": report.exact_rate,
            "exact_key_guess_rate": report.exact_key_guess_rate,
            "threshold": report.threshold,
            "trials": report.trials,
            "stderr": report.standard_error,
        }
    elif kind == "magic_square":
        rng = derive_rng(seed, "cli-magic")
        wins = 0
        for _ in range(args.plays):
            i, j = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            wins += entangle.magic_square_play(entangle.magic_square_resource(), i, j, rng).win
        metrics = {"plays": args.plays, "wins": wins, "win_rate": wins / args.plays}
    elif kind == "classical_bound":
        bound = entangle.magic_square_classical_bound()
        metrics = {
            "max_wins": bound.max_wins,
            "total_inputs": bound.total_inputs,
            "probability": bound.probability,
            "strategy_pairs": bound.strategy_pairs,
            "perfect_strategies": bound.perfect_strategies,
        }
    elif kind == "utility":
        report = entangle.locked_resource_utility(args.lock, args.plays, seed)
        metrics = {
            "lock": report.lock,
            "plays": report.plays,
            "wins": report.wins,
            "win_rate": report.win_rate,
            "stderr": report.standard_error,
        }
    elif kind == "sharing":
        report = entangle.secure_epr_sharing(
            args.intercept, seed, leak_key=args.leak_key, utility_plays=args.plays
        )
        metrics = {
            "eve_intercepts": report.eve_intercepts,
            "key_leaked": report.key_leaked,
            "fidelity": report.fidelity,
            "eve_marginal_gap": report.eve_marginal_gap,
            "utility_win_rate": report.utility.win_rate if report.utility else None,
        }
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(kind)
    return [
        ResultRecord(
            command="entangle",
            spec={"experiment": kind},
            seed=seed,
            metrics=metrics,
        )
    ]


def _selftest_checks(seed: int):
    """The exact-identity suite; yields (name, ok, detail)."""
    thetas = np.linspace(0.0, 2.0 * math.pi, 100)
    worst = 0.0
    for theta in thetas:
        for phi in (rbe.HALF_PI, -rbe.HALF_PI):
            key = rbe.RbeKey(float(theta), phi)
            basis = key.basis()
            flipped = qcore.apply(rbe.enc(0, key).qubit, qcore.X, [0])
            overlap = abs(np.vdot(basis.psi1, flipped.amplitudes))
            worst = max(worst, 1.0 - overlap)
    yield "homomorphic NOT phase identity", worst < 1e-12, f"max defect {worst:.3e}"

    worst = 0.0
    for theta in thetas[::7]:
        for phi in (rbe.HALF_PI, -rbe.HALF_PI):
            key = rbe.RbeKey(float(theta), phi)
            joint = rbe.eval_d(rbe.enc(0, key))
            probs = qcore.outcome_distribution(joint, [qcore.COMPUTATIONAL, key.basis()])
            marginal_one = float(probs[1] + probs[3])
            worst = max(worst, abs(marginal_one - 0.5))
    yield "balanced superposition marginal = 1/2", worst < 1e-12, f"max defect {worst:.3e}"

    worst = 0.0
    for theta in thetas[::11]:
        key = rbe.RbeKey(float(theta), rbe.HALF_PI)
        for n_controls in range(0, 5):
            for pattern in range(1 << n_controls):
                controls = [(pattern >> (n_controls - 1 - k)) & 1 for k in range(n_controls)]
                out = rbe.eval_cn_not(controls, rbe.enc(0, key))
                flip = all(controls) if controls else True
                expected_bit = 1 if flip else 0
                prefix = (
                    qcore.computational_state(controls)
                    if controls
                    else None
                )
                target = rbe.enc(expected_bit, key).qubit
                expected = qcore.tensor(prefix, target) if prefix else target
                if not qcore.equal_up_to_global_phase(out, expected, 1e-12):
                    worst = 1.0
    yield "cleartext-controlled NOT law", worst == 0.0, "all control patterns, n <= 4"

    worst = 0.0
    for theta in thetas:
        key = rbe.RbeKey(float(theta), rbe.HALF_PI)
        worst = max(worst, abs(rbe.hadamard_probe(key) - math.cos(theta) ** 2 / 2.0))
    yield "Hadamard probe = cos^2(theta)/2", worst < 1e-12, f"max defect {worst:.3e}"

    rng = derive_rng(seed, "selftest-closed-form")
    worst = 0.0
    for _ in range(2000):
        theta, theta0, phi0 = rng.uniform(0.0, 2.0 * math.pi, 3)
        phi = rbe.HALF_PI if rng.random() < 0.5 else -rbe.HALF_PI
        direct = abs(
            np.vdot(
                qcore.basis_from_angles(theta0, phi0).psi0,
                qcore.basis_from_angles(theta, phi).psi0,
            )
        ) ** 2
        closed = rbe.zero_outcome_closed_form(theta, phi, theta0, phi0)
        worst = max(worst, abs(direct - closed))
    yield "closed-form projection probability", worst < 1e-12, f"max defect {worst:.3e}"

    gaps = {n: rbe.density_gap(rbe.KeySpace("discrete", n)) for n in (3, 64, 4096)}
    ok = all(g < 1e-12 for g in gaps.values())
    n1 = rbe.density_gap(rbe.KeySpace("discrete", 1))
    yield "ciphertext density gap", ok and abs(n1 - 1.0) < 1e-12, (
        f"N in (3,64,4096): max {max(gaps.values()):.3e}; N=1: {n1:.6f}"
    )

    worst = 0.0
    for eps in np.linspace(0.0, 1.0, 101):
        tree = attack_outcome_tree(float(eps))
        worst = max(
            worst,
            abs(tree.eve_correct_mass - (0.5 + eps / 8.0)),
            abs(tree.bob_error_mass - eps / 4.0),
            abs(tree.total() - 1.0),
        )
    yield "conditioned attack tree masses", worst < 1e-12, f"max defect {worst:.3e}"

    rng = derive_rng(seed, "selftest-correctness")
    worst = 0.0
    for _ in range(1000):
        key = rbe.gen(rbe.CONTINUOUS, rng)
        bit = int(rng.integers(2))
        probs = rbe.decrypt_probabilities(rbe.enc(bit, key), key)
        worst = max(worst, abs(probs[bit] - 1.0))
    yield "perfect correctness", worst < 1e-12, f"max defect {worst:.3e}"


def _cmd_selftest(args) -> int:
    failures = 0
    for name, ok, detail in _selftest_checks(args.seed):
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {detail}")
        failures += not ok
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbelab",
        description="Seeded experiments for random-basis encryption and QKD attacks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p):
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--output", default=None, help="file path, or '-' for stdout")
        p.add_argument("--seed", type=int, required=True)

    st = sub.add_parser("selftest", help="run the exact-identity suite")
    st.add_argument("--seed", type=int, default=0)

    qkd = sub.add_parser("qkd", help="run one key-bit guessing game configuration")
    add_io(qkd)
    qkd.add_argument("--protocol", choices=("bb84", "bb84_informed", "dl04", "rbe_qkd"),
                     required=True)
    qkd.add_argument("--attack", choices=("none", "wm", "intercept_resend"), default="none")
    qkd.add_argument("--epsilon", type=float, default=0.0)
    qkd.add_argument("--trials", type=int, required=True)
    qkd.add_argument("--n", type=int, default=8, help="key length for full-pipeline runs")
    qkd.add_argument("--mode", choices=("auto", "full", "conditioned"), default="auto")
    qkd.add_argument("--workers", type=int, default=1)
    qkd.add_argument("--check-fraction", type=float, default=0.5, dest="check_fraction")
    qkd.add_argument("--key-grid", type=int, default=4096, dest="key_grid",
                     help="discrete key grid size for the random-basis protocol")

    sw = sub.add_parser("sweep", help="epsilon sweep with analytic reference columns")
    add_io(sw)
    sw.add_argument("--protocol", choices=("bb84", "bb84_informed", "dl04", "rbe_qkd"),
                    required=True)
    sw.add_argument("--attack", choices=("wm",), default="wm")
    sw.add_argument("--eps-from", type=float, required=True, dest="eps_from")
    sw.add_argument("--eps-to", type=float, required=True, dest="eps_to")
    sw.add_argument("--steps", type=int, required=True)
    sw.add_argument("--trials", type=int, required=True)
    sw.add_argument("--n", type=int, default=8)
    sw.add_argument("--mode", choices=("auto", "full", "conditioned"), default="auto")
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--check-fraction", type=float, default=0.5, dest="check_fraction")
    sw.add_argument("--key-grid", type=int, default=4096, dest="key_grid")

    tr = sub.add_parser("tree", help="exact conditioned attack tree for one epsilon")
    add_io(tr)
    tr.add_argument("--epsilon", type=float, required=True)

    en = sub.add_parser("entangle", help="entanglement locking and game experiments")
    add_io(en)
    en.add_argument(
        "--experiment",
        choices=("locking", "theft_qotp", "theft_rbe", "magic_square",
                 "classical_bound", "utility", "sharing"),
        required=True,
    )
    en.add_argument("--trials", type=int, default=10000)
    en.add_argument("--plays", type=int, default=1000)
    en.add_argument("--threshold", type=float, default=1.0 - 1e-9)
    en.add_argument("--key-grid", type=int, default=64, dest="key_grid")
    en.add_argument("--lock", choices=entangle.LOCK_KINDS, default="rbe_unknown_keys")
    en.add_argument("--intercept", action="store_true")
    en.add_argument("--leak-key", action="store_true", dest="leak_key")
    return parser


_COMMANDS = {
    "qkd": _cmd_qkd,
    "sweep": _cmd_sweep,
    "tree": _cmd_tree,
    "entangle": _cmd_entangle,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "selftest":
        return _cmd_selftest(args)
    if args.command == "tree" and args.format == "csv":
        parser.error("the tree command emits json only")
    if getattr(args, "trials", 1) is not None and getattr(args, "trials", 1) < 1:
        parser.error("--trials must be >= 1")
    try:
        records = _COMMANDS[args.command](args)
        stream, owned = _open_output(args.output)
        try:
            emit(records, args.format, stream)
        finally:
            if owned:
                stream.close()
    except OSError as exc:
        print(f"rbelab: i/o error: {exc}", file=sys.stderr)
        return 1
    total_wall = sum(r.wall_clock_seconds or 0.0 for r in records)
    print(
        f"# rbelab {__version__} command={args.command} seed={args.seed} "
        f"records={len(records)} wall_clock_s={total_wall:.3f}",
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
