"""Command-line interface.

Subcommands
-----------
simulate   run one condition (an engine configuration on one environment)
sweep      run the niche-bonus ablation across a list of bonus values
baselines  engine vs homogeneous-oracle vs random-selection, with statistics
theory     run the three theory checks (the collapse check forces mono1)
report     re-aggregate summaries from an existing trials.csv

``--config FILE`` loads a YAML experiment config; explicit flags override
file values, and the NICHEPOP_SEED environment variable overrides the
file's seed_base (but not an explicit --seed).

Exit codes: 0 success, 1 configuration/usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from itertools import combinations_with_replacement
from pathlib import Path

import numpy as np

from .analysis import prop1_deviation_check, prop2_bound_check, prop3_collapse_check
from .env import BUILTIN_NAMES, resolve_environment
from .harness import (
    DEFAULT_SWEEP,
    ConfigError,
    ExperimentConfig,
    condition_label,
    load_config,
    reaggregate,
    run_experiment,
)
from .population import BaselineKind, BeliefUpdate, BonusMode, EngineConfig, run_trial

SEED_ENV_VAR = "NICHEPOP_SEED"


class _UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract here is exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nichepop", description=__doc__.split("\n")[0] if __doc__ else None)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add_common(p, trials=True):
        p.add_argument("--config", type=str, help="YAML experiment config file")
        p.add_argument("--env", type=str, help=f"environment preset ({', '.join(BUILTIN_NAMES)})")
        p.add_argument("--lambda", dest="lam", type=float, help="niche bonus coefficient")
        p.add_argument("--eta", type=float, help="affinity learning rate")
        p.add_argument("--agents", type=int, help="population size")
        p.add_argument("--iters", type=int, help="iterations per trial")
        if trials:
            p.add_argument("--trials", type=int, help="trials per condition")
        p.add_argument("--seed", type=int, help="seed base (trial i uses seed+i)")
        p.add_argument(
            "--bonus-mode", choices=[m.value for m in BonusMode], help="niche bonus formula"
        )
        p.add_argument(
            "--belief-update",
            choices=[m.value for m in BeliefUpdate],
            help="winner belief increment rule",
        )
        p.add_argument("--out", type=str, help="output directory")

    p_sim = sub.add_parser("simulate", help="run one condition")
    add_common(p_sim)
    p_sim.add_argument(
        "--iterations-csv", action="store_true", default=None,
        help="also write per-iteration logs",
    )

    p_sweep = sub.add_parser("sweep", help="niche-bonus ablation")
    add_common(p_sweep)
    p_sweep.add_argument(
        "--sweep", type=str, help="comma-separated bonus values (default 0.0,...,0.5)"
    )

    p_base = sub.add_parser("baselines", help="engine vs homogeneous vs random")
    add_common(p_base)

    p_theory = sub.add_parser("theory", help="run the three theory checks")
    add_common(p_theory)

    p_report = sub.add_parser("report", help="re-aggregate existing trial CSVs")
    p_report.add_argument("--out", type=str, required=True, help="directory holding trials.csv")

    return parser


def _merge_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()

    seed_base = cfg.seed_base
    if os.environ.get(SEED_ENV_VAR):
        try:
            seed_base = int(os.environ[SEED_ENV_VAR])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR}: not an integer") from exc
    if getattr(args, "seed", None) is not None:
        seed_base = args.seed

    engine_overrides = {}
    for flag, fld in (
        ("lam", "lam"),
        ("eta", "eta"),
        ("agents", "n_agents"),
        ("iters", "iterations"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            engine_overrides[fld] = value
    if getattr(args, "bonus_mode", None) is not None:
        engine_overrides["bonus_mode"] = BonusMode(args.bonus_mode)
    if getattr(args, "belief_update", None) is not None:
        engine_overrides["belief_update"] = BeliefUpdate(args.belief_update)
    try:
        engine = dataclasses.replace(cfg.engine, **engine_overrides)
    except ValueError as exc:
        raise ConfigError(f"engine: {exc}") from exc

    overrides: dict = {"engine": engine, "seed_base": seed_base}
    if getattr(args, "env", None) is not None:
        overrides["environment"] = args.env
    if getattr(args, "trials", None) is not None:
        overrides["n_trials"] = args.trials
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    if getattr(args, "iterations_csv", None) is not None:
        overrides["iterations_csv"] = args.iterations_csv
    if getattr(args, "sweep", None) is not None:
        try:
            overrides["sweep"] = tuple(float(v) for v in args.sweep.split(","))
        except ValueError as exc:
            raise ConfigError(f"sweep: {exc}") from exc
    return dataclasses.replace(cfg, **overrides)


def _print_condition_table(report) -> None:
    print(f"environment: {report.environment_name}")
    print(f"{'condition':<16} {'mean SI':>9} {'std':>7} {'eff SI':>8} {'coverage':>9} {'MSI':>7}")
    for cond in report.conditions:
        agg = cond.aggregates()
        print(
            f"{cond.label:<16} {agg['mean_si']['mean']:>9.3f} {agg['mean_si']['std']:>7.3f}"
            f" {agg['effective_si']['mean']:>8.3f} {agg['coverage']['mean']:>9.3f}"
            f" {agg['msi_mean']['mean']:>7.3f}"
        )


def _print_stats(report) -> None:
    for name, stat in (
        ("vs homogeneous", report.vs_homogeneous),
        ("vs random", report.vs_random),
    ):
        if stat is None:
            continue
        print(
            f"{name}: d={stat.cohens_d:.2f} t={stat.t_statistic:.2f} p={stat.p_value:.3g}"
            f" (threshold {stat.bonferroni_alpha:.4f});"
            f" mean {stat.mean_a:.3f} [{stat.ci_low:.3f}, {stat.ci_high:.3f}] vs {stat.mean_b:.3f}"
        )


def _cmd_simulate(args) -> int:
    cfg = _merge_config(args)
    cfg = dataclasses.replace(cfg, sweep=(cfg.engine.lam,), baselines=())
    report = run_experiment(cfg)
    _print_condition_table(report)
    print(f"artifacts written to {cfg.output_dir}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _merge_config(args)
    if cfg.sweep is None:
        cfg = dataclasses.replace(cfg, sweep=DEFAULT_SWEEP)
    cfg = dataclasses.replace(cfg, baselines=())
    report = run_experiment(cfg)
    _print_condition_table(report)
    for check in report.bound_checks:
        verdict = "PASS" if check.satisfied else "FAIL"
        print(
            f"bound lambda={check.lam:g}: predicted >= {check.predicted_lower_bound:.3f},"
            f" observed {check.observed_mean_si:.3f} -> {verdict}"
        )
    print(f"artifacts written to {cfg.output_dir}")
    return 0


def _cmd_baselines(args) -> int:
    cfg = _merge_config(args)
    cfg = dataclasses.replace(
        cfg,
        sweep=(cfg.engine.lam,),
        baselines=(BaselineKind.HOMOGENEOUS, BaselineKind.RANDOM),
    )
    report = run_experiment(cfg)
    _print_condition_table(report)
    _print_stats(report)
    print(f"artifacts written to {cfg.output_dir}")
    return 0


def _compositions(total: int, parts: int):
    for cuts in combinations_with_replacement(range(total + 1), parts - 1):
        bounds = (0,) + cuts + (total,)
        yield tuple(bounds[i + 1] - bounds[i] for i in range(parts))


def _cmd_theory(args) -> int:
    cfg = _merge_config(args)
    env = resolve_environment(cfg.environment)

    # claim 1: payoff-deviation analysis over all occupancies of N agents
    n, r = cfg.engine.n_agents, max(env.n_regimes, 2)
    values = np.ones(r)
    crowded = profitable = 0
    equilibria = []
    for occ in _compositions(n, r):
        if max(occ) < 2:
            continue
        crowded += 1
        if prop1_deviation_check(values, occ).profitable:
            profitable += 1
        else:
            equilibria.append(occ)
    print(
        f"prop1 (N={n}, R={r}, uniform values): profitable deviation in"
        f" {profitable}/{crowded} crowded occupancies"
    )
    if equilibria:
        shown = ", ".join(str(e) for e in equilibria[:4])
        print(f"prop1: occupancies with no profitable move (equilibrium candidates): {shown}")

    # claim 2: bound check on this environment across the positive sweep
    sweep = tuple(v for v in (cfg.sweep or DEFAULT_SWEEP) if v > 0)
    if env.n_regimes < 2:
        sweep = ()
        print("prop2: skipped (bound needs at least two regimes)")
    for lam in sweep:
        sis = []
        engine = dataclasses.replace(cfg.engine, lam=lam)
        for i in range(cfg.n_trials):
            sis.append(run_trial(env, engine, cfg.seed_base + i).summary.mean_si)
        check = prop2_bound_check(
            lam, cfg.engine.eta, cfg.engine.iterations, env.n_regimes, sis
        )
        verdict = "PASS" if check.satisfied else "FAIL"
        print(
            f"prop2 lambda={lam:g}: bound {check.predicted_lower_bound:.3f},"
            f" observed {check.observed_mean_si:.3f} -> {verdict}"
        )

    # claim 3: collapse always measured on the single-regime preset
    mono = resolve_environment("mono1")
    summaries = [
        run_trial(mono, cfg.engine, cfg.seed_base + i).summary for i in range(cfg.n_trials)
    ]
    collapse = prop3_collapse_check(summaries)
    verdict = "PASS" if collapse.passed else "FAIL"
    print(
        f"prop3 (mono1, {collapse.n_trials} trials): mean effective SI"
        f" {collapse.mean_effective_si:.4f}, single-niche share"
        f" {collapse.share_single_niche:.2f} -> {verdict}"
    )
    return 0


def _cmd_report(args) -> int:
    summary = reaggregate(Path(args.out))
    print(f"{'condition':<16} {'mean SI':>9} {'std':>7} {'eff SI':>8} {'coverage':>9}")
    for label, agg in summary["conditions"].items():
        print(
            f"{label:<16} {agg['mean_si']['mean']:>9.3f} {agg['mean_si']['std']:>7.3f}"
            f" {agg['effective_si']['mean']:>8.3f} {agg['coverage']['mean']:>9.3f}"
        )
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "baselines": _cmd_baselines,
    "theory": _cmd_theory,
    "report": _cmd_report,
}


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
