"""Experiment orchestration: multi-seed runs, sweeps, persistence.

An experiment is a set of conditions (one per sweep value of the niche
bonus, plus requested baselines) run for ``n_trials`` seeded trials each.
Trial i of every condition uses seed ``seed_base + i``, so conditions are
paired across identical noise streams and results do not depend on the
order conditions are executed in.

Artifacts written to the output directory:

- ``trials.csv``    one row per (condition, trial)
- ``sweep.csv``     niche-bonus value vs mean/std specialization
- ``summary.json``  the full report, including statistics and theory checks
- ``conditions/<label>/trials.csv``       per-condition rows
- ``conditions/<label>/iterations.csv``   optional per-iteration log

Baseline conditions run with the niche bonus disabled: the baselines have
no niche mechanism of their own, so their specialization is measured under
the same update dynamics but without bonus-shaped scores.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .analysis import (
    BoundCheck,
    CollapseReport,
    StatResult,
    prop2_bound_check,
    prop3_collapse_check,
    two_sample_t_test,
)
from .core import effective_regime_count
from .env import EnvironmentSpec, resolve_environment
from .population import (
    BaselineKind,
    EngineConfig,
    TrialRecord,
    affinity_update,
    run_baseline,
    run_trial,
)

DEFAULT_SWEEP = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)

TRIALS_COLUMNS = (
    "condition",
    "lambda",
    "seed",
    "mean_si",
    "effective_si",
    "coverage",
    "msi_mean",
    "distinct_niches",
)

SWEEP_COLUMNS = ("environment", "lambda", "mean_si", "std_si")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    environment: str | dict | EnvironmentSpec = "generic4"
    engine: EngineConfig = field(default_factory=EngineConfig)
    n_trials: int = 30
    seed_base: int = 42
    sweep: tuple[float, ...] | None = DEFAULT_SWEEP
    baselines: tuple[BaselineKind, ...] = (BaselineKind.HOMOGENEOUS, BaselineKind.RANDOM)
    output_dir: str = "results"
    iterations_csv: bool = False

    def __post_init__(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials: must be >= 1")
        if self.sweep is not None:
            vals = tuple(float(v) for v in self.sweep)
            if any(v < 0 for v in vals):
                raise ConfigError("sweep: values must be >= 0")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ConfigError("sweep: values must be strictly increasing")
            object.__setattr__(self, "sweep", vals)
        object.__setattr__(
            self, "baselines", tuple(BaselineKind(b) for b in self.baselines)
        )

    def to_dict(self) -> dict:
        env = self.environment
        if isinstance(env, EnvironmentSpec):
            env = env.name
        return {
            "environment": env,
            "engine": self.engine.to_dict(),
            "n_trials": self.n_trials,
            "seed_base": self.seed_base,
            "sweep": list(self.sweep) if self.sweep is not None else None,
            "baselines": [b.value for b in self.baselines],
            "output_dir": str(self.output_dir),
            "iterations_csv": self.iterations_csv,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config: expected a mapping at the top level")
        data = dict(raw)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"config: unknown fields {sorted(unknown)}")
        if "engine" in data and data["engine"] is not None:
            try:
                data["engine"] = EngineConfig.from_dict(data["engine"])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"engine: {exc}") from exc
        if "sweep" in data and data["sweep"] is not None:
            data["sweep"] = tuple(data["sweep"])
        if "baselines" in data and data["baselines"] is not None:
            try:
                data["baselines"] = tuple(BaselineKind(str(b).lower()) for b in data["baselines"])
            except ValueError as exc:
                raise ConfigError(f"baselines: {exc}") from exc
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"config: {exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse an experiment config from a YAML file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: {path}: {exc}") from exc
    if raw is None:
        raw = {}
    return ExperimentConfig.from_dict(raw)


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)


@dataclass(frozen=True)
class ConditionResult:
    label: str
    lam: float | None
    baseline: BaselineKind | None
    trials: tuple[TrialRecord, ...]
    wall_clock_s: float

    def trial_rows(self) -> list[dict]:
        rows = []
        for rec in self.trials:
            msi_mean = float(np.mean(rec.summary.msi_per_agent))
            rows.append(
                {
                    "condition": self.label,
                    "lambda": rec.config.lam,
                    "seed": rec.seed,
                    "mean_si": rec.summary.mean_si,
                    "effective_si": rec.summary.effective_si,
                    "coverage": rec.summary.coverage,
                    "msi_mean": msi_mean,
                    "distinct_niches": rec.summary.distinct_primary_niches,
                }
            )
        return rows

    def aggregates(self) -> dict:
        rows = self.trial_rows()
        out = {"n_trials": len(rows), "wall_clock_s": self.wall_clock_s}
        for key in ("mean_si", "effective_si", "coverage", "msi_mean", "distinct_niches"):
            vals = np.array([r[key] for r in rows], dtype=float)
            out[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
        return out


@dataclass(frozen=True)
class ExperimentReport:
    environment_name: str
    config: ExperimentConfig
    conditions: tuple[ConditionResult, ...]
    vs_homogeneous: StatResult | None
    vs_random: StatResult | None
    bound_checks: tuple[BoundCheck, ...]
    collapse_check: CollapseReport | None

    def condition(self, label: str) -> ConditionResult:
        for cond in self.conditions:
            if cond.label == label:
                return cond
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {
            "environment": self.environment_name,
            "config": self.config.to_dict(),
            "conditions": [
                {
                    "label": c.label,
                    "lambda": c.lam,
                    "baseline": c.baseline.value if c.baseline else None,
                    "aggregates": c.aggregates(),
                    "trials": c.trial_rows(),
                }
                for c in self.conditions
            ],
            "stats": {
                "vs_homogeneous": self.vs_homogeneous.to_dict() if self.vs_homogeneous else None,
                "vs_random": self.vs_random.to_dict() if self.vs_random else None,
            },
            "theory": {
                "bound_checks": [b.to_dict() for b in self.bound_checks],
                "collapse_check": self.collapse_check.to_dict() if self.collapse_check else None,
            },
        }


def condition_label(lam: float | None, baseline: BaselineKind | None) -> str:
    if baseline is not None:
        return baseline.value
    return f"lambda_{lam:g}"


def _run_condition(
    env: EnvironmentSpec,
    engine: EngineConfig,
    n_trials: int,
    seed_base: int,
    baseline: BaselineKind | None,
) -> ConditionResult:
    start = time.perf_counter()
    trials = []
    for i in range(n_trials):
        seed = seed_base + i
        if baseline is None:
            trials.append(run_trial(env, engine, seed))
        else:
            trials.append(run_baseline(env, engine, baseline, seed))
    return ConditionResult(
        label=condition_label(engine.lam if baseline is None else None, baseline),
        lam=engine.lam if baseline is None else None,
        baseline=baseline,
        trials=tuple(trials),
        wall_clock_s=time.perf_counter() - start,
    )


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Run every condition of an experiment and persist the artifacts."""
    try:
        env = resolve_environment(cfg.environment)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"environment: {exc}") from exc
    try:
        cfg.engine.validate_for(env)
    except ValueError as exc:
        raise ConfigError(f"engine: {exc}") from exc

    conditions: list[ConditionResult] = []
    sweep = cfg.sweep if cfg.sweep is not None else ()
    for lam in sweep:
        engine = dataclasses.replace(cfg.engine, lam=lam)
        conditions.append(_run_condition(env, engine, cfg.n_trials, cfg.seed_base, None))
    for kind in cfg.baselines:
        engine = dataclasses.replace(cfg.engine, lam=0.0)
        conditions.append(_run_condition(env, engine, cfg.n_trials, cfg.seed_base, kind))

    by_label = {c.label: c for c in conditions}

    def _si(label: str) -> np.ndarray:
        return np.array([t.summary.mean_si for t in by_label[label].trials])

    reference = condition_label(cfg.engine.lam, None)
    if reference not in by_label and sweep:
        reference = condition_label(sweep[-1], None)
    vs_homo = vs_rand = None
    if reference in by_label and cfg.n_trials >= 2:
        if BaselineKind.HOMOGENEOUS.value in by_label:
            vs_homo = two_sample_t_test(
                _si(reference), _si(BaselineKind.HOMOGENEOUS.value), k_comparisons=2
            )
        if BaselineKind.RANDOM.value in by_label:
            vs_rand = two_sample_t_test(
                _si(reference), _si(BaselineKind.RANDOM.value), k_comparisons=2
            )

    bound_checks = []
    if env.n_regimes >= 2 and cfg.n_trials >= 2:
        for lam in sweep:
            if lam <= 0:
                continue
            bound_checks.append(
                prop2_bound_check(
                    lam,
                    cfg.engine.eta,
                    cfg.engine.iterations,
                    env.n_regimes,
                    _si(condition_label(lam, None)),
                )
            )

    collapse = None
    if effective_regime_count(env.process.stationary) < 1.0 + 1e-9 and sweep:
        summaries = [t.summary for t in by_label[condition_label(sweep[-1], None)].trials]
        collapse = prop3_collapse_check(summaries)

    report = ExperimentReport(
        environment_name=env.name,
        config=cfg,
        conditions=tuple(conditions),
        vs_homogeneous=vs_homo,
        vs_random=vs_rand,
        bound_checks=tuple(bound_checks),
        collapse_check=collapse,
    )
    if write:
        write_artifacts(report, Path(cfg.output_dir), iterations=cfg.iterations_csv)
    return report


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[dict]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) if not isinstance(row[c], str) else row[c] for c in columns])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _iteration_rows(cond: ConditionResult) -> tuple[tuple[str, ...], list[dict]]:
    first = cond.trials[0]
    n_agents = first.config.n_agents
    n_regimes = len(first.final_agents[0].affinity)
    alpha_cols = tuple(
        f"alpha_{i}_{r}" for i in range(n_agents) for r in range(n_regimes)
    )
    columns = ("condition", "lambda", "seed", "t", "regime", "winner", "winner_method", "winner_score") + alpha_cols
    rows = []
    for rec in cond.trials:
        # replay the affinity dynamics from the log; the update depends only
        # on (winner, regime), so the full trajectory is reconstructible
        alphas = [
            np.full(n_regimes, 1.0 / n_regimes) for _ in range(n_agents)
        ]
        for it in rec.iterations:
            alphas[it.winner] = affinity_update(
                alphas[it.winner], it.regime, rec.config.eta, rec.config.affinity_floor
            )
            row = {
                "condition": cond.label,
                "lambda": rec.config.lam,
                "seed": rec.seed,
                "t": it.t,
                "regime": it.regime,
                "winner": it.winner,
                "winner_method": it.selections[it.winner],
                "winner_score": it.scores[it.winner],
            }
            for i in range(n_agents):
                for r in range(n_regimes):
                    row[f"alpha_{i}_{r}"] = alphas[i][r]
            rows.append(row)
    return columns, rows


def write_artifacts(
    report: ExperimentReport, out_dir: Path, iterations: bool = False
) -> None:
    """Write trials.csv, sweep.csv, summary.json and per-condition files."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc

    all_rows = []
    for cond in report.conditions:
        all_rows.extend(cond.trial_rows())
    _write_csv(out_dir / "trials.csv", TRIALS_COLUMNS, all_rows)

    sweep_rows = []
    for cond in report.conditions:
        if cond.baseline is not None:
            continue
        sis = np.array([t.summary.mean_si for t in cond.trials])
        sweep_rows.append(
            {
                "environment": report.environment_name,
                "lambda": cond.lam,
                "mean_si": float(sis.mean()),
                "std_si": float(sis.std()),
            }
        )
    _write_csv(out_dir / "sweep.csv", SWEEP_COLUMNS, sweep_rows)

    (out_dir / "summary.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    for cond in report.conditions:
        cond_dir = out_dir / "conditions" / cond.label
        cond_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(cond_dir / "trials.csv", TRIALS_COLUMNS, cond.trial_rows())
        if iterations:
            columns, rows = _iteration_rows(cond)
            _write_csv(cond_dir / "iterations.csv", columns, rows)


# primary entry point for persistence; kept under both names since callers
# think of it as "emit the CSVs for this report"
emit_csv = write_artifacts


def read_trials_csv(path: str | Path) -> list[dict]:
    """Parse a trials.csv back into typed rows."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(TRIALS_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ConfigError(f"trials.csv: missing columns {sorted(missing)}")
        for raw in reader:
            rows.append(
                {
                    "condition": raw["condition"],
                    "lambda": float(raw["lambda"]),
                    "seed": int(raw["seed"]),
                    "mean_si": float(raw["mean_si"]),
                    "effective_si": float(raw["effective_si"]),
                    "coverage": float(raw["coverage"]),
                    "msi_mean": float(raw["msi_mean"]),
                    "distinct_niches": float(raw["distinct_niches"]),
                }
            )
    return rows


def reaggregate(out_dir: str | Path) -> dict:
    """Recompute per-condition aggregates from a persisted trials.csv.

    Returns a summary mapping and rewrites sweep.csv alongside it; used by
    the ``report`` CLI subcommand and the self-consistency checks.
    """
    out_dir = Path(out_dir)
    rows = read_trials_csv(out_dir / "trials.csv")
    if not rows:
        raise ConfigError("trials.csv: no trial rows to aggregate")
    by_label: dict[str, list[dict]] = {}
    order: list[str] = []
    for row in rows:
        if row["condition"] not in by_label:
            order.append(row["condition"])
        by_label.setdefault(row["condition"], []).append(row)

    summary: dict = {"conditions": {}}
    env_name = None
    summary_path = out_dir / "summary.json"
    if summary_path.exists():
        env_name = json.loads(summary_path.read_text(encoding="utf-8")).get("environment")

    sweep_rows = []
    for label in order:
        group = by_label[label]
        agg = {}
        for key in ("mean_si", "effective_si", "coverage", "msi_mean", "distinct_niches"):
            vals = np.array([g[key] for g in group], dtype=float)
            agg[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
        agg["n_trials"] = len(group)
        summary["conditions"][label] = agg
        if label.startswith("lambda_"):
            sis = np.array([g["mean_si"] for g in group])
            sweep_rows.append(
                {
                    "environment": env_name or "unknown",
                    "lambda": group[0]["lambda"],
                    "mean_si": float(sis.mean()),
                    "std_si": float(sis.std()),
                }
            )
    if sweep_rows:
        _write_csv(out_dir / "sweep.csv", SWEEP_COLUMNS, sweep_rows)
    return summary
