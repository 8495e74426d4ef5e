import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from nichepop.env import builtin_environment
from nichepop.harness import (
    SWEEP_COLUMNS,
    TRIALS_COLUMNS,
    ConfigError,
    ExperimentConfig,
    load_config,
    read_trials_csv,
    reaggregate,
    run_experiment,
    save_config,
)
from nichepop.population import BaselineKind, BonusMode, EngineConfig, run_trial

FAST_ENGINE = EngineConfig(iterations=40)


def fast_config(tmp_path, **overrides):
    base = dict(
        environment="generic4",
        engine=FAST_ENGINE,
        n_trials=2,
        seed_base=42,
        sweep=(0.0, 0.3),
        baselines=(),
        output_dir=str(tmp_path / "out"),
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.n_trials == 30
        assert cfg.seed_base == 42
        assert cfg.sweep == (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
        assert cfg.baselines == (BaselineKind.HOMOGENEOUS, BaselineKind.RANDOM)

    def test_sweep_must_increase(self):
        with pytest.raises(ConfigError, match="sweep"):
            ExperimentConfig(sweep=(0.3, 0.1))
        with pytest.raises(ConfigError, match="sweep"):
            ExperimentConfig(sweep=(0.1, 0.1))

    def test_sweep_must_be_nonnegative(self):
        with pytest.raises(ConfigError, match="sweep"):
            ExperimentConfig(sweep=(-0.1, 0.3))

    def test_trials_positive(self):
        with pytest.raises(ConfigError, match="n_trials"):
            ExperimentConfig(n_trials=0)

    def test_unknown_field_named(self):
        with pytest.raises(ConfigError, match="unknown fields"):
            ExperimentConfig.from_dict({"trials": 3})

    def test_engine_error_carries_path(self):
        with pytest.raises(ConfigError, match="engine"):
            ExperimentConfig.from_dict({"engine": {"eta": 2.0}})

    def test_yaml_roundtrip(self, tmp_path):
        cfg = ExperimentConfig(
            environment="crypto4",
            engine=EngineConfig(lam=0.2, bonus_mode=BonusMode.CENTERED_ADDITIVE),
            n_trials=5,
            seed_base=7,
            sweep=(0.0, 0.2),
            baselines=(BaselineKind.RANDOM,),
            output_dir="somewhere",
        )
        path = tmp_path / "cfg.yaml"
        save_config(cfg, path)
        loaded = load_config(path)
        assert loaded == cfg
        assert loaded.to_dict() == cfg.to_dict()

    def test_yaml_lambda_field_name(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("engine:\n  lambda: 0.4\n", encoding="utf-8")
        assert load_config(path).engine.lam == 0.4

    def test_inline_environment(self, tmp_path):
        raw = {
            "environment": {
                "affinity": {
                    "values": [[0.9, 0.3], [0.2, 0.8]],
                    "regime_names": ["a", "b"],
                    "method_names": ["x", "y"],
                },
                "process": {"kind": "iid", "stationary": [0.5, 0.5]},
            },
            "engine": {"iterations": 10, "n_agents": 2},
            "n_trials": 1,
            "sweep": [0.3],
            "baselines": [],
        }
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump(raw), encoding="utf-8")
        cfg = load_config(path)
        cfg = dataclasses.replace(cfg, output_dir=str(tmp_path / "o"))
        report = run_experiment(cfg)
        assert report.environment_name == "custom"

    def test_malformed_yaml(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("engine: [unclosed", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)


class TestRunExperiment:
    def test_single_condition_single_trial(self, tmp_path):
        cfg = fast_config(tmp_path, sweep=(0.3,), n_trials=1)
        report = run_experiment(cfg)
        assert len(report.conditions) == 1
        assert len(report.conditions[0].trials) == 1
        rows = read_trials_csv(Path(cfg.output_dir) / "trials.csv")
        assert len(rows) == 1

    def test_condition_directories(self, tmp_path):
        cfg = fast_config(
            tmp_path,
            sweep=(0.0, 0.1, 0.2, 0.3, 0.4, 0.5),
            baselines=(BaselineKind.HOMOGENEOUS, BaselineKind.RANDOM),
        )
        run_experiment(cfg)
        dirs = sorted(p.name for p in (Path(cfg.output_dir) / "conditions").iterdir())
        assert len(dirs) == 8
        assert "homogeneous" in dirs and "random" in dirs

    def test_unknown_environment_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError, match="environment"):
            run_experiment(fast_config(tmp_path, environment="marsbase"))

    def test_trial_seeds_are_paired_across_conditions(self, tmp_path):
        cfg = fast_config(tmp_path, n_trials=3)
        report = run_experiment(cfg, write=False)
        for cond in report.conditions:
            assert [t.seed for t in cond.trials] == [42, 43, 44]

    def test_condition_matches_direct_run(self, tmp_path):
        cfg = fast_config(tmp_path, sweep=(0.3,), n_trials=2)
        report = run_experiment(cfg, write=False)
        env = builtin_environment("generic4")
        direct = run_trial(env, dataclasses.replace(FAST_ENGINE, lam=0.3), 43)
        assert report.conditions[0].trials[1].summary == direct.summary

    def test_stats_present_with_baselines(self, tmp_path):
        cfg = fast_config(
            tmp_path,
            sweep=(0.3,),
            n_trials=3,
            baselines=(BaselineKind.HOMOGENEOUS, BaselineKind.RANDOM),
        )
        report = run_experiment(cfg, write=False)
        assert report.vs_homogeneous is not None
        assert report.vs_random is not None
        assert report.vs_homogeneous.n_a == 3

    def test_bound_checks_cover_positive_sweep(self, tmp_path):
        cfg = fast_config(tmp_path, sweep=(0.0, 0.2, 0.4), n_trials=2)
        report = run_experiment(cfg, write=False)
        assert [b.lam for b in report.bound_checks] == [0.2, 0.4]

    def test_collapse_check_only_for_mono_regime(self, tmp_path):
        cfg = fast_config(tmp_path, environment="mono1", sweep=(0.3,), n_trials=2)
        report = run_experiment(cfg, write=False)
        assert report.collapse_check is not None
        assert report.collapse_check.passed
        cfg = fast_config(tmp_path, sweep=(0.3,), n_trials=2)
        assert run_experiment(cfg, write=False).collapse_check is None


class TestArtifacts:
    def test_trials_csv_schema(self, tmp_path):
        cfg = fast_config(tmp_path)
        run_experiment(cfg)
        header = (Path(cfg.output_dir) / "trials.csv").read_text().splitlines()[0]
        assert header == ",".join(TRIALS_COLUMNS)

    def test_sweep_csv_rows_match_sweep(self, tmp_path):
        cfg = fast_config(tmp_path, sweep=(0.0, 0.2, 0.4))
        run_experiment(cfg)
        lines = (Path(cfg.output_dir) / "sweep.csv").read_text().splitlines()
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert len(lines) == 1 + 3

    def test_no_iterations_csv_by_default(self, tmp_path):
        cfg = fast_config(tmp_path, sweep=(0.3,))
        run_experiment(cfg)
        cond_dir = Path(cfg.output_dir) / "conditions" / "lambda_0.3"
        assert (cond_dir / "trials.csv").exists()
        assert not (cond_dir / "iterations.csv").exists()

    def test_iterations_csv_replays_affinities(self, tmp_path):
        cfg = fast_config(tmp_path, sweep=(0.3,), n_trials=1, iterations_csv=True)
        report = run_experiment(cfg)
        cond_dir = Path(cfg.output_dir) / "conditions" / "lambda_0.3"
        lines = (cond_dir / "iterations.csv").read_text().splitlines()
        assert len(lines) == 1 + FAST_ENGINE.iterations
        header = lines[0].split(",")
        final = dict(zip(header, lines[-1].split(",")))
        agents = report.conditions[0].trials[0].final_agents
        for i, agent in enumerate(agents):
            for r in range(4):
                assert float(final[f"alpha_{i}_{r}"]) == pytest.approx(
                    agent.affinity[r], abs=1e-12
                )

    def test_aggregates_match_recomputation(self, tmp_path):
        cfg = fast_config(tmp_path, baselines=(BaselineKind.RANDOM,), n_trials=3)
        report = run_experiment(cfg)
        summary = reaggregate(Path(cfg.output_dir))
        persisted = json.loads((Path(cfg.output_dir) / "summary.json").read_text())
        for cond in persisted["conditions"]:
            recomputed = summary["conditions"][cond["label"]]
            for key in ("mean_si", "effective_si", "coverage", "msi_mean"):
                assert recomputed[key]["mean"] == pytest.approx(
                    cond["aggregates"][key]["mean"], abs=1e-9
                )
                assert recomputed[key]["std"] == pytest.approx(
                    cond["aggregates"][key]["std"], abs=1e-9
                )

    def test_byte_identical_reruns(self, tmp_path):
        cfg_a = fast_config(tmp_path, output_dir=str(tmp_path / "a"))
        cfg_b = fast_config(tmp_path, output_dir=str(tmp_path / "b"))
        run_experiment(cfg_a)
        run_experiment(cfg_b)
        bytes_a = (Path(cfg_a.output_dir) / "trials.csv").read_bytes()
        bytes_b = (Path(cfg_b.output_dir) / "trials.csv").read_bytes()
        assert bytes_a == bytes_b

    def test_reaggregate_missing_columns(self, tmp_path):
        out = tmp_path / "broken"
        out.mkdir()
        (out / "trials.csv").write_text("condition,seed\nx,1\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="missing columns"):
            reaggregate(out)

    def test_summary_json_is_valid(self, tmp_path):
        cfg = fast_config(tmp_path, sweep=(0.3,), baselines=(BaselineKind.RANDOM,), n_trials=2)
        run_experiment(cfg)
        data = json.loads((Path(cfg.output_dir) / "summary.json").read_text())
        assert data["environment"] == "generic4"
        assert data["stats"]["vs_random"]["n_a"] == 2
        assert data["config"]["engine"]["lambda"] == FAST_ENGINE.lam
