"""Seeded simulation engine and experiment harness for emergent
specialization in competing learner populations."""

from .analysis import (
    BoundCheck,
    CollapseReport,
    DeviationReport,
    StatResult,
    bonferroni_threshold,
    cohens_d,
    prop1_deviation_check,
    prop2_bound_check,
    prop3_collapse_check,
    two_sample_t_test,
)
from .core import (
    AffinityMatrix,
    AgentState,
    MetricSummary,
    effective_regime_count,
    method_coverage,
    method_specialization_index,
    population_summary,
    shannon_entropy,
    specialization_index,
)
from .env import (
    EnvironmentSpec,
    ProcessKind,
    RegimeProcess,
    builtin_environment,
    make_rng,
    realize_reward,
    resolve_environment,
    sample_regime,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    load_config,
    run_experiment,
)
from .population import (
    BaselineKind,
    BeliefUpdate,
    BonusMode,
    EngineConfig,
    IterationRecord,
    TrialRecord,
    adjusted_score,
    apply_winner_updates,
    init_population,
    run_baseline,
    run_trial,
    select_method,
)

__version__ = "0.1.0"
