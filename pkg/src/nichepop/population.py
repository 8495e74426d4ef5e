"""Winner-take-all population engine and the two reference baselines.

One trial runs T iterations over a fixed population. Each iteration:
regime is sampled, every agent picks a method (Thompson sampling over its
per-regime Beta beliefs), rewards realize once per distinct selected
method from the environment's noise model, scores apply the niche bonus,
and the single highest-scoring agent (lowest index on ties) updates its
beliefs and niche affinity. Losers are frozen.

Rewards realize per (regime, method), not per agent: two agents playing
the same method in the same iteration observe the same value, the way two
identical forecasters scoring the same series would. Ties that follow
from identical play resolve to the lowest agent index, which is what
starves duplicate strategies of updates and drives niche partitioning.

Method-usage accounting: the engine credits the winning agent's selected
method, during the second half of the horizon (t > T/2). Early Thompson
draws are near-uniform noise and losing selections carry no evidence of
adopted strategy, so neither is counted.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_TAU,
    AgentState,
    MethodId,
    MetricSummary,
    RegimeId,
    population_summary,
)
from .env import EnvironmentSpec, make_rng, realize_reward, sample_regime


class BonusMode(str, enum.Enum):
    MULTIPLICATIVE = "multiplicative"
    CENTERED_ADDITIVE = "centered_additive"


class BeliefUpdate(str, enum.Enum):
    REWARD_WEIGHTED = "reward_weighted"
    UNIT = "unit"


class BaselineKind(str, enum.Enum):
    HOMOGENEOUS = "homogeneous"
    RANDOM = "random"


@dataclass(frozen=True)
class EngineConfig:
    """Engine hyperparameters. ``lam`` is the niche-bonus coefficient
    (the ``lambda`` field in config files; renamed here because ``lambda``
    is reserved in Python)."""

    n_agents: int = 8
    lam: float = 0.3
    eta: float = 0.1
    iterations: int = 500
    bonus_mode: BonusMode = BonusMode.MULTIPLICATIVE
    belief_update: BeliefUpdate = BeliefUpdate.REWARD_WEIGHTED
    affinity_floor: float = 0.01
    reward_clamp_at_zero: bool = True

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.affinity_floor < 0:
            raise ValueError("affinity_floor must be >= 0")

    def validate_for(self, env: EnvironmentSpec) -> None:
        if self.affinity_floor * env.n_regimes >= 1:
            raise ValueError(
                f"affinity_floor {self.affinity_floor} too large for {env.n_regimes} regimes"
            )

    def to_dict(self) -> dict:
        return {
            "n_agents": self.n_agents,
            "lambda": self.lam,
            "eta": self.eta,
            "iterations": self.iterations,
            "bonus_mode": self.bonus_mode.value,
            "belief_update": self.belief_update.value,
            "affinity_floor": self.affinity_floor,
            "reward_clamp_at_zero": self.reward_clamp_at_zero,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "EngineConfig":
        data = dict(raw)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        if "bonus_mode" in data:
            data["bonus_mode"] = BonusMode(str(data["bonus_mode"]).lower())
        if "belief_update" in data:
            data["belief_update"] = BeliefUpdate(str(data["belief_update"]).lower())
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown engine fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class IterationRecord:
    """One iteration of the competition log."""

    t: int
    regime: RegimeId
    selections: tuple[MethodId, ...]
    raw_rewards: tuple[float, ...]
    scores: tuple[float, ...]
    winner: int


@dataclass(frozen=True)
class TrialRecord:
    """Full log of one seeded trial plus the final population summary."""

    config: EngineConfig
    environment_name: str
    seed: int
    iterations: tuple[IterationRecord, ...]
    final_agents: tuple[AgentState, ...]
    summary: MetricSummary


def init_population(env: EnvironmentSpec, cfg: EngineConfig) -> list[AgentState]:
    """N identical uninformed agents: Beta(1,1) beliefs, uniform affinity."""
    cfg.validate_for(env)
    return [AgentState.fresh(env.n_regimes, env.n_methods) for _ in range(cfg.n_agents)]


def select_method(
    agent: AgentState,
    r: RegimeId,
    rng: np.random.Generator,
    count_usage: bool = False,
) -> MethodId:
    """Thompson sampling over the agent's beliefs for regime ``r``.

    Samples one value per method from Beta(success, failure) and returns
    the argmax (lowest method index on exact ties). With ``count_usage``
    the selection is also recorded in the agent's usage counters.
    """
    draws = rng.beta(agent.belief_success[r], agent.belief_failure[r])
    m = int(np.argmax(draws))
    if count_usage:
        agent.usage_counts[m] += 1
    return m


def adjusted_score(raw: float, agent: AgentState, r: RegimeId, cfg: EngineConfig) -> float:
    """Apply the niche bonus to a raw reward.

    MULTIPLICATIVE scales by (1 + lam * affinity) only when the current
    regime is the agent's unique top-affinity regime; an agent whose
    maximum is shared (in particular the uniform starting point) has no
    niche to favor and gets no bonus. CENTERED_ADDITIVE adds
    lam * (affinity - 1/R) unconditionally, which is likewise zero at the
    uniform starting point.
    """
    if cfg.bonus_mode == BonusMode.MULTIPLICATIVE:
        alpha = agent.affinity
        top = alpha.max()
        if alpha[r] == top and int((alpha == top).sum()) == 1:
            return raw * (1.0 + cfg.lam * float(alpha[r]))
        return raw
    centered = float(agent.affinity[r]) - 1.0 / agent.n_regimes
    return raw + cfg.lam * centered


def affinity_update(
    alpha: np.ndarray, r: RegimeId, eta: float, floor: float
) -> np.ndarray:
    """One reinforcement step of a niche-affinity vector after a win in ``r``.

    The winning regime moves toward 1 at rate eta, every other regime drops
    by eta/(R-1) down to the floor, and the result is renormalized.
    """
    n = alpha.size
    updated = alpha.copy()
    updated[r] = alpha[r] + eta * (1.0 - alpha[r])
    if n > 1:
        others = np.arange(n) != r
        updated[others] = np.maximum(floor, alpha[others] - eta / (n - 1))
    return updated / updated.sum()


def apply_winner_updates(
    winner: AgentState,
    r: RegimeId,
    m: MethodId,
    score: float,
    cfg: EngineConfig,
) -> AgentState:
    """Reinforce the winning agent in place and return it.

    Belief: the success parameter of (r, m) grows by the score (clamped
    at zero by default so Beta parameters stay positive) or by 1 in UNIT
    mode; the failure parameter is never touched. Affinity: one
    :func:`affinity_update` step toward the winning regime.
    """
    if not np.isfinite(score):
        raise ValueError(f"winner score must be finite, got {score!r}")
    if cfg.belief_update == BeliefUpdate.UNIT:
        winner.belief_success[r, m] += 1.0
    else:
        increment = score
        if cfg.reward_clamp_at_zero:
            increment = max(0.0, increment)
        winner.belief_success[r, m] += increment
        if winner.belief_success[r, m] <= 0:
            raise ValueError("belief update drove a Beta parameter non-positive")

    winner.affinity = affinity_update(winner.affinity, r, cfg.eta, cfg.affinity_floor)
    return winner


def _oracle_method(env: EnvironmentSpec) -> MethodId:
    """Best single method under the true matrix, weighted by regime frequency."""
    weighted = env.process.stationary @ env.affinity.values
    return int(np.argmax(weighted))


def _run(
    env: EnvironmentSpec,
    cfg: EngineConfig,
    seed: int,
    baseline: BaselineKind | None,
) -> TrialRecord:
    cfg.validate_for(env)
    rng = make_rng(seed)
    process = env.process.clone()
    agents = init_population(env, cfg)
    n = cfg.n_agents
    half = cfg.iterations / 2
    forced = _oracle_method(env) if baseline == BaselineKind.HOMOGENEOUS else None

    log: list[IterationRecord] = []
    for t in range(1, cfg.iterations + 1):
        r = sample_regime(process, rng)

        if baseline == BaselineKind.HOMOGENEOUS:
            selections = [forced] * n
        elif baseline == BaselineKind.RANDOM:
            selections = [int(m) for m in rng.integers(0, env.n_methods, size=n)]
        else:
            selections = [select_method(agent, r, rng) for agent in agents]

        # one realization per distinct method: identical play, identical reward
        method_values = {
            m: realize_reward(env, r, m, rng) for m in sorted(set(selections))
        }
        raw = [method_values[m] for m in selections]
        scores = [
            adjusted_score(raw[i], agents[i], r, cfg) for i in range(n)
        ]

        winner = int(np.argmax(scores))
        apply_winner_updates(agents[winner], r, selections[winner], scores[winner], cfg)
        if t > half:
            agents[winner].usage_counts[selections[winner]] += 1

        log.append(
            IterationRecord(
                t=t,
                regime=r,
                selections=tuple(selections),
                raw_rewards=tuple(raw),
                scores=tuple(scores),
                winner=winner,
            )
        )

    return TrialRecord(
        config=cfg,
        environment_name=env.name,
        seed=seed,
        iterations=tuple(log),
        final_agents=tuple(agents),
        summary=population_summary(agents, DEFAULT_TAU),
    )


def run_trial(env: EnvironmentSpec, cfg: EngineConfig, seed: int) -> TrialRecord:
    """Run one seeded trial of the competing population."""
    return _run(env, cfg, seed, baseline=None)


def run_baseline(
    env: EnvironmentSpec, cfg: EngineConfig, kind: BaselineKind, seed: int
) -> TrialRecord:
    """Run a baseline population through the identical competition machinery.

    HOMOGENEOUS forces every agent onto the single best method under the
    true matrix (oracle selection); RANDOM picks uniformly each iteration.
    Winner determination and affinity updates run unchanged so the
    specialization metrics are measured under the same dynamics.
    """
    return _run(env, cfg, seed, baseline=BaselineKind(kind))
