import dataclasses

import numpy as np
import pytest

from nichepop.core import AgentState, population_summary
from nichepop.env import builtin_environment, make_rng
from nichepop.population import (
    BaselineKind,
    BeliefUpdate,
    BonusMode,
    EngineConfig,
    adjusted_score,
    affinity_update,
    apply_winner_updates,
    init_population,
    run_baseline,
    run_trial,
    select_method,
)


@pytest.fixture(scope="module")
def generic4():
    return builtin_environment("generic4")


@pytest.fixture(scope="module")
def crypto4():
    return builtin_environment("crypto4")


class TestEngineConfig:
    def test_defaults(self):
        cfg = EngineConfig()
        assert cfg.n_agents == 8
        assert cfg.lam == 0.3
        assert cfg.eta == 0.1
        assert cfg.iterations == 500
        assert cfg.bonus_mode == BonusMode.MULTIPLICATIVE
        assert cfg.belief_update == BeliefUpdate.REWARD_WEIGHTED
        assert cfg.affinity_floor == 0.01
        assert cfg.reward_clamp_at_zero

    def test_zero_iterations_rejected(self):
        with pytest.raises(ValueError):
            EngineConfig(iterations=0)

    def test_bad_values_rejected(self):
        with pytest.raises(ValueError):
            EngineConfig(n_agents=0)
        with pytest.raises(ValueError):
            EngineConfig(lam=-0.1)
        with pytest.raises(ValueError):
            EngineConfig(eta=0.0)

    def test_floor_checked_against_environment(self, generic4):
        with pytest.raises(ValueError):
            EngineConfig(affinity_floor=0.3).validate_for(generic4)

    def test_dict_roundtrip_maps_lambda(self):
        cfg = EngineConfig(lam=0.2, bonus_mode=BonusMode.CENTERED_ADDITIVE)
        data = cfg.to_dict()
        assert data["lambda"] == 0.2
        assert EngineConfig.from_dict(data) == cfg


class TestInitPopulation:
    def test_uniform_start(self, generic4):
        agents = init_population(generic4, EngineConfig())
        assert len(agents) == 8
        for a in agents:
            assert a.affinity == pytest.approx([0.25] * 4)
            assert np.all(a.belief_success == 1.0)
            assert np.all(a.belief_failure == 1.0)
            assert a.belief_mean(0, 0) == 0.5
            assert np.all(a.usage_counts == 0)
        assert population_summary(agents).mean_si == 0.0

    def test_init_is_deterministic(self, generic4):
        a = init_population(generic4, EngineConfig())
        b = init_population(generic4, EngineConfig())
        for x, y in zip(a, b):
            assert np.array_equal(x.affinity, y.affinity)
            assert np.array_equal(x.belief_success, y.belief_success)


class TestSelectMethod:
    def test_uniform_beliefs_select_uniformly(self):
        agent = AgentState.fresh(4, 5)
        rng = make_rng(21)
        picks = np.array([select_method(agent, 0, rng) for _ in range(100_000)])
        freqs = np.bincount(picks, minlength=5) / picks.size
        assert freqs == pytest.approx([0.2] * 5, abs=0.02)

    def test_extreme_beliefs_dominate(self):
        agent = AgentState.fresh(4, 5)
        agent.belief_success[:] = 1.0
        agent.belief_failure[:] = 1000.0
        agent.belief_success[2, 3] = 1000.0
        agent.belief_failure[2, 3] = 1.0
        rng = make_rng(4)
        picks = np.array([select_method(agent, 2, rng) for _ in range(10_000)])
        assert (picks == 3).mean() >= 0.999

    def test_deterministic_replay(self):
        agent = AgentState.fresh(4, 5)
        picks_a = [select_method(agent, 1, make_rng(99)) for _ in range(20)]
        picks_b = [select_method(agent, 1, make_rng(99)) for _ in range(20)]
        assert picks_a == picks_b

    def test_usage_counted_only_when_asked(self):
        agent = AgentState.fresh(4, 5)
        rng = make_rng(0)
        select_method(agent, 0, rng)
        assert agent.usage_counts.sum() == 0
        m = select_method(agent, 0, rng, count_usage=True)
        assert agent.usage_counts.sum() == 1
        assert agent.usage_counts[m] == 1


class TestAdjustedScore:
    def test_uniform_affinity_gives_raw_in_both_modes(self):
        agent = AgentState.fresh(4, 5)
        for mode in BonusMode:
            cfg = EngineConfig(lam=0.3, bonus_mode=mode)
            for r in range(4):
                assert adjusted_score(0.8, agent, r, cfg) == pytest.approx(0.8)

    def test_lambda_zero_gives_raw(self):
        agent = AgentState.fresh(4, 5)
        agent.affinity = np.array([0.7, 0.1, 0.1, 0.1])
        for mode in BonusMode:
            cfg = EngineConfig(lam=0.0, bonus_mode=mode)
            assert adjusted_score(0.5, agent, 0, cfg) == pytest.approx(0.5)

    def test_multiplicative_worked_example(self):
        # a just-peaked niche: bonus multiplies only in that regime
        agent = AgentState.fresh(4, 5)
        agent.affinity = np.array([0.25, 0.25, 0.25, 0.25])
        agent.affinity[1] += 1e-9
        agent.affinity /= agent.affinity.sum()
        cfg = EngineConfig(lam=0.3, bonus_mode=BonusMode.MULTIPLICATIVE)
        got = adjusted_score(0.97, agent, 1, cfg)
        assert got == pytest.approx(0.97 * 1.075, abs=1e-6)
        assert adjusted_score(0.97, agent, 0, cfg) == pytest.approx(0.97)

    def test_centered_additive(self):
        agent = AgentState.fresh(4, 5)
        agent.affinity = np.array([0.40, 0.20, 0.20, 0.20])
        cfg = EngineConfig(lam=0.3, bonus_mode=BonusMode.CENTERED_ADDITIVE)
        assert adjusted_score(0.5, agent, 0, cfg) == pytest.approx(0.5 + 0.3 * 0.15)
        assert adjusted_score(0.5, agent, 1, cfg) == pytest.approx(0.5 - 0.3 * 0.05)


class TestApplyWinnerUpdates:
    def test_unit_belief_update(self):
        agent = AgentState.fresh(4, 5)
        cfg = EngineConfig(belief_update=BeliefUpdate.UNIT)
        apply_winner_updates(agent, 0, 2, 0.97, cfg)
        assert agent.belief_success[0, 2] == 2.0
        assert agent.belief_failure[0, 2] == 1.0
        assert agent.belief_mean(0, 2) == pytest.approx(2 / 3, abs=1e-3)

    def test_reward_weighted_belief_update(self):
        agent = AgentState.fresh(4, 5)
        cfg = EngineConfig(belief_update=BeliefUpdate.REWARD_WEIGHTED)
        apply_winner_updates(agent, 1, 0, 0.75, cfg)
        assert agent.belief_success[1, 0] == pytest.approx(1.75)

    def test_negative_score_clamped(self):
        agent = AgentState.fresh(4, 5)
        cfg = EngineConfig()
        apply_winner_updates(agent, 1, 0, -0.2, cfg)
        assert agent.belief_success[1, 0] == 1.0

    def test_negative_score_unclamped_when_disabled(self):
        agent = AgentState.fresh(4, 5)
        cfg = EngineConfig(reward_clamp_at_zero=False)
        apply_winner_updates(agent, 1, 0, -0.2, cfg)
        assert agent.belief_success[1, 0] == pytest.approx(0.8)

    def test_affinity_worked_example(self):
        agent = AgentState.fresh(4, 5)
        cfg = EngineConfig()
        apply_winner_updates(agent, 0, 2, 0.97, cfg)
        assert agent.affinity == pytest.approx([1 / 3, 2 / 9, 2 / 9, 2 / 9], abs=1e-12)
        assert agent.affinity == pytest.approx([0.333, 0.222, 0.222, 0.222], abs=1e-3)

    def test_floor_binds(self):
        agent = AgentState.fresh(4, 5)
        agent.affinity = np.array([0.96, 0.015, 0.015, 0.01])
        cfg = EngineConfig()
        apply_winner_updates(agent, 0, 0, 1.0, cfg)
        raw_floor = cfg.affinity_floor
        assert np.all(agent.affinity[1:] >= raw_floor / agent.affinity.sum() - 1e-12)
        assert agent.affinity.sum() == pytest.approx(1.0, abs=1e-12)

    def test_single_regime_update(self):
        agent = AgentState.fresh(1, 5)
        apply_winner_updates(agent, 0, 0, 1.0, EngineConfig())
        assert agent.affinity == pytest.approx([1.0])

    def test_non_finite_score_rejected(self):
        agent = AgentState.fresh(4, 5)
        with pytest.raises(ValueError):
            apply_winner_updates(agent, 0, 0, float("nan"), EngineConfig())


def snapshot(agent):
    return (
        agent.belief_success.copy(),
        agent.belief_failure.copy(),
        agent.affinity.copy(),
    )


def learned_state_equal(snap, agent):
    s, f, a = snap
    return (
        np.array_equal(s, agent.belief_success)
        and np.array_equal(f, agent.belief_failure)
        and np.array_equal(a, agent.affinity)
    )


class TestRunTrial:
    def test_single_iteration_changes_one_agent(self, generic4):
        cfg = EngineConfig(iterations=1)
        rec = run_trial(generic4, cfg, 5)
        assert len(rec.iterations) == 1
        fresh = init_population(generic4, cfg)
        changed = [
            i
            for i, agent in enumerate(rec.final_agents)
            if not learned_state_equal(snapshot(fresh[i]), agent)
        ]
        assert changed == [rec.iterations[0].winner]

    def test_same_seed_is_bit_identical(self, generic4):
        cfg = EngineConfig(iterations=80)
        a = run_trial(generic4, cfg, 123)
        b = run_trial(generic4, cfg, 123)
        assert a.iterations == b.iterations
        for x, y in zip(a.final_agents, b.final_agents):
            assert np.array_equal(x.belief_success, y.belief_success)
            assert np.array_equal(x.affinity, y.affinity)
            assert np.array_equal(x.usage_counts, y.usage_counts)
        assert a.summary == b.summary

    def test_frozen_losers_via_winner_only_replay(self, generic4):
        cfg = EngineConfig(iterations=60)
        rec = run_trial(generic4, cfg, 31)
        replay = init_population(generic4, cfg)
        for it in rec.iterations:
            apply_winner_updates(
                replay[it.winner], it.regime, it.selections[it.winner],
                it.scores[it.winner], cfg,
            )
            if it.t > cfg.iterations / 2:
                replay[it.winner].usage_counts[it.selections[it.winner]] += 1
        for mine, theirs in zip(replay, rec.final_agents):
            assert np.array_equal(mine.belief_success, theirs.belief_success)
            assert np.array_equal(mine.belief_failure, theirs.belief_failure)
            assert np.array_equal(mine.affinity, theirs.affinity)
            assert np.array_equal(mine.usage_counts, theirs.usage_counts)

    def test_winner_is_score_argmax(self, generic4):
        rec = run_trial(generic4, EngineConfig(iterations=50), 8)
        for it in rec.iterations:
            assert it.winner == int(np.argmax(it.scores))

    def test_belief_monotone_failure_constant(self, generic4):
        rec = run_trial(generic4, EngineConfig(iterations=120), 17)
        for agent in rec.final_agents:
            assert np.all(agent.belief_failure == 1.0)
            assert np.all(agent.belief_success >= 1.0)

    def test_affinity_simplex_preserved(self, generic4):
        # the pre-normalization sum is at most 1 + eta + R*floor (a winner
        # gains at most eta, flooring adds at most floor per component), so
        # normalized components never drop below floor over that sum
        cfg = EngineConfig(iterations=300)
        rec = run_trial(generic4, cfg, 77)
        r = generic4.n_regimes
        lower = cfg.affinity_floor / (1 + cfg.eta + r * cfg.affinity_floor)
        for agent in rec.final_agents:
            assert agent.affinity.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(agent.affinity >= lower - 1e-12)

    def test_summary_recomputable_from_final_agents(self, generic4):
        rec = run_trial(generic4, EngineConfig(iterations=90), 13)
        assert population_summary(list(rec.final_agents)) == rec.summary

    def test_usage_counted_in_second_half_only(self, generic4):
        cfg = EngineConfig(iterations=40)
        rec = run_trial(generic4, cfg, 3)
        credited = sum(1 for it in rec.iterations if it.t > cfg.iterations / 2)
        total = sum(int(a.usage_counts.sum()) for a in rec.final_agents)
        assert total == credited == 20

    def test_lambda_invariance_at_uniform_affinity(self, generic4):
        raw = [0.88, 0.97, 0.75, 0.32, 0.61, 0.77, 0.88, 0.84]
        agents = [AgentState.fresh(4, 5) for _ in range(8)]
        for mode in BonusMode:
            winners = set()
            for lam in (0.0, 0.1, 0.3, 0.5, 2.0):
                cfg = EngineConfig(lam=lam, bonus_mode=mode)
                scores = [adjusted_score(raw[i], agents[i], 0, cfg) for i in range(8)]
                winners.add(int(np.argmax(scores)))
            assert winners == {1}

    def test_mean_si_grows_with_horizon(self, generic4):
        short = [
            run_trial(generic4, EngineConfig(iterations=50), 42 + i).summary.mean_si
            for i in range(30)
        ]
        long = [
            run_trial(generic4, EngineConfig(iterations=500), 42 + i).summary.mean_si
            for i in range(30)
        ]
        assert np.mean(long) >= np.mean(short)

    def test_identical_play_ties_break_to_lowest_index(self, generic4):
        # all agents share one niche-free state: in any iteration where every
        # selection coincides, scores tie exactly and agent 0 must win
        rec = run_trial(generic4, EngineConfig(iterations=200, lam=0.0), 9)
        for it in rec.iterations:
            if len(set(it.selections)) == 1:
                assert it.raw_rewards == tuple([it.raw_rewards[0]] * 8)

    def test_shared_realization_per_method(self, generic4):
        rec = run_trial(generic4, EngineConfig(iterations=150), 25)
        for it in rec.iterations:
            by_method = {}
            for m, val in zip(it.selections, it.raw_rewards):
                if m in by_method:
                    assert val == by_method[m]
                by_method[m] = val


class TestRunBaseline:
    def test_homogeneous_plays_oracle_method(self, crypto4):
        # independent oracle: stationary-weighted column means of the matrix
        weights = crypto4.process.stationary
        means = weights @ crypto4.affinity.values
        oracle = int(np.argmax(means))
        assert oracle == crypto4.affinity.method_names.index("momentum_long")
        rec = run_baseline(crypto4, EngineConfig(iterations=40, lam=0.0), BaselineKind.HOMOGENEOUS, 2)
        for it in rec.iterations:
            assert set(it.selections) == {oracle}

    def test_homogeneous_monopoly(self, generic4):
        rec = run_baseline(generic4, EngineConfig(iterations=100, lam=0.0), BaselineKind.HOMOGENEOUS, 4)
        assert all(it.winner == 0 for it in rec.iterations)
        for agent in rec.final_agents[1:]:
            assert agent.affinity == pytest.approx([0.25] * 4)

    def test_homogeneous_mean_si_small(self, generic4):
        sis = [
            run_baseline(generic4, EngineConfig(lam=0.0), BaselineKind.HOMOGENEOUS, 42 + i).summary.mean_si
            for i in range(30)
        ]
        assert np.mean(sis) < 0.05

    def test_random_selects_every_method(self, generic4):
        rec = run_baseline(generic4, EngineConfig(iterations=200, lam=0.0), BaselineKind.RANDOM, 6)
        seen = set()
        for it in rec.iterations:
            seen.update(it.selections)
        assert seen == set(range(5))

    def test_random_si_sits_between_homogeneous_and_engine(self, generic4):
        cfg = EngineConfig(lam=0.0)
        rand = np.mean(
            [run_baseline(generic4, cfg, BaselineKind.RANDOM, 42 + i).summary.mean_si for i in range(10)]
        )
        homo = np.mean(
            [run_baseline(generic4, cfg, BaselineKind.HOMOGENEOUS, 42 + i).summary.mean_si for i in range(10)]
        )
        cfg3 = EngineConfig(lam=0.3)
        engine = np.mean(
            [run_trial(generic4, cfg3, 42 + i).summary.mean_si for i in range(10)]
        )
        assert homo < rand < engine

    def test_kind_accepts_string(self, generic4):
        rec = run_baseline(generic4, EngineConfig(iterations=10), "random", 1)
        assert rec.environment_name == "generic4"


class TestAffinityUpdate:
    def test_matches_winner_update(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            alpha = rng.dirichlet(np.ones(4))
            r = int(rng.integers(4))
            agent = AgentState.fresh(4, 5)
            agent.affinity = alpha.copy()
            apply_winner_updates(agent, r, 0, 1.0, EngineConfig())
            assert np.array_equal(agent.affinity, affinity_update(alpha, r, 0.1, 0.01))
