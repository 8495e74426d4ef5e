"""Statistical machinery and executable checks of the three theory claims.

Everything here is a pure function; random resampling (bootstrap) takes an
explicit seed so results are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

from .core import MetricSummary

BOOTSTRAP_RESAMPLES = 1000
DEFAULT_BOUND_MARGIN = 0.02


@dataclass(frozen=True)
class StatResult:
    """Two-sample comparison: effect size, Welch t-test, bootstrap CI."""

    mean_a: float
    mean_b: float
    cohens_d: float
    t_statistic: float
    p_value: float
    ci_low: float
    ci_high: float
    n_a: int
    n_b: int
    bonferroni_alpha: float

    def to_dict(self) -> dict:
        return {
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
            "cohens_d": self.cohens_d,
            "t_statistic": self.t_statistic,
            "p_value": self.p_value,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n_a": self.n_a,
            "n_b": self.n_b,
            "bonferroni_alpha": self.bonferroni_alpha,
        }


@dataclass(frozen=True)
class BoundCheck:
    """Result of testing observed specialization against the analytic floor."""

    lam: float
    eta: float
    iterations: int
    n_regimes: int
    predicted_lower_bound: float
    observed_mean_si: float
    margin: float
    satisfied: bool

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "eta": self.eta,
            "iterations": self.iterations,
            "n_regimes": self.n_regimes,
            "predicted_lower_bound": self.predicted_lower_bound,
            "observed_mean_si": self.observed_mean_si,
            "margin": self.margin,
            "satisfied": self.satisfied,
        }


def _prepare_sample(sample, name: str) -> np.ndarray:
    arr = np.asarray(sample, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError(f"{name} needs at least two points")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def cohens_d(sample_a, sample_b) -> float:
    """Standardized mean difference with the pooled-variance denominator.

    Identical samples give 0. A zero pooled variance with unequal means is
    reported as a signed infinity rather than an exception, so callers can
    distinguish "no effect measurable" from "effect off the scale".
    """
    a = _prepare_sample(sample_a, "sample_a")
    b = _prepare_sample(sample_b, "sample_b")
    na, nb = a.size, b.size
    pooled_var = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    diff = a.mean() - b.mean()
    if pooled_var == 0:
        if diff == 0:
            return 0.0
        return math.copysign(math.inf, diff)
    return float(diff / math.sqrt(pooled_var))


def bootstrap_ci(
    sample, seed: int = 0, resamples: int = BOOTSTRAP_RESAMPLES, level: float = 0.95
) -> tuple[float, float]:
    """Percentile bootstrap CI of the sample mean, on its own seeded stream."""
    arr = _prepare_sample(sample, "sample")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, arr.size, size=(resamples, arr.size))
    means = arr[idx].mean(axis=1)
    lo, hi = np.percentile(means, [(1 - level) / 2 * 100, (1 + level) / 2 * 100])
    return float(lo), float(hi)


def two_sample_t_test(
    sample_a,
    sample_b,
    alpha: float = 0.05,
    k_comparisons: int = 1,
    bootstrap_seed: int = 0,
) -> StatResult:
    """Welch's unequal-variance t-test with a two-sided p-value.

    Degenerate zero-variance inputs follow the natural limits: equal means
    give t = 0, p = 1; unequal means give an infinite t and p = 0. The
    confidence interval is a percentile bootstrap of sample_a's mean.
    """
    a = _prepare_sample(sample_a, "sample_a")
    b = _prepare_sample(sample_b, "sample_b")
    na, nb = a.size, b.size
    va, vb = a.var(ddof=1), b.var(ddof=1)
    diff = a.mean() - b.mean()
    se_sq = va / na + vb / nb
    if se_sq == 0:
        t_stat = 0.0 if diff == 0 else math.copysign(math.inf, diff)
        p = 1.0 if diff == 0 else 0.0
    else:
        t_stat = float(diff / math.sqrt(se_sq))
        df = se_sq**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
        p = float(2.0 * _scipy_stats.t.sf(abs(t_stat), df))
    ci_low, ci_high = bootstrap_ci(a, seed=bootstrap_seed)
    return StatResult(
        mean_a=float(a.mean()),
        mean_b=float(b.mean()),
        cohens_d=cohens_d(a, b),
        t_statistic=t_stat,
        p_value=min(max(p, 0.0), 1.0),
        ci_low=ci_low,
        ci_high=ci_high,
        n_a=na,
        n_b=nb,
        bonferroni_alpha=bonferroni_threshold(alpha, k_comparisons),
    )


def bonferroni_threshold(alpha: float, k: int) -> float:
    """Per-comparison significance threshold for k comparisons."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if k < 1:
        raise ValueError("k must be >= 1")
    return alpha / k


# ---------------------------------------------------------------------------
# Claim 1: crowded niches admit a profitable unilateral move
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeviationReport:
    """Outcome of the niche-crowding payoff analysis for one occupancy."""

    occupancy: tuple[int, ...]
    payoffs: tuple[float, ...]
    profitable: bool
    from_regime: int | None
    to_regime: int | None
    current_payoff: float | None
    deviation_payoff: float | None

    def to_dict(self) -> dict:
        return {
            "occupancy": list(self.occupancy),
            "payoffs": list(self.payoffs),
            "profitable": self.profitable,
            "from_regime": self.from_regime,
            "to_regime": self.to_regime,
            "current_payoff": self.current_payoff,
            "deviation_payoff": self.deviation_payoff,
        }


def prop1_deviation_check(regime_values, occupancy) -> DeviationReport:
    """Search for a strictly profitable unilateral niche switch.

    Agents in a niche with occupancy k earn V_r / k_r. An agent in a
    crowded niche (k_r >= 2) moving into niche r' earns V_r' / (k_r' + 1)
    after arriving; the move is profitable when that strictly exceeds its
    current payoff. All candidate moves are scanned and the largest gain
    reported (under comparable regime values the winner is always the
    least-occupied niche). Competition costs identical across niches
    cancel out of the comparison and are taken as zero.
    """
    values = np.asarray(regime_values, dtype=float)
    occ = np.asarray(occupancy, dtype=int)
    if values.shape != occ.shape or values.ndim != 1:
        raise ValueError("regime values and occupancy must be 1-D and congruent")
    if np.any(values <= 0):
        raise ValueError("regime values must be positive")
    if np.any(occ < 0):
        raise ValueError("occupancy must be non-negative")

    payoffs = tuple(
        float(values[r] / occ[r]) if occ[r] > 0 else 0.0 for r in range(occ.size)
    )

    best: tuple[float, int, int] | None = None
    for r in range(occ.size):
        if occ[r] < 2:
            continue
        current = values[r] / occ[r]
        for target in range(occ.size):
            if target == r:
                continue
            gained = values[target] / (occ[target] + 1)
            if gained > current:
                margin = gained - current
                if best is None or margin > best[0]:
                    best = (margin, r, target)

    if best is None:
        return DeviationReport(
            occupancy=tuple(int(k) for k in occ),
            payoffs=payoffs,
            profitable=False,
            from_regime=None,
            to_regime=None,
            current_payoff=None,
            deviation_payoff=None,
        )
    _, src, dst = best
    return DeviationReport(
        occupancy=tuple(int(k) for k in occ),
        payoffs=payoffs,
        profitable=True,
        from_regime=src,
        to_regime=dst,
        current_payoff=float(values[src] / occ[src]),
        deviation_payoff=float(values[dst] / (occ[dst] + 1)),
    )


# ---------------------------------------------------------------------------
# Claim 2: analytic lower bound on expected specialization
# ---------------------------------------------------------------------------


def prop2_predicted_bound(lam: float, eta: float, iterations: int, n_regimes: int) -> float:
    """lam/(1+lam) * (1 - 1/R) * (1 - exp(-eta*T/R))."""
    if lam <= 0:
        raise ValueError("the bound is stated for lambda > 0")
    if n_regimes < 2:
        raise ValueError("the bound needs at least two regimes")
    if eta <= 0 or iterations < 1:
        raise ValueError("eta must be positive and iterations >= 1")
    return (
        lam / (1.0 + lam)
        * (1.0 - 1.0 / n_regimes)
        * (1.0 - math.exp(-eta * iterations / n_regimes))
    )


def prop2_bound_check(
    lam: float,
    eta: float,
    iterations: int,
    n_regimes: int,
    observed,
    margin: float = DEFAULT_BOUND_MARGIN,
) -> BoundCheck:
    """Compare an observed mean specialization index against the bound.

    ``margin`` absorbs finite-trial fluctuation around the expectation the
    bound actually constrains.
    """
    obs = np.atleast_1d(np.asarray(observed, dtype=float))
    if obs.size == 0 or not np.all(np.isfinite(obs)):
        raise ValueError("observed must hold at least one finite value")
    predicted = prop2_predicted_bound(lam, eta, iterations, n_regimes)
    mean_si = float(obs.mean())
    return BoundCheck(
        lam=lam,
        eta=eta,
        iterations=iterations,
        n_regimes=n_regimes,
        predicted_lower_bound=predicted,
        observed_mean_si=mean_si,
        margin=margin,
        satisfied=mean_si >= predicted - margin,
    )


# ---------------------------------------------------------------------------
# Claim 3: a single effective regime collapses population diversity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CollapseReport:
    """Aggregate evidence that mono-regime conditions kill diversity."""

    n_trials: int
    mean_effective_si: float
    share_single_niche: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "mean_effective_si": self.mean_effective_si,
            "share_single_niche": self.share_single_niche,
            "passed": self.passed,
        }


def prop3_collapse_check(
    trial_summaries: list[MetricSummary],
    effective_si_limit: float = 0.10,
    single_niche_share: float = 0.90,
) -> CollapseReport:
    """Check that mono-regime trials show no population-level diversity.

    Passes when the mean effective specialization stays under the limit and
    at least the given share of trials ends with every agent in one niche.
    """
    if not trial_summaries:
        raise ValueError("need at least one trial summary")
    eff = np.array([s.effective_si for s in trial_summaries], dtype=float)
    single = np.array(
        [s.distinct_primary_niches == 1 for s in trial_summaries], dtype=bool
    )
    mean_eff = float(eff.mean())
    share = float(single.mean())
    return CollapseReport(
        n_trials=len(trial_summaries),
        mean_effective_si=mean_eff,
        share_single_niche=share,
        passed=mean_eff < effective_si_limit and share >= single_niche_share,
    )
