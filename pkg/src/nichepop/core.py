"""Shared domain types and the pure specialization metrics.

Conventions used throughout the package:

- Regimes and methods are identified by integer indices (``RegimeId``,
  ``MethodId``) into the rows/columns of an :class:`AffinityMatrix`.
- A niche-affinity vector is a length-R probability simplex (numpy array).
- All entropies are natural-log (nats), so the maximum entropy of an
  R-vector is ``ln R`` and indices normalized by it land in [0, 1].

Everything in this module is a pure function over value types; there is no
shared mutable state and no I/O.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RegimeId = int
MethodId = int

SIMPLEX_ATOL = 1e-9

# Usage share above which a method counts as "owned" by a specialist.
DEFAULT_TAU = 0.3


def _as_vector(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("expected a non-empty 1-D vector")
    return arr


def validate_simplex(p) -> np.ndarray:
    """Return ``p`` as an array after checking it is a probability vector.

    Entries must be >= 0 and sum to 1 within ``SIMPLEX_ATOL``.
    """
    arr = _as_vector(p)
    if np.any(arr < 0):
        raise ValueError(f"probability vector has negative entries: {arr}")
    total = float(arr.sum())
    if abs(total - 1.0) > SIMPLEX_ATOL:
        raise ValueError(f"probability vector sums to {total!r}, not 1")
    return arr


@dataclass(frozen=True)
class AffinityMatrix:
    """Ground-truth expected performance of each method in each regime.

    ``values[r, m]`` is the affinity of method ``m`` in regime ``r``, in
    [0, 1]. Row-max normalization is deliberately not enforced; matrices
    are stored exactly as configured.
    """

    values: np.ndarray
    regime_names: tuple[str, ...]
    method_names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "regime_names", tuple(self.regime_names))
        object.__setattr__(self, "method_names", tuple(self.method_names))
        if values.ndim != 2:
            raise ValueError("affinity values must be a 2-D regime x method grid")
        r, m = values.shape
        if r < 1 or m < 1:
            raise ValueError("affinity grid must have at least one regime and one method")
        if len(self.regime_names) != r:
            raise ValueError(f"{len(self.regime_names)} regime names for {r} regimes")
        if len(self.method_names) != m:
            raise ValueError(f"{len(self.method_names)} method names for {m} methods")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError("affinity entries must lie in [0, 1]")

    @property
    def n_regimes(self) -> int:
        return self.values.shape[0]

    @property
    def n_methods(self) -> int:
        return self.values.shape[1]


@dataclass
class AgentState:
    """One learner: per-(regime, method) Beta beliefs plus a niche affinity.

    Beliefs are stored as two positive R x M arrays (``belief_success``,
    ``belief_failure``); cell (r, m) is Beta(success, failure).
    ``usage_counts`` accumulates method selections credited during the
    measurement window (see the engine for the crediting rule).
    """

    belief_success: np.ndarray
    belief_failure: np.ndarray
    affinity: np.ndarray
    usage_counts: np.ndarray

    @classmethod
    def fresh(cls, n_regimes: int, n_methods: int) -> "AgentState":
        """Uninformed agent: Beta(1, 1) everywhere, uniform affinity."""
        return cls(
            belief_success=np.ones((n_regimes, n_methods)),
            belief_failure=np.ones((n_regimes, n_methods)),
            affinity=np.full(n_regimes, 1.0 / n_regimes),
            usage_counts=np.zeros(n_methods, dtype=np.int64),
        )

    @property
    def n_regimes(self) -> int:
        return self.affinity.shape[0]

    @property
    def n_methods(self) -> int:
        return self.usage_counts.shape[0]

    def belief_mean(self, r: RegimeId, m: MethodId) -> float:
        s = self.belief_success[r, m]
        f = self.belief_failure[r, m]
        return float(s / (s + f))

    def primary_niche(self) -> RegimeId:
        """Regime with the highest affinity; ties go to the lowest index."""
        return int(np.argmax(self.affinity))

    def copy(self) -> "AgentState":
        return AgentState(
            belief_success=self.belief_success.copy(),
            belief_failure=self.belief_failure.copy(),
            affinity=self.affinity.copy(),
            usage_counts=self.usage_counts.copy(),
        )

    def validate(self) -> None:
        if np.any(self.belief_success <= 0) or np.any(self.belief_failure <= 0):
            raise ValueError("Beta parameters must stay positive")
        if self.belief_success.shape != self.belief_failure.shape:
            raise ValueError("belief grids must share a shape")
        if self.belief_success.shape[0] != self.affinity.shape[0]:
            raise ValueError("belief grid and affinity disagree on regime count")
        if self.belief_success.shape[1] != self.usage_counts.shape[0]:
            raise ValueError("belief grid and usage counts disagree on method count")
        if np.any(self.usage_counts < 0):
            raise ValueError("usage counts must be non-negative")
        validate_simplex(self.affinity)


@dataclass(frozen=True)
class MetricSummary:
    """Population-level specialization metrics for one trial."""

    si_per_agent: tuple[float, ...]
    mean_si: float
    msi_per_agent: tuple[float, ...]
    coverage: float
    distinct_primary_niches: int
    effective_si: float

    def to_dict(self) -> dict:
        return {
            "si_per_agent": list(self.si_per_agent),
            "mean_si": self.mean_si,
            "msi_per_agent": list(self.msi_per_agent),
            "msi_mean": float(np.mean(self.msi_per_agent)) if self.msi_per_agent else 0.0,
            "coverage": self.coverage,
            "distinct_primary_niches": self.distinct_primary_niches,
            "effective_si": self.effective_si,
        }


def shannon_entropy(p) -> float:
    """Shannon entropy of a probability vector, in nats.

    Zero entries contribute nothing (0 * ln 0 := 0). Raises if ``p`` is
    not a probability vector.
    """
    arr = validate_simplex(p)
    nonzero = arr[arr > 0]
    h = float(-(nonzero * np.log(nonzero)).sum())
    # guard against -0.0 / rounding just below zero for one-hot inputs
    return max(h, 0.0)


def specialization_index(alpha) -> float:
    """Normalized-entropy concentration of a niche-affinity vector.

    1 - H(alpha)/ln(R): 0 for a uniform vector, 1 for a one-hot vector.
    Undefined (raises) for R = 1, where ln R = 0.
    """
    arr = validate_simplex(alpha)
    r = arr.size
    if r < 2:
        raise ValueError("specialization index is undefined for a single regime")
    si = 1.0 - shannon_entropy(arr) / math.log(r)
    return min(max(si, 0.0), 1.0)


def method_specialization_index(usage_counts) -> float:
    """Same normalized-entropy construction applied to method-usage counts.

    Counts are normalized into a usage distribution first. Raises if no
    selections were recorded or if there are fewer than two methods.
    """
    counts = _as_vector(usage_counts)
    if np.any(counts < 0):
        raise ValueError("usage counts must be non-negative")
    m = counts.size
    if m < 2:
        raise ValueError("method specialization is undefined for a single method")
    total = counts.sum()
    if total <= 0:
        raise ValueError("no selections recorded")
    msi = 1.0 - shannon_entropy(counts / total) / math.log(m)
    return min(max(msi, 0.0), 1.0)


def method_coverage(all_usage, tau: float = DEFAULT_TAU) -> float:
    """Fraction of methods whose usage share exceeds ``tau`` for some agent.

    ``all_usage`` is an N x M grid of per-agent usage counts; each row is
    normalized independently. Every agent must have at least one recorded
    selection.
    """
    if not 0.0 <= tau < 1.0:
        raise ValueError("tau must lie in [0, 1)")
    usage = np.asarray(all_usage, dtype=float)
    if usage.ndim != 2 or usage.size == 0:
        raise ValueError("expected an N x M grid of usage counts")
    totals = usage.sum(axis=1)
    if np.any(totals <= 0):
        raise ValueError("every agent needs at least one recorded selection")
    shares = usage / totals[:, None]
    covered = (shares > tau).any(axis=0)
    return float(covered.sum() / usage.shape[1])


def effective_regime_count(pi) -> float:
    """exp of the entropy of a regime distribution: 1 (degenerate) .. R (uniform)."""
    return float(math.exp(shannon_entropy(pi)))


def population_summary(agents: list[AgentState], tau: float = DEFAULT_TAU) -> MetricSummary:
    """Aggregate per-agent specialization metrics into a population summary.

    - ``distinct_primary_niches`` counts distinct argmax regimes (ties to
      the lowest regime index).
    - ``effective_si`` = mean SI x distinct_primary_niches / min(N, R). It
      is zero whenever the whole population shares one niche and equals
      mean SI under a full partition of the regimes.
    - Agents with no recorded selections contribute MSI 0 and no coverage
      shares (nothing measured means no evidence of method specialization).
    - With a single regime there is nothing to specialize over, so per-agent
      SI is reported as 0 rather than raising.
    """
    if not agents:
        raise ValueError("population must contain at least one agent")
    n_regimes = agents[0].n_regimes
    n_methods = agents[0].n_methods
    for a in agents:
        if a.n_regimes != n_regimes or a.n_methods != n_methods:
            raise ValueError("agents disagree on regime/method dimensions")

    if n_regimes >= 2:
        si = tuple(specialization_index(a.affinity) for a in agents)
    else:
        si = tuple(0.0 for _ in agents)
    mean_si = float(np.mean(si))

    msi = tuple(
        method_specialization_index(a.usage_counts) if a.usage_counts.sum() > 0 else 0.0
        for a in agents
    )

    counted = np.array([a.usage_counts for a in agents if a.usage_counts.sum() > 0])
    coverage = method_coverage(counted, tau) if counted.size else 0.0

    niches = {a.primary_niche() for a in agents}
    distinct = len(niches)
    effective = mean_si * distinct / min(len(agents), n_regimes)
    return MetricSummary(
        si_per_agent=si,
        mean_si=mean_si,
        msi_per_agent=msi,
        coverage=coverage,
        distinct_primary_niches=distinct,
        effective_si=effective,
    )
