"""Synthetic regime-switching environments.

An environment couples a ground-truth :class:`~nichepop.core.AffinityMatrix`
with a regime process (i.i.d. draws from a stationary distribution, or a
Markov chain) and a Gaussian reward-noise scale. Rewards realize as
``A(r, m) + eps`` with ``eps ~ N(0, noise_sigma^2)``; they are not clamped
here, consumers decide what to do with negative values.

Randomness discipline: every stochastic operation takes an explicit
``numpy.random.Generator``. One generator per trial, never shared across
concurrent trials; identical seeds reproduce identical draw sequences.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .core import AffinityMatrix, MethodId, RegimeId, validate_simplex

DEFAULT_NOISE_SIGMA = 0.15

STATIONARY_ATOL = 1e-6


class ProcessKind(str, enum.Enum):
    IID = "iid"
    MARKOV = "markov"


@dataclass
class RegimeProcess:
    """Regime-generating process with an explicit stationary distribution.

    For ``MARKOV`` the transition matrix must be row-stochastic and the
    declared stationary vector must actually be stationary for it.
    ``current`` is the chain state and makes a MARKOV process single-owner
    mutable; use :meth:`clone` to hand a private copy to each trial.
    """

    kind: ProcessKind
    stationary: np.ndarray
    transition: np.ndarray | None = None
    current: RegimeId = 0

    def __post_init__(self):
        self.stationary = validate_simplex(self.stationary)
        r = self.stationary.size
        if self.kind == ProcessKind.MARKOV:
            if self.transition is None:
                raise ValueError("MARKOV process requires a transition matrix")
            t = np.asarray(self.transition, dtype=float)
            if t.shape != (r, r):
                raise ValueError(f"transition matrix must be {r}x{r}")
            for row in t:
                validate_simplex(row)
            pi = self.stationary
            if np.max(np.abs(pi @ t - pi)) > STATIONARY_ATOL:
                raise ValueError("declared stationary vector is not stationary for the transition matrix")
            self.transition = t
        elif self.transition is not None:
            raise ValueError("IID process must not carry a transition matrix")
        if not 0 <= self.current < r:
            raise ValueError("current regime out of range")

    @property
    def n_regimes(self) -> int:
        return self.stationary.size

    def clone(self) -> "RegimeProcess":
        return replace(self)


@dataclass(frozen=True)
class EnvironmentSpec:
    """Immutable description of one synthetic environment."""

    name: str
    affinity: AffinityMatrix
    process: RegimeProcess
    noise_sigma: float = DEFAULT_NOISE_SIGMA

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.process.n_regimes != self.affinity.n_regimes:
            raise ValueError("process and affinity matrix disagree on regime count")

    @property
    def n_regimes(self) -> int:
        return self.affinity.n_regimes

    @property
    def n_methods(self) -> int:
        return self.affinity.n_methods


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator; the single source of randomness for one trial."""
    return np.random.default_rng(seed)


def _draw_categorical(probs: np.ndarray, rng: np.random.Generator) -> int:
    # inverse-CDF on one uniform keeps the stream layout obvious
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, probs.size - 1)


def sample_regime(process: RegimeProcess, rng: np.random.Generator) -> RegimeId:
    """Draw the next regime; MARKOV advances the chain state."""
    if process.kind == ProcessKind.IID:
        return _draw_categorical(process.stationary, rng)
    nxt = _draw_categorical(process.transition[process.current], rng)
    process.current = nxt
    return nxt


def realize_reward(
    env: EnvironmentSpec, r: RegimeId, m: MethodId, rng: np.random.Generator
) -> float:
    """One noisy reward draw for method ``m`` in regime ``r``."""
    base = env.affinity.values[r, m]
    if env.noise_sigma == 0:
        return float(base)
    return float(base + rng.normal(0.0, env.noise_sigma))


# ---------------------------------------------------------------------------
# Built-in environments
# ---------------------------------------------------------------------------

_CRYPTO_REGIMES = ("bull", "bear", "sideways", "volatile")
_CRYPTO_METHODS = ("naive", "momentum_short", "momentum_long", "mean_revert", "trend")
_CRYPTO_VALUES = np.array(
    [
        # naive  mom_s  mom_l  mean_r trend
        [0.50, 0.80, 0.90, 0.30, 0.85],  # bull
        [0.30, 0.70, 0.80, 0.40, 0.75],  # bear
        [0.60, 0.40, 0.30, 0.90, 0.35],  # sideways
        [0.40, 0.60, 0.50, 0.70, 0.50],  # volatile
    ]
)

_GENERIC_REGIMES = ("regime_0", "regime_1", "regime_2", "regime_3")
_GENERIC_METHODS = ("method_0", "method_1", "method_2", "method_3", "method_4")
# Each regime has exactly one 0.9-best method (its own, so no single method
# dominates across regimes). The first two rows carry tight runner-ups
# (0.80-0.85): with reward noise 0.15 those regimes produce frequent upsets
# that keep every agent winning occasionally. The last two rows are gapped,
# so their incumbents win reliably and concentrate sharply. Both row kinds
# are needed for specialization to emerge at a zero niche bonus.
_GENERIC_VALUES = np.array(
    [
        [0.90, 0.80, 0.50, 0.30, 0.85],
        [0.85, 0.90, 0.80, 0.30, 0.50],
        [0.30, 0.40, 0.90, 0.60, 0.35],
        [0.40, 0.30, 0.60, 0.90, 0.50],
    ]
)

_TRAFFIC_REGIMES = (
    "morning_rush",
    "midday",
    "evening_rush",
    "night",
    "weekend",
    "transition",
)
_TRAFFIC_METHODS = ("persistence", "hourly_avg", "weekly_pattern", "rush_hour", "exp_smooth")
_TRAFFIC_VALUES = np.array(
    [
        [0.90, 0.40, 0.55, 0.35, 0.50],  # morning_rush
        [0.45, 0.90, 0.40, 0.50, 0.35],  # midday
        [0.55, 0.35, 0.90, 0.40, 0.50],  # evening_rush
        [0.35, 0.50, 0.45, 0.90, 0.40],  # night
        [0.50, 0.45, 0.35, 0.40, 0.90],  # weekend
        [0.60, 0.55, 0.60, 0.45, 0.55],  # transition: overlaps several regimes
    ]
)

BUILTIN_NAMES = ("crypto4", "generic4", "traffic6", "mono1")


def _crypto_process() -> RegimeProcess:
    # only the bull mass is pinned; the remainder is spread uniformly
    rest = (1.0 - 0.30) / 3.0
    return RegimeProcess(ProcessKind.IID, np.array([0.30, rest, rest, rest]))


def _traffic_process() -> RegimeProcess:
    r = len(_TRAFFIC_REGIMES)
    # sticky chain with a cyclic drift through the daily ordering; the
    # circulant structure makes the uniform vector exactly stationary
    transition = 0.6 * np.eye(r) + 0.4 * np.roll(np.eye(r), 1, axis=1)
    return RegimeProcess(
        ProcessKind.MARKOV,
        np.full(r, 1.0 / r),
        transition=transition,
        current=0,
    )


def builtin_environment(name: str) -> EnvironmentSpec:
    """Construct one of the named preset environments.

    - ``crypto4`` -- 4 market regimes x 5 forecasting methods, i.i.d.
      regimes with a 0.30 bull share.
    - ``generic4`` -- 4 uniform i.i.d. regimes x 5 methods with one clear
      winner per regime; the default ablation environment.
    - ``traffic6`` -- 6 regimes x 5 methods on a sticky cyclic Markov chain.
    - ``mono1`` -- the crypto matrix restricted to its bull row: a single
      always-on regime.
    """
    if name == "crypto4":
        return EnvironmentSpec(
            name="crypto4",
            affinity=AffinityMatrix(_CRYPTO_VALUES, _CRYPTO_REGIMES, _CRYPTO_METHODS),
            process=_crypto_process(),
        )
    if name == "generic4":
        return EnvironmentSpec(
            name="generic4",
            affinity=AffinityMatrix(_GENERIC_VALUES, _GENERIC_REGIMES, _GENERIC_METHODS),
            process=RegimeProcess(ProcessKind.IID, np.full(4, 0.25)),
        )
    if name == "traffic6":
        return EnvironmentSpec(
            name="traffic6",
            affinity=AffinityMatrix(_TRAFFIC_VALUES, _TRAFFIC_REGIMES, _TRAFFIC_METHODS),
            process=_traffic_process(),
        )
    if name == "mono1":
        return EnvironmentSpec(
            name="mono1",
            affinity=AffinityMatrix(_CRYPTO_VALUES[:1], _CRYPTO_REGIMES[:1], _CRYPTO_METHODS),
            process=RegimeProcess(ProcessKind.IID, np.array([1.0])),
        )
    raise ValueError(f"unknown environment {name!r}; expected one of {BUILTIN_NAMES}")


def environment_from_dict(spec: dict) -> EnvironmentSpec:
    """Build an environment from config-file fields.

    Expected keys mirror :class:`EnvironmentSpec`: ``affinity`` (with
    ``values``/``regime_names``/``method_names``), ``process`` (with
    ``kind``/``stationary`` and, for markov, ``transition``/``current``)
    and optional ``noise_sigma`` and ``name``.
    """
    try:
        aff = spec["affinity"]
        matrix = AffinityMatrix(
            np.asarray(aff["values"], dtype=float),
            tuple(aff["regime_names"]),
            tuple(aff["method_names"]),
        )
        proc_spec = spec["process"]
        kind = ProcessKind(str(proc_spec["kind"]).lower())
        process = RegimeProcess(
            kind=kind,
            stationary=np.asarray(proc_spec["stationary"], dtype=float),
            transition=(
                np.asarray(proc_spec["transition"], dtype=float)
                if kind == ProcessKind.MARKOV
                else None
            ),
            current=int(proc_spec.get("current", 0)),
        )
    except KeyError as exc:
        raise ValueError(f"environment config is missing field {exc.args[0]!r}") from exc
    return EnvironmentSpec(
        name=str(spec.get("name", "custom")),
        affinity=matrix,
        process=process,
        noise_sigma=float(spec.get("noise_sigma", DEFAULT_NOISE_SIGMA)),
    )


def resolve_environment(env: str | dict | EnvironmentSpec) -> EnvironmentSpec:
    """Accept a preset name, a config mapping, or an already-built spec."""
    if isinstance(env, EnvironmentSpec):
        return env
    if isinstance(env, str):
        return builtin_environment(env)
    if isinstance(env, dict):
        return environment_from_dict(env)
    raise TypeError(f"cannot interpret environment specification of type {type(env)!r}")
