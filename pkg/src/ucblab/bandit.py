"""Gaussian bandit instances, the UCB1 policy loop and trajectory statistics.

Arms are indexed ``0 .. K-1``.  Round ``t`` (1-based in the docs, 0-based in
arrays) draws one standard normal ``xi_t`` from the run's own stream and pays
``mu[A_t] + sigma * xi_t``; the noise consumed by arm ``a`` in order of its
pulls is that arm's noise record.

Many replicates are simulated at once by :func:`simulate_batch`.  Each
replicate owns a generator seeded from its own seed, and every arithmetic
step is elementwise, so replicate ``r`` of a batch is bit-identical to a
single :func:`simulate_ucb1` call with the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ucblab._validation import check_positive_int, check_seed, check_tie_break

if TYPE_CHECKING:
    from ucblab.oracle import GrowthCurve

EVENT_SEARCH_CAP = 10.0


@dataclass(frozen=True)
class BanditInstance:
    """Gaussian bandit: ``K`` arm means and a common noise scale.

    Parameters
    ----------
    mu : sequence of float
        Mean reward of each arm.
    sigma : float
        Noise standard deviation, ``>= 0``.
    """

    mu: tuple[float, ...]
    sigma: float

    def __init__(self, mu: Sequence[float], sigma: float) -> None:
        mu = tuple(float(m) for m in np.ravel(np.asarray(mu, dtype=float)))
        if len(mu) < 1:
            raise ValueError("a bandit instance needs at least one arm")
        if not all(math.isfinite(m) for m in mu):
            raise ValueError(f"arm means must be finite, got {mu}")
        sigma = float(sigma)
        if not (sigma >= 0.0 and math.isfinite(sigma)):
            raise ValueError(f"sigma must be finite and >= 0, got {sigma}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def from_gaps(cls, gaps: Sequence[float], sigma: float) -> "BanditInstance":
        """Instance with ``mu_a = -gaps[a]`` (so ``mu_* = 0``)."""
        gaps = np.asarray(gaps, dtype=float)
        if np.any(gaps < 0):
            raise ValueError("gaps must be nonnegative")
        if gaps.size and np.min(gaps) != 0.0:
            raise ValueError("at least one gap must be zero")
        return cls(0.0 - gaps, sigma)

    @property
    def K(self) -> int:
        return len(self.mu)

    @cached_property
    def means(self) -> np.ndarray:
        return np.asarray(self.mu, dtype=float)

    @property
    def mu_star(self) -> float:
        return max(self.mu)

    @cached_property
    def gaps(self) -> np.ndarray:
        return self.mu_star - self.means

    @cached_property
    def optimal_arms(self) -> tuple[int, ...]:
        return tuple(int(a) for a in np.flatnonzero(self.gaps == 0.0))


@dataclass(frozen=True)
class UcbConfig:
    """Run parameters for UCB1.

    ``tie_break`` is ``"lowest_index"`` (default) or ``"random"``; the
    latter draws among tied arms from a stream derived from ``seed``.
    """

    T: int
    gamma: float
    seed: int = 0
    tie_break: str = "lowest_index"

    def __post_init__(self) -> None:
        object.__setattr__(self, "T", check_positive_int("T", self.T))
        gamma = float(self.gamma)
        if not (gamma > 0.0 and math.isfinite(gamma)):
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "seed", check_seed(self.seed))
        object.__setattr__(self, "tie_break", check_tie_break(self.tie_break))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Full record of one UCB1 run.

    Attributes
    ----------
    actions : ndarray of shape (T,)
        Pulled arm per round.
    rewards : ndarray of shape (T,)
    noise : ndarray of shape (T,)
        Standardized noise ``xi_t`` consumed on each round.
    counts : ndarray of shape (K, T + 1)
        Column ``t`` holds the pull counts after ``t`` rounds.
    means : ndarray of shape (K,)
        Final empirical means.
    """

    actions: np.ndarray
    rewards: np.ndarray
    noise: np.ndarray
    counts: np.ndarray
    means: np.ndarray

    @property
    def T(self) -> int:
        return int(self.actions.size)

    @property
    def K(self) -> int:
        return int(self.counts.shape[0])

    @property
    def final_counts(self) -> np.ndarray:
        return self.counts[:, -1]

    @property
    def noise_record(self) -> list[np.ndarray]:
        return [self.noise[self.actions == a] for a in range(self.K)]


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    """Replicates of one (instance, T, gamma) run, stacked along axis 0."""

    instance: BanditInstance
    gamma: float
    seeds: np.ndarray
    actions: np.ndarray  # (B, T)
    noise: np.ndarray  # (B, T)
    counts: np.ndarray  # (B, K) final pull counts
    sums: np.ndarray  # (B, K) per-arm reward sums

    @property
    def T(self) -> int:
        return int(self.actions.shape[1])

    def __len__(self) -> int:
        return int(self.actions.shape[0])

    @property
    def rewards(self) -> np.ndarray:
        return self.instance.means[self.actions] + self.instance.sigma * self.noise

    @property
    def means(self) -> np.ndarray:
        return self.sums / self.counts

    @property
    def pseudo_regret(self) -> np.ndarray:
        return self.counts @ self.instance.gaps

    @property
    def vanilla_regret(self) -> np.ndarray:
        return np.sum(self.instance.mu_star - self.rewards, axis=1)

    def W(self) -> np.ndarray:
        """Per-replicate, per-arm maxima of normalized partial noise sums."""
        return _batch_W(self.actions, self.noise, self.instance.K)

    def trajectory(self, r: int) -> Trajectory:
        actions = self.actions[r]
        K = self.instance.K
        one_hot = actions[None, :] == np.arange(K)[:, None]
        counts = np.zeros((K, self.T + 1), dtype=np.int64)
        np.cumsum(one_hot, axis=1, out=counts[:, 1:])
        return Trajectory(
            actions=actions.copy(),
            rewards=self.rewards[r],
            noise=self.noise[r].copy(),
            counts=counts,
            means=self.means[r],
        )


@dataclass(frozen=True)
class EventReport:
    """Noise maxima and the comparison events for one trajectory.

    ``t_plus_threshold`` and ``t_minus_threshold`` are ``None`` when no
    horizon in the search range qualifies.
    """

    W: np.ndarray = field(compare=False)
    e0_holds: bool
    t_plus_threshold: float | None
    t_minus_threshold: float | None


def _noise_stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _tie_stream(seed: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(1,)))
    )


def simulate_batch(
    instance: BanditInstance,
    T: int,
    gamma: float,
    seeds: Sequence[int],
    tie_break: str = "lowest_index",
) -> TrajectoryBatch:
    """Run UCB1 once per seed, vectorized over replicates.

    Parameters
    ----------
    instance : BanditInstance
    T : int
        Horizon, at least ``instance.K``.
    gamma : float
        Exploration rate.
    seeds : sequence of int
        One seed per replicate.
    tie_break : {"lowest_index", "random"}

    Returns
    -------
    TrajectoryBatch
    """
    config = UcbConfig(T=T, gamma=gamma, seed=0, tie_break=tie_break)
    T, gamma, tie_break = config.T, config.gamma, config.tie_break
    K = instance.K
    if T < K:
        raise ValueError(f"horizon T={T} is shorter than the K={K} initialization pulls")
    seeds = np.asarray([check_seed(s) for s in seeds], dtype=np.uint64)
    B = seeds.size
    noise = np.empty((B, T))
    for r, seed in enumerate(seeds):
        noise[r] = _noise_stream(int(seed)).standard_normal(T)
    tie_rngs = [_tie_stream(int(s)) for s in seeds] if tie_break == "random" else None

    mu = instance.means
    sigma = instance.sigma
    bonus = sigma * gamma
    rows = np.arange(B)
    counts = np.zeros((B, K))
    sums = np.zeros((B, K))
    actions = np.empty((B, T), dtype=np.int64)
    for t in range(T):
        if t < K:
            a = np.full(B, t, dtype=np.int64)
        else:
            index = sums / counts + bonus / np.sqrt(counts)
            a = np.argmax(index, axis=1)
            if tie_rngs is not None:
                top = index == index[rows, a][:, None]
                for r in np.flatnonzero(top.sum(axis=1) > 1):
                    a[r] = tie_rngs[r].choice(np.flatnonzero(top[r]))
        sums[rows, a] += mu[a] + sigma * noise[:, t]
        counts[rows, a] += 1.0
        actions[:, t] = a
    return TrajectoryBatch(
        instance=instance,
        gamma=gamma,
        seeds=seeds,
        actions=actions,
        noise=noise,
        counts=counts.astype(np.int64),
        sums=sums,
    )


def simulate_ucb1(instance: BanditInstance, config: UcbConfig) -> Trajectory:
    """Run UCB1 for ``config.T`` rounds.

    The first ``K`` rounds pull each arm once in index order; afterwards the
    arm maximizing ``mean + sigma * gamma / sqrt(count)`` is pulled.
    """
    batch = simulate_batch(
        instance, config.T, config.gamma, [config.seed], config.tie_break
    )
    return batch.trajectory(0)


def _check_pair(instance: BanditInstance, traj: Trajectory) -> None:
    if traj.K != instance.K:
        raise ValueError(
            f"trajectory has {traj.K} arms but the instance has {instance.K}"
        )


def pseudo_regret(instance: BanditInstance, traj: Trajectory) -> float:
    """``sum_a Delta_a * n_{a;T}``."""
    _check_pair(instance, traj)
    return float(instance.gaps @ traj.final_counts)


def vanilla_regret(instance: BanditInstance, traj: Trajectory) -> float:
    """``sum_t (mu_* - R_t)``."""
    _check_pair(instance, traj)
    return float(np.sum(instance.mu_star - traj.rewards))


def _max_normalized_partial_sum(x: np.ndarray) -> float:
    if x.size == 0:
        raise RuntimeError("empty noise record: every arm is pulled at least once")
    partial = np.cumsum(x) / np.sqrt(np.arange(1, x.size + 1))
    return float(np.max(np.abs(partial)))


def compute_W(traj: Trajectory) -> np.ndarray:
    """Per-arm ``max_t |t^{-1/2} sum_{i<=t} xi_{a;i}|`` over realized pulls."""
    return np.array([_max_normalized_partial_sum(x) for x in traj.noise_record])


def _batch_W(actions: np.ndarray, noise: np.ndarray, K: int) -> np.ndarray:
    B = actions.shape[0]
    W = np.empty((B, K))
    for a in range(K):
        mask = actions == a
        c = np.cumsum(mask, axis=1)
        s = np.cumsum(np.where(mask, noise, 0.0), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(s) / np.sqrt(c)
        W[:, a] = np.max(np.where(mask, z, 0.0), axis=1)
    return W


def _first_scale(g, target: float, hi: float, rel_tol: float = 1e-12) -> float:
    """Smallest-ish ``n`` in ``(0, hi]`` with ``g(n) > target``; assumes
    ``g`` nondecreasing and ``g(hi) > target``.  Returns a point where the
    inequality holds."""
    lo = 0.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if g(mid) > target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_tol * hi:
            break
    return hi


def _last_scale(g, target: float, hi: float, rel_tol: float = 1e-12) -> float:
    """Largest-ish ``n`` in ``(0, hi]`` with ``g(n) < target``; assumes
    ``g`` nondecreasing and ``g(hi) >= target``.  Returns a point where the
    inequality holds."""
    lo = 0.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if g(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * hi:
            break
    return lo


def events_from_stats(
    instance: BanditInstance,
    gamma: float,
    T: int,
    counts: np.ndarray,
    W: np.ndarray,
    curve: "GrowthCurve",
    cap: float = EVENT_SEARCH_CAP,
) -> EventReport:
    """Event report from final counts and noise maxima alone."""
    if instance.sigma <= 0.0:
        raise ValueError("events are defined only for sigma > 0")
    counts = np.asarray(counts, dtype=float)
    W = np.asarray(W, dtype=float)
    e0 = bool(np.max((gamma - W) / np.sqrt(counts) - instance.gaps / instance.sigma) > 0)

    shrink = np.maximum(1.0 - W / gamma, 0.0) ** 2
    inflate = (1.0 + W / gamma) ** 2
    n_cap = curve.n_star(cap * T)

    def plus_sum(n: float) -> float:
        return float(np.dot(shrink, curve.pulls_at_scale(n)))

    def minus_sum(n: float) -> float:
        return float(np.dot(inflate, curve.pulls_at_scale(n))) + instance.K

    t_plus = None
    if plus_sum(n_cap) > T:
        t_plus = curve.horizon_at_scale(_first_scale(plus_sum, T, n_cap))

    t_minus = None
    if instance.K < T:
        if minus_sum(n_cap) < T:
            t_minus = curve.horizon_at_scale(n_cap)
        else:
            n_lo = _last_scale(minus_sum, T, n_cap)
            if n_lo > 0.0:
                t_minus = curve.horizon_at_scale(n_lo)
    return EventReport(W=W, e0_holds=e0, t_plus_threshold=t_plus, t_minus_threshold=t_minus)


def event_report(
    instance: BanditInstance,
    config: UcbConfig,
    traj: Trajectory,
    curve: "GrowthCurve",
) -> EventReport:
    """Evaluate the comparison events for one trajectory.

    ``E_0`` holds when ``max_a ((gamma - W_a) / sqrt(n_{a;T}) - Delta_a /
    sigma) > 0``.  The upper event at horizon ``t`` asks
    ``sum_a n*_{a;t} (1 - W_a/gamma)_+^2 > T`` and the lower event asks
    ``sum_a n*_{a;t} (1 + W_a/gamma)^2 + K < T``.  Both sums are monotone
    in ``t`` so the thresholds are found by bisection over
    ``t in (0, 10 T]``, carried out in the curve's scale parameter.
    """
    _check_pair(instance, traj)
    return events_from_stats(
        instance, config.gamma, traj.T, traj.final_counts, compute_W(traj), curve
    )


def sandwich_bounds(
    report: EventReport, curve: "GrowthCurve", gamma: float
) -> tuple[np.ndarray | None, np.ndarray | None]:
    """Upper and lower pull bounds implied by the detected events.

    The upper bound ``n*_{a;T+} (1 + W_a/gamma)^2 + 1`` is returned when a
    finite upper threshold exists; the lower bound
    ``n*_{a;T-} (1 - W_a/gamma)_+^2`` when ``E_0`` holds and a lower
    threshold exists.
    """
    upper = lower = None
    if report.t_plus_threshold is not None:
        upper = curve.n_star_a(report.t_plus_threshold) * (1.0 + report.W / gamma) ** 2 + 1.0
    if report.e0_holds and report.t_minus_threshold is not None:
        lower = curve.n_star_a(report.t_minus_threshold) * np.maximum(
            1.0 - report.W / gamma, 0.0
        ) ** 2
    return upper, lower


class UCB1(BaseEstimator):
    """UCB1 policy with a configurable exploration rate.

    Parameters
    ----------
    gamma : float or None
        Exploration rate; ``None`` uses ``sqrt(2 log T)`` at run time.
    tie_break : {"lowest_index", "random"}
    random_state : int
        Seed for the reward noise (and tie-breaking).

    Examples
    --------
    >>> policy = UCB1(random_state=3)
    >>> traj = policy.fit(BanditInstance([0.0, -0.1], 0.1), T=500).trajectory_
    >>> int(traj.final_counts.sum())
    500
    """

    def __init__(self, gamma=None, tie_break="lowest_index", random_state=0):
        self.gamma = gamma
        self.tie_break = tie_break
        self.random_state = random_state

    def _config(self, T: int) -> UcbConfig:
        gamma = self.gamma if self.gamma is not None else math.sqrt(2.0 * math.log(T))
        return UcbConfig(
            T=T, gamma=gamma, seed=self.random_state, tie_break=self.tie_break
        )

    def fit(self, instance: BanditInstance, T: int) -> "UCB1":
        """Play ``T`` rounds against ``instance``; stores ``trajectory_``,
        ``counts_``, ``means_`` and ``gamma_``."""
        config = self._config(T)
        traj = simulate_ucb1(instance, config)
        self.gamma_ = config.gamma
        self.trajectory_ = traj
        self.counts_ = traj.final_counts.copy()
        self.means_ = traj.means.copy()
        self.pseudo_regret_ = pseudo_regret(instance, traj)
        return self
