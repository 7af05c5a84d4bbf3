"""Reproducible Monte-Carlo harness for UCB1 regret and arm pulls.

Replicate ``r`` of a study with base seed ``s`` is simulated from seed
``derive_seed(s, r)``: a splitmix64 finalizer applied to the base seed, XOR'd
with the replicate index, and finalized again.  Replicates are grouped in
fixed-size chunks that may run in worker processes, and results are
reassembled in replicate order, so every summary is a pure function of
``(instance, T, gamma, tie_break, reps, base_seed)`` whatever the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ucblab._validation import check_positive_int, check_seed
from ucblab.bandit import (
    BanditInstance,
    UcbConfig,
    events_from_stats,
    sandwich_bounds,
    simulate_batch,
)
from ucblab.oracle import GrowthCurve, lai_robbins_regret, oracle_solution

MASK64 = (1 << 64) - 1
CHUNK = 200
WORKERS_ENV = "UCBLAB_WORKERS"
QUANTILE_LEVELS = (0.05, 0.25, 0.5, 0.75, 0.95)


class McFailure(RuntimeError):
    """A Monte-Carlo study could not complete; no partial summary exists."""


def _mix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, replicate: int) -> int:
    """Seed of replicate ``replicate``; stable across versions."""
    return _mix64(_mix64(check_seed(base_seed)) ^ (int(replicate) & MASK64))


@dataclass(frozen=True)
class McConfig:
    reps: int = 1000
    base_seed: int = 0
    workers: int | str = "auto"

    def __post_init__(self) -> None:
        object.__setattr__(self, "reps", check_positive_int("reps", self.reps))
        object.__setattr__(self, "base_seed", check_seed(self.base_seed))
        if self.workers != "auto":
            object.__setattr__(self, "workers", check_positive_int("workers", self.workers))

    def seeds(self) -> list[int]:
        return [derive_seed(self.base_seed, r) for r in range(self.reps)]

    def n_workers(self) -> int:
        if self.workers != "auto":
            return int(self.workers)
        env = os.environ.get(WORKERS_ENV)
        if env:
            return check_positive_int(WORKERS_ENV, int(env))
        return os.cpu_count() or 1


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float


@dataclass
class AuditCounts:
    """Outcome of a comparison-sandwich audit.

    ``events_held`` counts replicates where at least one event was detected,
    ``sandwich_held`` those among them whose checked bounds all held, and
    ``not_detected`` replicates with no usable event.  ``violations`` lists
    ``(replicate, seed, arm, side)`` for replay.
    """

    events_held: int = 0
    sandwich_held: int = 0
    not_detected: int = 0
    e0_count: int = 0
    upper_checked: int = 0
    lower_checked: int = 0
    violations: list[tuple[int, int, int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class McSummary:
    """Monte-Carlo summary of one UCB1 configuration."""

    reps: int
    mean_pseudo_regret: Estimate
    mean_vanilla_regret: Estimate
    mean_counts: np.ndarray
    counts_se: np.ndarray
    ratio_mean_abs_dev: np.ndarray
    ratio_mean_abs_dev_se: np.ndarray
    pseudo_regret_quantiles: dict[float, float]
    sandwich_audit: AuditCounts | None
    n_star_a: np.ndarray | None


def _mean_se(x: np.ndarray) -> Estimate:
    x = np.asarray(x, dtype=float)
    mean = math.fsum(x) / x.size
    if x.size < 2:
        return Estimate(mean, math.nan)
    var = math.fsum((x - mean) ** 2) / (x.size - 1)
    return Estimate(mean, math.sqrt(var / x.size))


def _replicate_chunk(
    instance: BanditInstance, T: int, gamma: float, tie_break: str, seeds: list[int]
) -> dict[str, np.ndarray]:
    batch = simulate_batch(instance, T, gamma, seeds, tie_break)
    rewards = batch.rewards
    means = batch.means
    resid = np.zeros_like(means)
    for a in range(instance.K):
        mask = batch.actions == a
        dev = np.where(mask, rewards - means[:, a : a + 1], 0.0)
        resid[:, a] = np.sum(dev**2, axis=1) / batch.counts[:, a]
    return {
        "counts": batch.counts,
        "pseudo": batch.pseudo_regret,
        "vanilla": batch.vanilla_regret,
        "noise_sum": batch.noise.sum(axis=1),
        "means": means,
        "W": batch.W(),
        "sigma_hat": np.sqrt(resid.mean(axis=1)),
    }


def _map_chunks(
    fn: Callable[..., dict[str, np.ndarray]],
    args: tuple,
    seeds: Sequence[int],
    workers: int,
) -> dict[str, np.ndarray]:
    chunks = [list(seeds[i : i + CHUNK]) for i in range(0, len(seeds), CHUNK)]
    try:
        if workers <= 1 or len(chunks) == 1:
            parts = [fn(*args, c) for c in chunks]
        else:
            with ProcessPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
                parts = list(pool.map(fn, *zip(*[(*args, c) for c in chunks])))
    except (MemoryError, BrokenProcessPool, OSError) as exc:
        raise McFailure(f"Monte-Carlo run failed: {exc!r}") from exc
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def simulate_replicates(
    instance: BanditInstance, ucb_config: UcbConfig, mc_config: McConfig
) -> dict[str, np.ndarray]:
    """Per-replicate statistics, in replicate order.

    Keys: ``counts`` (B, K), ``pseudo``, ``vanilla``, ``noise_sum``,
    ``means`` (B, K), ``W`` (B, K), ``sigma_hat``.
    """
    if ucb_config.T < instance.K:
        raise ValueError(f"T={ucb_config.T} < K={instance.K}")
    args = (instance, ucb_config.T, ucb_config.gamma, ucb_config.tie_break)
    return _map_chunks(_replicate_chunk, args, mc_config.seeds(), mc_config.n_workers())


def audit_replicates(
    instance: BanditInstance,
    gamma: float,
    T: int,
    counts: np.ndarray,
    W: np.ndarray,
    seeds: Sequence[int],
) -> AuditCounts:
    """Check the comparison sandwich on every replicate with detected events."""
    curve = GrowthCurve(instance, gamma)
    audit = AuditCounts()
    for r in range(counts.shape[0]):
        rep = events_from_stats(instance, gamma, T, counts[r], W[r], curve)
        audit.e0_count += rep.e0_holds
        upper, lower = sandwich_bounds(rep, curve, gamma)
        if upper is None and lower is None:
            audit.not_detected += 1
            continue
        audit.events_held += 1
        bad: list[tuple[int, str]] = []
        if upper is not None:
            audit.upper_checked += 1
            bad += [(int(a), "upper") for a in np.flatnonzero(counts[r] > upper)]
        if lower is not None:
            audit.lower_checked += 1
            bad += [(int(a), "lower") for a in np.flatnonzero(counts[r] < lower)]
        audit.violations += [(r, int(seeds[r]), a, side) for a, side in bad]
        audit.sandwich_held += not bad
    return audit


def run_mc(
    instance: BanditInstance,
    ucb_config: UcbConfig,
    mc_config: McConfig,
    audit: bool = False,
) -> McSummary:
    """Monte-Carlo estimates of regret and arm pulls for one configuration.

    ``ucb_config.seed`` is ignored; replicate seeds come from ``mc_config``.
    With ``audit=True`` (needs ``sigma > 0``) the comparison sandwich is
    checked on every replicate.
    """
    stats = simulate_replicates(instance, ucb_config, mc_config)
    B = mc_config.reps
    counts = stats["counts"].astype(float)
    mean_counts = np.array([_mean_se(counts[:, a]).mean for a in range(instance.K)])
    counts_se = np.array([_mean_se(counts[:, a]).se for a in range(instance.K)])

    n_star_a = None
    mad = np.full(instance.K, math.nan)
    mad_se = np.full(instance.K, math.nan)
    if instance.sigma > 0.0:
        n_star_a = oracle_solution(instance, ucb_config.T, ucb_config.gamma).n_star_a
        for a in range(instance.K):
            est = _mean_se(np.abs(counts[:, a] / n_star_a[a] - 1.0))
            mad[a], mad_se[a] = est.mean, est.se

    pseudo = stats["pseudo"]
    quantiles = {q: float(np.quantile(pseudo, q)) for q in QUANTILE_LEVELS}
    audit_counts = None
    if audit:
        audit_counts = audit_replicates(
            instance, ucb_config.gamma, ucb_config.T, stats["counts"], stats["W"],
            mc_config.seeds(),
        )
    return McSummary(
        reps=B,
        mean_pseudo_regret=_mean_se(pseudo),
        mean_vanilla_regret=_mean_se(stats["vanilla"]),
        mean_counts=mean_counts,
        counts_se=counts_se,
        ratio_mean_abs_dev=mad,
        ratio_mean_abs_dev_se=mad_se,
        pseudo_regret_quantiles=quantiles,
        sandwich_audit=audit_counts,
        n_star_a=n_star_a,
    )


def gap_instance(K: int, delta: float, sigma: float) -> BanditInstance:
    """One optimal arm at mean 0 and ``K - 1`` arms at gap ``delta``."""
    return BanditInstance([0.0] + [-float(delta)] * (K - 1), sigma)


SWEEP_COLUMNS = ("delta", "reg_mc_mean", "reg_mc_se", "reg_star", "reg_lr", "err_theta")
PULL_COLUMNS = ("delta", "arm", "n_mc_mean", "n_mc_se", "n_star", "ratio_mad", "ratio_mad_se")


def regret_sweep(
    K: int,
    sigma: float,
    T: int,
    gamma: float,
    delta_grid: Sequence[float],
    mc_config: McConfig,
    pulls: list[dict] | None = None,
) -> list[dict]:
    """Regret versus gap: Monte-Carlo mean, theoretical and Lai-Robbins.

    Each row follows :data:`SWEEP_COLUMNS`.  If ``pulls`` is a list, one row
    per (gap, arm) in :data:`PULL_COLUMNS` is appended to it.
    """
    delta_grid = [float(d) for d in delta_grid]
    if not delta_grid:
        raise ValueError("delta_grid must be nonempty")
    if any(d < 0 for d in delta_grid):
        raise ValueError("gaps must be nonnegative")
    rows = []
    config = UcbConfig(T=T, gamma=gamma)
    for delta in delta_grid:
        inst = gap_instance(K, delta, sigma)
        summary = run_mc(inst, config, mc_config)
        sol = oracle_solution(inst, T, gamma)
        rows.append(
            {
                "delta": delta,
                "reg_mc_mean": summary.mean_pseudo_regret.mean,
                "reg_mc_se": summary.mean_pseudo_regret.se,
                "reg_star": sol.reg_star,
                "reg_lr": lai_robbins_regret(inst, T),
                "err_theta": sol.budget.err_theta if sol.budget else math.nan,
            }
        )
        if pulls is not None:
            for a in range(K):
                pulls.append(
                    {
                        "delta": delta,
                        "arm": a,
                        "n_mc_mean": float(summary.mean_counts[a]),
                        "n_mc_se": float(summary.counts_se[a]),
                        "n_star": float(sol.n_star_a[a]),
                        "ratio_mad": float(summary.ratio_mean_abs_dev[a]),
                        "ratio_mad_se": float(summary.ratio_mean_abs_dev_se[a]),
                    }
                )
    return rows


def sandwich_audit(
    instance: BanditInstance, ucb_config: UcbConfig, mc_config: McConfig
) -> AuditCounts:
    """Run replicates and audit the comparison sandwich on each."""
    if instance.sigma <= 0.0:
        raise ValueError("the sandwich audit needs sigma > 0")
    stats = simulate_replicates(instance, ucb_config, mc_config)
    return audit_replicates(
        instance, ucb_config.gamma, ucb_config.T, stats["counts"], stats["W"],
        mc_config.seeds(),
    )


def _crossing_chunk(T: int, x_grid: np.ndarray, seeds: list[int]) -> dict[str, np.ndarray]:
    norm = np.sqrt(np.arange(1, T + 1))
    hits = np.zeros((len(seeds), x_grid.size), dtype=bool)
    for i, seed in enumerate(seeds):
        xi = np.random.Generator(np.random.PCG64(seed)).standard_normal(T)
        m = np.max(np.cumsum(xi) / norm)
        hits[i] = m > x_grid
    return {"hits": hits}


CROSSING_COLUMNS = ("x", "estimate", "se", "bound_shape", "calibration_ratio")


def boundary_crossing_mc(
    T: int, x_grid: Sequence[float], mc_config: McConfig
) -> list[dict]:
    """Estimate ``P(max_{t<=T} t^{-1/2} sum_{s<=t} xi_s > x)`` on a grid.

    ``bound_shape`` is ``log T * x * exp(-x^2/2)`` and ``calibration_ratio``
    the estimate divided by it (the universal constant is not asserted).
    """
    T = check_positive_int("T", T)
    x = np.asarray(x_grid, dtype=float)
    if x.size == 0 or np.any(x < 1.0):
        raise ValueError("x_grid must be nonempty with entries >= 1")
    hits = _map_chunks(_crossing_chunk, (T, x), mc_config.seeds(), mc_config.n_workers())["hits"]
    rows = []
    for j, xj in enumerate(x.tolist()):
        est = _mean_se(hits[:, j].astype(float))
        p = est.mean
        se = math.sqrt(p * (1.0 - p) / mc_config.reps)
        shape = math.log(T) * xj * math.exp(-(xj**2) / 2.0)
        rows.append(
            {
                "x": xj,
                "estimate": p,
                "se": se,
                "bound_shape": shape,
                "calibration_ratio": p / shape if shape > 0 else math.nan,
            }
        )
    return rows
