"""Noiseless theory for UCB1: fixed-point pull targets and regret.

For a horizon ``t`` the total-pull scale ``n_{*,t}`` is the unique root of

    sum_a n * (1 + sqrt(n) * Delta_a / (sigma * gamma)) ** -2 = t,

and the per-arm targets are the summands evaluated at that root.  The left
side is strictly increasing in ``n`` and the root always lies in
``[t / K, t / |A_0|]`` where ``A_0`` is the set of optimal arms, so plain
bisection on that bracket is both safe and fast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from ucblab.bandit import BanditInstance

REL_TOL = 1e-12
MAX_ITER = 200


@dataclass(frozen=True)
class ErrorBudget:
    """Error terms controlling how sharp the fixed-point description is.

    Attributes
    ----------
    err_theta : float
        ``(sqrt(log gamma) + sqrt(log log T)) / gamma + K / T
        + max_a (Delta_a / sigma) ** 2 / gamma ** 2``.
    vartheta_star : float
        ``gamma ** -2 * T * exp(-gamma ** 2 / 2)``.
    eps_TK : float
        ``sqrt(log log T / log T) + K / T``.
    """

    err_theta: float
    vartheta_star: float
    eps_TK: float


@dataclass(frozen=True)
class OracleSolution:
    """Fixed-point solution at horizon ``T``.

    ``budget`` is ``None`` when the error budget is undefined for the given
    ``(T, gamma)`` (``gamma < e`` or ``T <= e``).
    """

    T: float
    gamma: float
    n_star: float
    n_star_a: np.ndarray
    reg_star: float
    d_star: float
    mu_plus: float
    budget: ErrorBudget | None


class Regime(str, Enum):
    LR_ACCURATE = "lr_accurate"
    LR_LOOSE = "lr_loose"
    OUT_OF_CLASS = "out_of_class"


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0.0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return value


def _scaled_gaps(instance: BanditInstance, gamma: float) -> np.ndarray:
    if instance.sigma <= 0.0:
        raise ValueError("the fixed-point equation needs sigma > 0")
    gamma = _check_positive("gamma", gamma)
    return instance.gaps / (instance.sigma * gamma)


def _pulls_at(n: float, s: np.ndarray) -> np.ndarray:
    return n / (1.0 + math.sqrt(n) * s) ** 2


def _solve_scaled(s: np.ndarray, t: float) -> float:
    """Root ``n`` of ``sum(n / (1 + sqrt(n) s)^2) = t`` by bisection."""
    k = s.size
    n_opt = int(np.count_nonzero(s == 0.0))
    lo, hi = t / k, t / n_opt
    if lo == hi:
        return lo
    for _ in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        if float(np.sum(_pulls_at(mid, s))) < t:
            lo = mid
        else:
            hi = mid
        if hi - lo <= REL_TOL * hi:
            break
    return 0.5 * (lo + hi)


def _solve_scaled_many(s: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """:func:`_solve_scaled` for many horizons at once.

    Same bracket, midpoint and stopping rule per horizon, so each entry
    equals the scalar result; converged entries are frozen.
    """
    k = s.size
    n_opt = int(np.count_nonzero(s == 0.0))
    lo, hi = ts / k, ts / n_opt
    if k == n_opt:
        return lo
    active = np.ones(ts.size, dtype=bool)
    for _ in range(MAX_ITER):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        mid = 0.5 * (lo[idx] + hi[idx])
        total = np.sum(mid[:, None] / (1.0 + np.sqrt(mid)[:, None] * s) ** 2, axis=1)
        below = total < ts[idx]
        lo[idx[below]] = mid[below]
        hi[idx[~below]] = mid[~below]
        active[idx] = ~(hi[idx] - lo[idx] <= REL_TOL * hi[idx])
    return 0.5 * (lo + hi)


def solve_n_star(instance: BanditInstance, T: float, gamma: float) -> float:
    """Solve the fixed-point equation for the total-pull scale ``n_*``.

    Parameters
    ----------
    instance : BanditInstance
        Must have ``sigma > 0``.
    T : float
        Horizon (any positive real).
    gamma : float
        Exploration rate.

    Returns
    -------
    float
        ``n_*`` to relative tolerance ``1e-12``.
    """
    T = _check_positive("T", T)
    return _solve_scaled(_scaled_gaps(instance, gamma), T)


def error_budget(instance: BanditInstance, T: float, gamma: float) -> ErrorBudget:
    """Evaluate the error budget; requires ``gamma >= e`` and ``T > e``."""
    T = _check_positive("T", T)
    gamma = _check_positive("gamma", gamma)
    if gamma < math.e:
        raise ValueError(f"error budget needs gamma >= e, got {gamma}")
    if T <= math.e:
        raise ValueError(f"error budget needs T > e, got {T}")
    if instance.sigma <= 0.0:
        raise ValueError("error budget needs sigma > 0")
    loglog = math.log(math.log(T))
    max_snr = float(np.max(instance.gaps)) / instance.sigma
    err = (
        (math.sqrt(math.log(gamma)) + math.sqrt(loglog)) / gamma
        + instance.K / T
        + max_snr**2 / gamma**2
    )
    vartheta = T * math.exp(-(gamma**2) / 2.0) / gamma**2
    eps = math.sqrt(loglog / math.log(T)) + instance.K / T
    return ErrorBudget(err_theta=err, vartheta_star=vartheta, eps_TK=eps)


def _solution_from_root(
    instance: BanditInstance, T: float, gamma: float, n: float, s: np.ndarray
) -> OracleSolution:
    n_a = _pulls_at(n, s)
    reg = float(np.dot(instance.gaps, n_a))
    d_star = float(np.sum(np.sqrt(n_a / n) * n_a)) / T
    try:
        budget = error_budget(instance, T, gamma)
    except ValueError:
        budget = None
    return OracleSolution(
        T=T,
        gamma=gamma,
        n_star=n,
        n_star_a=n_a,
        reg_star=reg,
        d_star=d_star,
        mu_plus=instance.mu_star + instance.sigma * gamma / math.sqrt(n),
        budget=budget,
    )


def oracle_solution(instance: BanditInstance, T: float, gamma: float) -> OracleSolution:
    """Fixed point, per-arm targets, theoretical regret and ``D_*`` at ``T``."""
    T = _check_positive("T", T)
    s = _scaled_gaps(instance, gamma)
    return _solution_from_root(instance, T, float(gamma), _solve_scaled(s, T), s)


class GrowthCurve:
    """Evaluator for the noiseless growth curves ``t -> n*_{a;t}``.

    Besides evaluation at a horizon ``t`` (which solves the fixed point),
    the curve can be walked in its natural parameter ``n = n_{*,t}``:
    :meth:`pulls_at_scale` gives ``n*_{a;t}`` and :meth:`horizon_at_scale`
    gives ``t`` without any root finding.
    """

    def __init__(self, instance: BanditInstance, gamma: float) -> None:
        self.instance = instance
        self.gamma = _check_positive("gamma", gamma)
        self._s = _scaled_gaps(instance, gamma)

    @property
    def scaled_gaps(self) -> np.ndarray:
        return self._s

    def n_star(self, t: float) -> float:
        return _solve_scaled(self._s, _check_positive("t", t))

    def n_star_a(self, t: float) -> np.ndarray:
        return _pulls_at(self.n_star(t), self._s)

    def pulls_at_scale(self, n: float) -> np.ndarray:
        return _pulls_at(n, self._s)

    def horizon_at_scale(self, n: float) -> float:
        return float(np.sum(_pulls_at(n, self._s)))

    def solution(self, t: float) -> OracleSolution:
        t = _check_positive("t", t)
        return _solution_from_root(
            self.instance, t, self.gamma, _solve_scaled(self._s, t), self._s
        )


def growth_curve(
    instance: BanditInstance, gamma: float, t_grid: Iterable[float]
) -> list[OracleSolution]:
    """Oracle solutions along an ascending grid of horizons."""
    t_grid = [float(t) for t in t_grid]
    if any(t <= 0.0 for t in t_grid):
        raise ValueError("t_grid entries must be positive")
    if any(b < a for a, b in zip(t_grid, t_grid[1:])):
        raise ValueError("t_grid must be sorted ascending")
    curve = GrowthCurve(instance, gamma)
    roots = _solve_scaled_many(curve.scaled_gaps, np.asarray(t_grid))
    return [
        _solution_from_root(instance, t, curve.gamma, float(n), curve.scaled_gaps)
        for t, n in zip(t_grid, roots)
    ]


def lai_robbins_regret(instance: BanditInstance, T: float) -> float:
    """``2 log T * sum over suboptimal arms of sigma^2 / Delta_a``."""
    if T < 2:
        raise ValueError(f"T must be >= 2, got {T}")
    gaps = instance.gaps[instance.gaps > 0.0]
    if gaps.size == 0:
        return 0.0
    return 2.0 * math.log(T) * float(np.sum(instance.sigma**2 / gaps))


def minimax_instance(K: int, T: float, sigma: float) -> BanditInstance:
    """Worst-case instance: one optimal arm, the rest at gap
    ``sigma * sqrt(2 log T / (T / K))``."""
    if K < 2:
        raise ValueError(f"minimax instance needs K >= 2, got {K}")
    if T < K:
        raise ValueError(f"need T >= K, got T={T}, K={K}")
    gap = sigma * math.sqrt(2.0 * math.log(T) / (T / K))
    return BanditInstance([0.0] + [-gap] * (K - 1), sigma)


def classify_regime(instance: BanditInstance, T: float, L: float) -> Regime:
    """Compare the smallest positive gap (in noise units) to
    ``L * sqrt(K log T / T)``."""
    L = _check_positive("L", L)
    if instance.sigma <= 0.0:
        raise ValueError("classify_regime needs sigma > 0")
    gaps = instance.gaps[instance.gaps > 0.0]
    if gaps.size == 0:
        return Regime.OUT_OF_CLASS
    threshold = L * math.sqrt(instance.K * math.log(T) / T)
    if float(np.min(gaps)) / instance.sigma >= threshold:
        return Regime.LR_ACCURATE
    return Regime.LR_LOOSE


def theory_columns(
    instance: BanditInstance, T: float, gamma: float
) -> dict[str, float]:
    """Theory values reported next to Monte-Carlo estimates."""
    sol = oracle_solution(instance, T, gamma)
    return {
        "reg_star": sol.reg_star,
        "reg_lr": lai_robbins_regret(instance, T),
        "err_theta": sol.budget.err_theta if sol.budget else math.nan,
    }

