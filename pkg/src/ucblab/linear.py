"""UCB1 over a finite decision set with linear arm means, and ridge
inference on the adaptively collected design.

Arm ``a`` has covariate ``z_a`` (row ``a`` of ``Z``) and mean
``<z_a, beta_star>``.  UCB1 runs on those arm means exactly as in the plain
bandit; afterwards ``beta_star`` is estimated from the realized design by
ridge regression and the normalized estimation error is compared to
N(0, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ucblab._validation import check_sigma_positive
from ucblab.bandit import BanditInstance, Trajectory, UcbConfig, simulate_batch
from ucblab.oracle import ErrorBudget, oracle_solution

RANK_TOL = 1e-10
EIG_FLOOR = 1e-12


class SingularDesignError(np.linalg.LinAlgError):
    """The sample covariance is singular (or numerically so)."""


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Decision set ``Z`` (K x d), coefficients ``beta_star`` and noise ``sigma``."""

    Z: np.ndarray
    beta_star: np.ndarray
    sigma: float

    def __post_init__(self) -> None:
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float))
        beta = np.asarray(self.beta_star, dtype=float).ravel()
        if Z.shape[1] != beta.size:
            raise ValueError(
                f"Z has {Z.shape[1]} columns but beta_star has {beta.size} entries"
            )
        if not (np.all(np.isfinite(Z)) and np.all(np.isfinite(beta))):
            raise ValueError("Z and beta_star must be finite")
        sv = np.linalg.svd(Z, compute_uv=False)
        if sv.size < beta.size or sv[-1] <= RANK_TOL * sv[0]:
            raise SingularDesignError(
                f"rows of Z must span R^{beta.size}; singular values {sv}"
            )
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "beta_star", beta)
        object.__setattr__(self, "sigma", check_sigma_positive(self.sigma))

    @property
    def K(self) -> int:
        return self.Z.shape[0]

    @property
    def d(self) -> int:
        return self.Z.shape[1]

    @cached_property
    def arm_means(self) -> np.ndarray:
        return self.Z @ self.beta_star

    @property
    def gaps(self) -> np.ndarray:
        return self.instance.gaps

    @cached_property
    def instance(self) -> BanditInstance:
        return BanditInstance(self.arm_means, self.sigma)


@dataclass(frozen=True)
class PopulationQuantities:
    S_star: np.ndarray
    z_K: float
    sigma_star: float
    n_star_a: np.ndarray
    d_star: float
    budget: ErrorBudget | None


@dataclass(frozen=True, eq=False)
class LinearRunArtifacts:
    X: np.ndarray
    Y: np.ndarray
    S_T: np.ndarray
    S_star_T: np.ndarray
    z_K: float
    sigma_star_T: float

    @property
    def T(self) -> int:
        return self.X.shape[0]


def sample_covariance(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X.T @ X / X.shape[0]


def population_quantities(model: LinearModel, T: float, gamma: float) -> PopulationQuantities:
    """Population covariance ``T^{-1} sum_a n*_{a;T} z_a z_a^T`` and friends,
    with ``n*`` taken from the fixed point at the linear gaps."""
    sol = oracle_solution(model.instance, T, gamma)
    S_star = (model.Z.T * sol.n_star_a) @ model.Z / T
    S_star = 0.5 * (S_star + S_star.T)
    z_K = float(np.dot(sol.n_star_a, np.sum(model.Z**2, axis=1))) / T
    return PopulationQuantities(
        S_star=S_star,
        z_K=z_K,
        sigma_star=float(np.linalg.eigvalsh(S_star)[0]),
        n_star_a=sol.n_star_a,
        d_star=sol.d_star,
        budget=sol.budget,
    )


def responses(model: LinearModel, X: np.ndarray, noise: np.ndarray) -> np.ndarray:
    return X @ model.beta_star + model.sigma * noise


def simulate_linear(
    model: LinearModel, ucb_config: UcbConfig
) -> tuple[Trajectory, LinearRunArtifacts]:
    """Run UCB1 on the linear arm means and assemble the regression data.

    The trajectory's rewards are the responses ``y_t``; the design row of
    round ``t`` is ``z_{A_t}``.
    """
    batch = simulate_batch(
        model.instance, ucb_config.T, ucb_config.gamma, [ucb_config.seed], ucb_config.tie_break
    )
    traj = batch.trajectory(0)
    X = model.Z[traj.actions]
    pop = population_quantities(model, ucb_config.T, ucb_config.gamma)
    return traj, LinearRunArtifacts(
        X=X,
        Y=responses(model, X, traj.noise),
        S_T=sample_covariance(X),
        S_star_T=pop.S_star,
        z_K=pop.z_K,
        sigma_star_T=pop.sigma_star,
    )


def _check_invertible(S: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvalsh(S)
    if eig[0] <= EIG_FLOOR * max(eig[-1], 0.0) or eig[-1] <= 0.0:
        raise SingularDesignError(
            f"sample covariance is singular: lambda_min={eig[0]:.3e}, "
            f"lambda_max={eig[-1]:.3e}"
        )
    return eig


def ridge(X: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Ridge estimate ``T^{-1} (S_T + lam I)^{-1} X^T Y``.

    ``lam = 0`` is ordinary least squares and requires an invertible
    ``S_T``; a singular design raises :class:`SingularDesignError` rather
    than falling back to a pseudoinverse.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    lam = float(lam)
    if not lam >= 0.0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    T, d = X.shape
    S = sample_covariance(X)
    if lam == 0.0:
        _check_invertible(S)
    A = S + lam * np.eye(d)
    return scipy.linalg.solve(A, X.T @ Y / T, assume_a="pos")


def inv_sqrt_psd(S: np.ndarray) -> np.ndarray:
    """``S^{-1/2}`` by symmetric eigendecomposition."""
    S = 0.5 * (S + S.T)
    _check_invertible(S)
    eig, V = np.linalg.eigh(S)
    return (V / np.sqrt(eig)) @ V.T


def clt_statistic(
    artifacts: LinearRunArtifacts,
    beta_hat: np.ndarray,
    beta_star: np.ndarray,
    lam: float,
    w: Sequence[float],
    sigma: float,
) -> float:
    """``<w, sqrt(T/sigma^2) S_T^{-1/2} (S_T + lam I)(beta_hat - (S_T + lam
    I)^{-1} S_T beta_star)>``.

    The centering ``(S_T + lam I)^{-1} S_T beta_star`` is the ridge fit to the
    noiseless responses ``X beta_star``, so noiseless data give exactly 0.
    """
    w = np.asarray(w, dtype=float).ravel()
    if abs(np.linalg.norm(w) - 1.0) > 1e-10:
        raise ValueError(f"w must be a unit vector, |w| = {np.linalg.norm(w)}")
    sigma = check_sigma_positive(sigma)
    X, S = artifacts.X, artifacts.S_T
    root = inv_sqrt_psd(S)
    centered = np.asarray(beta_hat, dtype=float) - ridge(X, X @ beta_star, lam)
    v = (S + lam * np.eye(S.shape[0])) @ centered
    return math.sqrt(artifacts.T) / sigma * float(w @ (root @ v))


class RidgeRegression(RegressorMixin, BaseEstimator):
    """Ridge regression without intercept, with the ``1/T``-scaled loss
    ``|Y - X b|^2 / T + lam |b|^2``.

    Parameters
    ----------
    lam : float, default=0.0
        Penalty; ``0`` gives least squares.
    """

    def __init__(self, lam: float = 0.0):
        self.lam = lam

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        self.coef_ = ridge(X, y, self.lam)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return X @ self.coef_


def linear_preset() -> tuple[LinearModel, int, float]:
    """Rank-3 decision set with five arms used by the CLT check.

    Returns the model, horizon and exploration rate.
    """
    s = 1.0 / math.sqrt(2.0)
    Z = np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [s, s, 0.0],
            [0.0, s, s],
        ]
    )
    beta = np.array([0.02, 0.0, -0.01])
    T = 10_000
    return LinearModel(Z, beta, 0.1), T, math.sqrt(6.0 * math.log(T))


def _clt_chunk(
    model: LinearModel,
    T: int,
    gamma: float,
    tie_break: str,
    lams: tuple[float, ...],
    w: np.ndarray,
    seeds: list[int],
) -> dict[str, np.ndarray]:
    batch = simulate_batch(model.instance, T, gamma, seeds, tie_break)
    pop = population_quantities(model, T, gamma)
    stat = np.empty((len(seeds), len(lams)))
    cov_err = np.empty(len(seeds))
    op_star = np.linalg.norm(pop.S_star, 2)
    for r in range(len(seeds)):
        X = model.Z[batch.actions[r]]
        art = LinearRunArtifacts(
            X=X,
            Y=responses(model, X, batch.noise[r]),
            S_T=sample_covariance(X),
            S_star_T=pop.S_star,
            z_K=pop.z_K,
            sigma_star_T=pop.sigma_star,
        )
        for j, lam in enumerate(lams):
            beta_hat = ridge(art.X, art.Y, lam)
            stat[r, j] = clt_statistic(art, beta_hat, model.beta_star, lam, w, model.sigma)
        cov_err[r] = np.linalg.norm(art.S_T - pop.S_star, 2) / op_star
    return {"statistic": stat, "cov_rel_err": cov_err}


def linear_clt_mc(
    model: LinearModel,
    ucb_config: UcbConfig,
    mc_config,
    w: Sequence[float],
    lams: Sequence[float] = (0.0,),
) -> dict[str, np.ndarray]:
    """Per-replicate CLT statistics (one column per ``lam``) and relative
    operator-norm distance between ``S_T`` and ``S*_T``."""
    from ucblab.montecarlo import _map_chunks

    w = np.asarray(w, dtype=float)
    args = (model, ucb_config.T, ucb_config.gamma, ucb_config.tie_break, tuple(lams), w)
    return _map_chunks(_clt_chunk, args, mc_config.seeds(), mc_config.n_workers())
