"""
Classical edge scorers that need no training: correlation, anticorrelation
and the graphical lasso, plus the validation sweep over the lasso penalty.
"""

from __future__ import annotations

import logging
import math
import typing as t
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from nugget._configuration import get_config
from nugget._exceptions import ArgumentError, NumericalError
from nugget.dataset import GameSample
from nugget.linalg import Matrix, Vector
from nugget.metrics import roc_auc

logger = logging.getLogger(__name__)

BaselineName: t.TypeAlias = t.Literal["correlation", "anticorrelation", "glasso"]

DEFAULT_GRID: tuple[float, ...] = tuple(10.0**k for k in range(-5, 6))


@dataclass(frozen=True)
class EdgeScores:
    """
    Symmetric pair scores with a zero diagonal. `decision_threshold` turns
    them into a hard prediction: an edge wherever the score exceeds it.
    """

    scores: Matrix
    decision_threshold: float = 0.0

    def __post_init__(self) -> None:
        s = self.scores
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ArgumentError(f"Edge scores must be square, got {s.shape}")
        if not np.array_equal(s, s.T):
            raise ArgumentError("Edge scores must be symmetric")
        if not np.all(np.isfinite(s)):
            raise ArgumentError("Edge scores must be finite")


def _check_actions(x: Matrix, method: str) -> Matrix:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ArgumentError(f"{method} needs an N × K action matrix with K ≥ 2, got {x.shape}")
    return x


def correlation(x: Matrix) -> EdgeScores:
    """Pearson correlation between the action rows of every pair of players"""
    x = _check_actions(x, "correlation")
    centered = x - x.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)

    constant = norms == 0
    if np.any(constant):
        logger.warning(
            "Players %s take the same action in every game; their scores are set to 0",
            np.flatnonzero(constant).tolist(),
        )
    safe = np.where(constant, 1.0, norms)
    unit = centered / safe[:, None]
    corr = np.clip(unit @ unit.T, -1.0, 1.0)
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 0.0)
    return EdgeScores(corr)


def anticorrelation(x: Matrix) -> EdgeScores:
    corr = correlation(x).scores
    return EdgeScores(np.where(corr == 0, 0.0, -corr))


def empirical_covariance(x: Matrix) -> Matrix:
    """
    Covariance of the rows (players) over the columns (games) with the 1/(K-1)
    normalisation. A ridge of `glasso_jitter`·tr(S)/N is added when the
    estimate is rank deficient.
    """
    x = _check_actions(x, "graphical_lasso")
    n, k = x.shape
    s = np.atleast_2d(np.cov(x, ddof=1))
    conf = get_config()

    lam = np.linalg.eigvalsh(s)
    scale = float(np.trace(s)) / n
    if scale == 0:
        raise NumericalError("Every player takes a constant action; the covariance is zero")
    if lam[0] < -1e-8 * max(scale, 1.0):
        raise NumericalError(f"Covariance is not positive semidefinite (min eigenvalue {lam[0]:.3e})")
    if k <= n or lam[0] <= conf.glasso_jitter * scale:
        s = s + conf.glasso_jitter * scale * np.eye(n)
    return s


@dataclass
class GlassoResult:
    precision: Matrix
    covariance: Matrix
    iterations: int
    converged: bool
    objective: list[float] = field(default_factory=list[float])

    def scores(self) -> EdgeScores:
        abs_theta = np.abs(self.precision)
        np.fill_diagonal(abs_theta, 0.0)
        return EdgeScores(abs_theta, decision_threshold=0.0)


def _soft(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def _lasso(w11: Matrix, s12: Vector, lam: float, beta: Vector) -> Vector:
    """min_β ½βᵀW11β - s12ᵀβ + λ‖β‖₁ by cyclic coordinate descent, warm started"""
    conf = get_config()
    beta = beta.copy()
    grad = w11 @ beta
    for _ in range(conf.glasso_inner_max_iter):
        delta = 0.0
        for i in range(len(beta)):
            old = beta[i]
            partial = s12[i] - grad[i] + w11[i, i] * old
            new = _soft(partial, lam) / w11[i, i]
            if new != old:
                grad += w11[:, i] * (new - old)
                beta[i] = new
                delta = max(delta, abs(new - old))
        if delta < conf.glasso_inner_tol:
            break
    return beta


def _neg_log_det(w: Matrix) -> float:
    sign, logdet = np.linalg.slogdet(w)
    if sign <= 0:
        raise NumericalError("Graphical lasso covariance iterate lost positive definiteness")
    return -float(logdet)


def graphical_lasso_fit(x: Matrix, lam: float) -> GlassoResult:
    """
    Sparse precision estimate minimising
        -log det Θ + tr(SΘ) + λ Σ_{i≠j} |Θ_ij|
    by block coordinate descent on the covariance W = Θ⁻¹, one row and
    column at a time, each through an inner lasso.

    `objective` holds -log det W after every sweep. W maximises log det W
    over the box |W - S| ≤ λ off the diagonal, so this value can only go
    down. Convergence is declared when no entry of W moves by more than
    `glasso_tol` in a sweep.
    """
    if lam < 0 or not math.isfinite(lam):
        raise ArgumentError(f"Lasso penalty must be a finite non-negative number, got {lam}")
    conf = get_config()
    s = empirical_covariance(x)
    n = s.shape[0]

    w = s.copy()
    theta = np.linalg.inv(w)
    idx = np.arange(n)
    objective = [_neg_log_det(w)]
    converged = False
    sweeps = 0

    for sweeps in range(1, conf.glasso_max_sweeps + 1):
        before = w.copy()
        for j in range(n):
            rest = idx != j
            w11 = w[np.ix_(rest, rest)]
            s12 = s[rest, j]
            warm = -theta[rest, j] / theta[j, j]
            beta = _lasso(w11, s12, lam, warm)

            w12 = w11 @ beta
            w[rest, j] = w12
            w[j, rest] = w12
            theta_jj = 1.0 / (w[j, j] - float(w12 @ beta))
            theta[j, j] = theta_jj
            theta[rest, j] = -beta * theta_jj
            theta[j, rest] = -beta * theta_jj

        if not np.all(np.isfinite(theta)):
            raise NumericalError("Graphical lasso diverged; the covariance is too ill-conditioned")
        objective.append(_neg_log_det(w))
        if float(np.max(np.abs(w - before))) < conf.glasso_tol:
            converged = True
            break

    if not converged:
        logger.warning(
            "Graphical lasso (lambda=%g) did not converge in %d sweeps; using the last iterate",
            lam,
            sweeps,
        )
    theta = 0.5 * (theta + theta.T)
    return GlassoResult(
        precision=theta,
        covariance=w,
        iterations=sweeps,
        converged=converged,
        objective=objective,
    )


def graphical_lasso(x: Matrix, lam: float) -> EdgeScores:
    """Edge scores |Θ_ij| of the graphical lasso precision estimate"""
    return graphical_lasso_fit(x, lam).scores()


ScoreFn: t.TypeAlias = t.Callable[[Matrix, float], EdgeScores]


@dataclass(frozen=True)
class TuningResult:
    best_lambda: float
    val_auc: dict[float, float]
    test_scores: list[EdgeScores]


def tune_regularization(
    method: ScoreFn,
    val: t.Sequence[GameSample],
    test: t.Sequence[GameSample],
    grid: t.Sequence[float] = DEFAULT_GRID,
    workers: int = 1,
) -> TuningResult:
    """
    Picks the penalty with the best mean validation AUC (ties go to the
    smaller penalty) and scores the test graphs with it.
    """
    if not val:
        raise ArgumentError("Regularisation tuning needs a non-empty validation split")
    if not grid:
        raise ArgumentError("Regularisation grid is empty")

    def _val_auc(lam: float) -> float:
        return float(np.mean([roc_auc(method(s.actions, lam), s.adjacency) for s in val]))

    points = sorted(grid)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            aucs = list(pool.map(_val_auc, points))
    else:
        aucs = [_val_auc(lam) for lam in points]

    best_lambda, best_auc = points[0], aucs[0]
    for lam, auc in zip(points[1:], aucs[1:]):
        logger.debug("lambda=%g: validation AUC %.6f", lam, auc)
        if auc > best_auc:
            best_lambda, best_auc = lam, auc
    logger.info("Selected lambda=%g (validation AUC %.4f)", best_lambda, best_auc)

    return TuningResult(
        best_lambda=best_lambda,
        val_auc=dict(zip(points, aucs)),
        test_scores=[method(s.actions, best_lambda) for s in test],
    )


def run_baseline(name: BaselineName, x: Matrix, lam: float = 0.0) -> EdgeScores:
    match name:
        case "correlation":
            return correlation(x)
        case "anticorrelation":
            return anticorrelation(x)
        case "glasso":
            return graphical_lasso(x, lam)
