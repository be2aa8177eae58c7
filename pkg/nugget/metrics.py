"""
Per-graph edge metrics and their aggregation across test graphs.

Every metric looks only at the strict upper triangle: graphs are undirected,
so each unordered pair counts once and the diagonal never counts.
"""

from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.stats import rankdata

from nugget._exceptions import ArgumentError, UndefinedMetricError

logger = logging.getLogger(__name__)


@t.runtime_checkable
class HasScores(t.Protocol):
    @property
    def scores(self) -> npt.NDArray[np.float64]: ...


def _scores(scores: npt.ArrayLike | HasScores) -> npt.NDArray[np.float64]:
    if isinstance(scores, HasScores):
        return np.asarray(scores.scores, dtype=np.float64)
    return np.asarray(scores, dtype=np.float64)


def _pairs(
    scores: npt.ArrayLike | HasScores, truth: npt.ArrayLike
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.int8]]:
    s = _scores(scores)
    a = np.asarray(truth)
    if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape != a.shape:
        raise ArgumentError(f"Scores {s.shape} and truth {a.shape} must be matching N × N")
    if not np.all((a == 0) | (a == 1)):
        raise ArgumentError("Ground truth adjacency must be binary")
    iu = np.triu_indices(s.shape[0], 1)
    return s[iu], a[iu].astype(np.int8)


def roc_auc(scores: npt.ArrayLike | HasScores, truth: npt.ArrayLike) -> float:
    """
    Probability that a random true edge outscores a random non-edge, with
    ties counted as one half (Mann–Whitney statistic on midranks).
    """
    s, a = _pairs(scores, truth)
    if not np.all(np.isfinite(s)):
        raise ArgumentError("Edge scores must be finite")
    positives = int(a.sum())
    negatives = len(a) - positives
    if positives == 0 or negatives == 0:
        raise UndefinedMetricError(
            f"ROC AUC needs both edges and non-edges, got {positives} and {negatives}"
        )

    ranks = rankdata(s, method="average")
    u = float(ranks[a == 1].sum()) - positives * (positives + 1) / 2
    return u / (positives * negatives)


def accuracy(
    probabilities: npt.ArrayLike | HasScores, truth: npt.ArrayLike, threshold: float = 0.5
) -> float:
    s, a = _pairs(probabilities, truth)
    if len(a) == 0:
        raise ArgumentError("Accuracy needs at least two nodes")
    return float(np.mean((s > threshold) == (a == 1)))


@dataclass(frozen=True)
class GraphMetrics:
    auc: float
    accuracy: float


@dataclass(frozen=True)
class MetricReport:
    per_graph: list[GraphMetrics]
    mean_auc: float
    sem_auc: float
    mean_acc: float
    sem_acc: float

    def rows(self) -> list[tuple[str, float, float]]:
        """CSV rows (graph_id, auc, accuracy): one per graph, then `mean` and `sem`"""
        out = [(str(i), m.auc, m.accuracy) for i, m in enumerate(self.per_graph)]
        out.append(("mean", self.mean_auc, self.mean_acc))
        out.append(("sem", self.sem_auc, self.sem_acc))
        return out


def _mean_sem(values: t.Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if len(arr) == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))


def aggregate(per_graph: t.Sequence[GraphMetrics]) -> MetricReport:
    """Unweighted mean and standard error of the mean over graphs"""
    if not per_graph:
        raise ArgumentError("Cannot aggregate metrics over zero graphs")
    mean_auc, sem_auc = _mean_sem([m.auc for m in per_graph])
    mean_acc, sem_acc = _mean_sem([m.accuracy for m in per_graph])
    return MetricReport(
        per_graph=list(per_graph),
        mean_auc=mean_auc,
        sem_auc=sem_auc,
        mean_acc=mean_acc,
        sem_acc=sem_acc,
    )


def evaluate(
    predictions: t.Sequence[npt.ArrayLike | HasScores],
    truths: t.Sequence[npt.ArrayLike],
    threshold: float = 0.5,
) -> MetricReport:
    if len(predictions) != len(truths):
        raise ArgumentError(
            f"Got {len(predictions)} predictions for {len(truths)} ground truth graphs"
        )
    per_graph = [
        GraphMetrics(auc=roc_auc(p, a), accuracy=accuracy(p, a, threshold))
        for p, a in zip(predictions, truths)
    ]
    report = aggregate(per_graph)
    logger.info(
        "Evaluated %d graphs: AUC %.4f ± %.4f, accuracy %.4f ± %.4f",
        len(per_graph),
        report.mean_auc,
        report.sem_auc,
        report.mean_acc,
        report.sem_acc,
    )
    return report
