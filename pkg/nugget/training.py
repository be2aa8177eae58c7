from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from nugget._exceptions import ConfigError, NumericalError
from nugget._util import write_csv
from nugget.autodiff import AdamState, adam_step, masked_bce
from nugget.dataset import Dataset, GameSample
from nugget.linalg import Rng
from nugget.metrics import roc_auc
from nugget.model import (
    ModelShape,
    NuggetParams,
    forward,
    init_params,
    logits,
)

logger = logging.getLogger(__name__)

StopMetric: t.TypeAlias = t.Literal["auc", "loss"]

LOG_HEADER = ("epoch", "train_loss", "val_loss", "val_auc")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 100
    patience: int = 50
    max_epochs: int = 1000
    seed: int = 0
    metric: StopMetric = "auc"
    chunk_size: int | None = None

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.patience < 0:
            raise ConfigError(f"patience must be non-negative, got {self.patience}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be positive, got {self.max_epochs}")
        if self.chunk_size is not None and self.chunk_size < 1:
            raise ConfigError(f"chunk_size must be positive, got {self.chunk_size}")
        if self.metric not in ("auc", "loss"):
            raise ConfigError(f"Unknown early-stopping metric {self.metric!r}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_auc: float


@dataclass
class TrainResult:
    params: NuggetParams
    log: list[EpochRecord] = field(default_factory=list[EpochRecord])
    best_epoch: int = 0
    stopped_early: bool = False


EpochCallback: t.TypeAlias = t.Callable[[EpochRecord], None]


def _groups(samples: t.Sequence[GameSample], chunk: int | None) -> list[list[GameSample]]:
    """Splits samples into stackable chunks of equal (N, K), keeping their order"""
    by_shape: dict[tuple[int, int], list[GameSample]] = {}
    for s in samples:
        by_shape.setdefault((s.n, s.k), []).append(s)

    out: list[list[GameSample]] = []
    for group in by_shape.values():
        size = chunk or len(group)
        out.extend(group[i : i + size] for i in range(0, len(group), size))
    return out


def _stack(chunk: t.Sequence[GameSample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([s.actions for s in chunk])
    a = np.stack([s.adjacency for s in chunk]).astype(np.float64)
    return x, a


def batch_gradients(
    params: NuggetParams, batch: t.Sequence[GameSample], chunk_size: int | None = None
) -> tuple[float, list[np.ndarray]]:
    """
    Mean per-graph loss over `batch` and its gradient for every parameter
    array, accumulated chunk by chunk.
    """
    leaves = params.tensors(requires_grad=True)
    total = 0.0
    for chunk in _groups(batch, chunk_size):
        x, a = _stack(chunk)
        loss = masked_bce(logits(leaves, x, aggregator=params.shape.aggregator), a)
        weighted = loss * (len(chunk) / len(batch))
        weighted.backward()
        total += weighted.item()

    if not math.isfinite(total):
        raise NumericalError(f"Training loss became non-finite ({total})")
    grads = [t.cast(np.ndarray, leaf.grad) for leaf in leaves.values()]
    return total, grads


def mean_loss(params: NuggetParams, samples: t.Sequence[GameSample]) -> float:
    total = 0.0
    for chunk in _groups(samples, None):
        x, a = _stack(chunk)
        loss = masked_bce(logits(params, x), a)
        total += loss.item() * len(chunk)
    return total / len(samples)


def mean_auc(params: NuggetParams, samples: t.Sequence[GameSample]) -> float:
    aucs: list[float] = []
    for chunk in _groups(samples, None):
        x, _ = _stack(chunk)
        probs = forward(params, x)
        aucs.extend(roc_auc(p, s.adjacency) for p, s in zip(probs, chunk))
    return float(np.mean(aucs))


def _score(record: EpochRecord, metric: StopMetric) -> float:
    return record.val_auc if metric == "auc" else -record.val_loss


def train(
    ds: Dataset,
    cfg: TrainConfig,
    rng: Rng | None = None,
    shape: ModelShape | None = None,
    params: NuggetParams | None = None,
    callback: EpochCallback | None = None,
) -> TrainResult:
    """
    Adam on shuffled minibatches, evaluating on the validation split after
    every epoch and keeping the best parameters. Epoch 0 is the untrained
    model. Training stops once more than `patience` consecutive epochs fail
    to improve on the best one, or after `max_epochs`.
    """
    train_set = ds.split("train")
    val_set = ds.split("val")
    if not train_set:
        raise ConfigError("The dataset has an empty training split")
    if not val_set:
        raise ConfigError("The dataset has an empty validation split")

    rng = rng or Rng(cfg.seed)
    current = params or init_params(rng.child(0), shape)
    shuffler = rng.child(1)
    names = list(current.named_arrays())
    state = AdamState.for_params(list(current.named_arrays().values()), lr=cfg.lr)

    def _record(epoch: int, train_loss: float) -> EpochRecord:
        rec = EpochRecord(
            epoch=epoch,
            train_loss=train_loss,
            val_loss=mean_loss(current, val_set),
            val_auc=mean_auc(current, val_set),
        )
        logger.info(
            "epoch %d: train_loss=%.6f val_loss=%.6f val_auc=%.6f",
            rec.epoch,
            rec.train_loss,
            rec.val_loss,
            rec.val_auc,
        )
        if callback:
            callback(rec)
        return rec

    first = _record(0, mean_loss(current, train_set))
    result = TrainResult(params=current, log=[first])
    best = _score(first, cfg.metric)
    wait = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffler.permutation(len(train_set))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_set[i] for i in order[start : start + cfg.batch_size]]
            loss, grads = batch_gradients(current, batch, cfg.chunk_size)
            epoch_loss += loss * len(batch)
            arrays = adam_step(state, list(current.named_arrays().values()), grads)
            current = NuggetParams.from_named(dict(zip(names, arrays)), current.shape)

        rec = _record(epoch, epoch_loss / len(train_set))
        result.log.append(rec)
        score = _score(rec, cfg.metric)
        if score > best:
            best, wait = score, 0
            result.params = current
            result.best_epoch = epoch
        else:
            wait += 1
            if wait > cfg.patience:
                result.stopped_early = True
                logger.info("No improvement for %d epochs, stopping at epoch %d", wait, epoch)
                break

    return result


def write_log(log: t.Sequence[EpochRecord], path: Path) -> None:
    rows = [(r.epoch, r.train_loss, r.val_loss, r.val_auc) for r in log]
    write_csv(path, LOG_HEADER, rows)
