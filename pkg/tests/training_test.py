import typing as t
from pathlib import Path

import numpy as np
import pytest

from nugget._exceptions import ConfigError
from nugget.dataset import Dataset, GenerationConfig, generate_dataset
from nugget.games import GameSpec, LinearQuadratic
from nugget.graphs import GraphModel
from nugget.linalg import Rng
from nugget.model import ModelShape, init_params
from nugget.training import (
    EpochRecord,
    TrainConfig,
    batch_gradients,
    mean_auc,
    train,
    write_log,
)

SHAPE = ModelShape(features=4, query_features=3, heads=2, phi_hidden=8, psi_hidden=8)


@pytest.fixture(scope="module")
def dataset() -> Dataset:
    cfg = GenerationConfig(
        graph=GraphModel("ba", m=1),
        n=10,
        game=GameSpec(LinearQuadratic(beta=0.6), alpha=1.0),
        k=10,
        splits=(20, 5, 5),
        seed=17,
    )
    return generate_dataset(cfg)


def test_training_reduces_loss(dataset: Dataset):
    cfg = TrainConfig(lr=0.01, batch_size=4, patience=100, max_epochs=30, seed=1)
    result = train(dataset, cfg, shape=SHAPE)

    assert len(result.log) == 31
    assert [r.epoch for r in result.log] == list(range(31))
    assert not result.stopped_early
    assert result.log[-1].train_loss <= 0.85 * result.log[0].train_loss
    assert 0 <= result.best_epoch <= 30


def test_training_is_reproducible(dataset: Dataset):
    cfg = TrainConfig(lr=0.01, batch_size=8, max_epochs=3, seed=4)
    a = train(dataset, cfg, shape=SHAPE)
    b = train(dataset, cfg, shape=SHAPE)
    assert a.log == b.log
    for x, y in zip(a.params.named_arrays().values(), b.params.named_arrays().values()):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("metric", ["auc", "loss"])
def test_patience_zero_stops_after_first_miss(dataset: Dataset, metric: t.Literal["auc", "loss"]):
    cfg = TrainConfig(lr=0.05, batch_size=20, patience=0, max_epochs=15, metric=metric)
    result = train(dataset, cfg, shape=SHAPE)

    scores = [r.val_auc if metric == "auc" else -r.val_loss for r in result.log]
    assert result.best_epoch == int(np.argmax(scores))
    if result.stopped_early:
        assert len(result.log) == result.best_epoch + 2
    else:
        assert len(result.log) == 16


def test_best_params_are_kept(dataset: Dataset):
    cfg = TrainConfig(lr=0.05, batch_size=20, patience=0, max_epochs=10)
    result = train(dataset, cfg, shape=SHAPE)
    best = result.log[result.best_epoch]
    assert mean_auc(result.params, dataset.split("val")) == pytest.approx(best.val_auc)


def test_callback_sees_every_epoch(dataset: Dataset):
    seen: list[EpochRecord] = []
    cfg = TrainConfig(max_epochs=2, batch_size=10)
    result = train(dataset, cfg, shape=SHAPE, callback=seen.append)
    assert seen == result.log


def test_chunking_does_not_change_gradients(dataset: Dataset):
    params = init_params(Rng(2), SHAPE)
    batch = dataset.split("train")[:6]
    loss, grads = batch_gradients(params, batch)
    chunked_loss, chunked = batch_gradients(params, batch, chunk_size=4)
    assert chunked_loss == pytest.approx(loss)
    for g, c in zip(grads, chunked):
        assert np.allclose(g, c, atol=1e-12)


def test_empty_validation_split(dataset: Dataset):
    only_train = Dataset(
        samples=dataset.samples,
        split_tags=["train"] * len(dataset),
        meta=dataset.meta,
    )
    with pytest.raises(ConfigError):
        train(only_train, TrainConfig(max_epochs=1), shape=SHAPE)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"lr": 0.0},
        {"batch_size": 0},
        {"patience": -1},
        {"max_epochs": 0},
        {"chunk_size": 0},
        {"metric": "f1"},
    ],
)
def test_train_config_validation(kwargs: dict[str, t.Any]):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)


def test_write_log(tmp_path: Path):
    log = [EpochRecord(0, 0.7, 0.69, 0.5), EpochRecord(1, 0.6, 0.65, 0.625)]
    path = tmp_path / "train_log.csv"
    write_log(log, path)
    assert path.read_text() == (
        "epoch,train_loss,val_loss,val_auc\n0,0.7,0.69,0.5\n1,0.6,0.65,0.625\n"
    )
