from pathlib import Path

import pytest

from nugget._cli.commands import ablated
from nugget._cli.experiment import ExperimentConfig
from nugget._exceptions import ArgumentError, ConfigError
from nugget.dataset import GenerationConfig
from nugget.games import BarikHonorio, GameSpec, LinearInfluence
from nugget.graphs import GraphModel
from nugget.model import ModelShape


def test_dumps_loads_round_trip():
    cfg = ExperimentConfig(
        graph="ws",
        degree=4,
        edge_prob=0.15,
        game="lig",
        alpha=0.25,
        splits=(10, 2, 3),
        lr=1e-05,
        chunk_size=7,
        normalization="unit_l2",
    )
    text = cfg.dumps()
    assert "splits = 10,2,3\n" in text
    assert "lr = 1e-05\n" in text
    assert ExperimentConfig(**ExperimentConfig.loads(text)) == cfg


def test_defaults_dump_none():
    text = ExperimentConfig().dumps()
    assert "degree = none\n" in text
    assert "chunk_size = none\n" in text
    assert ExperimentConfig.loads(text)["degree"] is None


def test_loads_skips_comments_and_blanks():
    text = "# dataset\n\nnodes = 12  # small\ngame = bh\n"
    assert ExperimentConfig.loads(text) == {"nodes": 12, "game": "bh"}


def test_unknown_key_suggests_closest():
    with pytest.raises(ConfigError) as exc_info:
        ExperimentConfig.loads("nodse = 3\n", source="run.conf")
    assert str(exc_info.value) == "run.conf:1: unknown key 'nodse' (did you mean 'nodes'?)"


def test_unknown_key_without_suggestion():
    with pytest.raises(ConfigError) as exc_info:
        ExperimentConfig.loads("\ncompletely_unrelated = 3\n")
    assert "did you mean" not in str(exc_info.value)
    assert ":2:" in str(exc_info.value)


@pytest.mark.parametrize(
    "text",
    [
        "nodes 12\n",
        "nodes = many\n",
        "graph = lattice\n",
        "splits = 1,2\n",
    ],
)
def test_malformed_lines(text: str):
    with pytest.raises(ConfigError):
        ExperimentConfig.loads(text)


def test_flags_override_file(tmp_path: Path):
    path = tmp_path / "exp.conf"
    path.write_text("nodes = 30\nlr = 0.01\nseed = 4\n")
    cfg = ExperimentConfig.resolve(path, {"nodes": 12, "lr": None})
    assert cfg.nodes == 12
    assert cfg.lr == 0.01
    assert cfg.seed == 4
    assert cfg.games == ExperimentConfig().games


def test_resolve_converts_splits():
    cfg = ExperimentConfig.resolve(flags={"splits": [4, 2, 2]})
    assert cfg.splits == (4, 2, 2)


def test_missing_config_file(tmp_path: Path):
    with pytest.raises(ConfigError):
        ExperimentConfig.resolve(tmp_path / "nope.conf")


@pytest.mark.parametrize(
    "flags",
    [
        {"nodes": 1},
        {"beta": 1.0},
        {"alpha": 2.0},
        {"heads": 0},
        {"lr": -1.0},
        {"threshold": 1.5},
        {"graph": "ws", "nodes": 4, "degree": 4},
    ],
)
def test_invalid_values(flags: dict[str, object]):
    with pytest.raises(ConfigError):
        ExperimentConfig.resolve(flags=flags)


def test_derived_configs():
    cfg = ExperimentConfig(graph="er", edge_prob=0.3, nodes=15, games=20, heads=4, seed=9)
    gen = cfg.generation()
    assert gen.graph == GraphModel("er", p=0.3, k=None, m=1)
    assert (gen.n, gen.k, gen.seed) == (15, 20, 9)
    assert cfg.model_shape().heads == 4
    assert cfg.train_config().seed == 9


def test_bh_ignores_alpha():
    spec = ExperimentConfig(game="bh", alpha=0.3, bh_noise=0.5, epsilon=0.1).game_spec()
    assert spec == GameSpec(BarikHonorio(noise_std=0.5, epsilon=0.1))


def test_with_generation_keeps_seed():
    gen = GenerationConfig(
        graph=GraphModel("ws", p=0.1, k=4),
        n=16,
        game=GameSpec(LinearInfluence(), alpha=0.4),
        k=30,
        splits=(5, 5, 5),
        seed=99,
    )
    cfg = ExperimentConfig(seed=3).with_generation(gen)
    assert cfg.generation() == GenerationConfig(**{**vars(gen), "seed": 3})
    assert cfg.seed == 3


def test_with_model_shape():
    shape = ModelShape(features=3, heads=2, aggregator="mean")
    assert ExperimentConfig().with_model_shape(shape).model_shape() == shape


@pytest.mark.parametrize(
    "axis,value,key,expected",
    [
        ("games", 25.0, "games", 25),
        ("nodes", 12.0, "nodes", 12),
        ("train_size", 40.0, "splits", (40, 50, 100)),
        ("noise", 0.1, "obs_noise", 0.1),
        ("alpha", 0.5, "alpha", 0.5),
        ("beta", -0.3, "beta", -0.3),
    ],
)
def test_ablated(axis: str, value: float, key: str, expected: object):
    cfg = ablated(ExperimentConfig(), axis, value)  # type: ignore
    assert getattr(cfg, key) == expected


@pytest.mark.parametrize("axis,value", [("games", 2.5), ("nodes", 0.0)])
def test_ablated_counts(axis: str, value: float):
    with pytest.raises(ArgumentError):
        ablated(ExperimentConfig(), axis, value)  # type: ignore


def test_ablated_validates():
    with pytest.raises(ConfigError):
        ablated(ExperimentConfig(), "alpha", 1.5)
