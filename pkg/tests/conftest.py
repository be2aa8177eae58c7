import dataclasses
import typing as t

import pytest

import clypi
from nugget import _configuration
from nugget.dataset import Dataset, GenerationConfig, generate_dataset
from nugget.games import GameSpec, LinearQuadratic
from nugget.graphs import Graph, GraphModel, NormalizedGraph, normalize
from nugget.linalg import Rng


@pytest.fixture(autouse=True)
def restore_config() -> t.Iterator[None]:
    nugget_conf = dataclasses.replace(_configuration.get_config())
    clypi_conf = dataclasses.replace(clypi.get_config())
    yield
    _configuration.configure(nugget_conf)
    clypi.configure(clypi_conf)


@pytest.fixture
def rng() -> Rng:
    return Rng(1234)


@pytest.fixture
def path_graph() -> Graph:
    # 0 - 1 - 2 - 3 - 4
    return Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])


@pytest.fixture
def er_graph(rng: Rng) -> NormalizedGraph:
    return normalize(GraphModel("er", p=0.3).generate(12, rng))


@pytest.fixture
def small_generation() -> GenerationConfig:
    return GenerationConfig(
        graph=GraphModel("ba", m=1),
        n=6,
        game=GameSpec(LinearQuadratic(beta=0.6), alpha=1.0),
        k=8,
        splits=(6, 3, 3),
        seed=3,
    )


@pytest.fixture
def small_dataset(small_generation: GenerationConfig) -> Dataset:
    return generate_dataset(small_generation)

