"""
Random graph generators and the normalisation pipeline.

Generators delegate to networkx and redraw the whole graph until it is
connected, so each model is sampled conditioned on connectivity.
"""

from __future__ import annotations

import logging
import math
import typing as t
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import numpy.typing as npt

from nugget._configuration import get_config
from nugget._exceptions import ArgumentError, GenerationError
from nugget.linalg import EigenDecomposition, Matrix, Rng, sym_eig

logger = logging.getLogger(__name__)

GraphModelName: t.TypeAlias = t.Literal["er", "ws", "ba", "complete"]


@dataclass(frozen=True)
class Graph:
    weights: Matrix

    def __post_init__(self) -> None:
        w = self.weights
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ArgumentError(f"Graph weights must be square, got shape {w.shape}")
        if np.any(w < 0):
            raise ArgumentError("Graph weights must be non-negative")
        if np.any(np.diag(w) != 0):
            raise ArgumentError("Graph weights must have a zero diagonal")
        if not np.array_equal(w, w.T):
            raise ArgumentError("Graph weights must be symmetric")

    @classmethod
    def from_networkx(cls, g: nx.Graph) -> t.Self:
        w = nx.to_numpy_array(g, nodelist=sorted(g.nodes()), weight=None, dtype=np.float64)
        return cls(w)

    @classmethod
    def from_edges(cls, n: int, edges: t.Iterable[tuple[int, int]]) -> t.Self:
        w = np.zeros((n, n))
        for i, j in edges:
            w[i, j] = w[j, i] = 1.0
        return cls(w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(np.triu(self.weights, 1)))

    @property
    def degrees(self) -> npt.NDArray[np.float64]:
        return self.weights.sum(axis=1)

    @property
    def is_connected(self) -> bool:
        if self.n == 0:
            return False
        return bool(nx.is_connected(nx.from_numpy_array(self.weights)))

    def adjacency(self) -> npt.NDArray[np.int8]:
        """The binary adjacency used as ground truth"""
        return (self.weights > 0).astype(np.int8)

    def permuted(self, perm: npt.NDArray[np.intp]) -> Graph:
        """Relabels node perm[i] as node i"""
        return Graph(self.weights[np.ix_(perm, perm)])


@dataclass(frozen=True)
class NormalizedGraph:
    graph: Graph
    adjacency: Matrix
    laplacian: Matrix
    eig: EigenDecomposition = field(repr=False)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def top_eigenvector(self) -> npt.NDArray[np.float64]:
        return self.eig.eigenvectors[:, 0]


def ws_degree(n: int) -> int:
    """log2(n) rounded to the nearest even integer, at least 2"""
    return max(2, 2 * round(math.log2(n) / 2))


def _connected(
    draw: t.Callable[[int], nx.Graph], rng: Rng, what: str
) -> Graph:
    attempts = get_config().connect_max_attempts
    for attempt in range(attempts):
        g = draw(rng.seed_int())
        if nx.is_connected(g):
            if attempt:
                logger.debug("%s: connected draw after %d rejections", what, attempt)
            return Graph.from_networkx(g)
    raise GenerationError(f"{what}: no connected graph after {attempts} attempts")


def _check_er(n: int, p: float) -> None:
    if n < 2:
        raise ArgumentError(f"Erdős–Rényi graphs need at least 2 nodes, got {n}")
    if not 0 < p <= 1:
        raise ArgumentError(f"Edge probability must be in (0, 1], got {p}")


def _check_ws(n: int, k: int, p: float) -> None:
    if k >= n:
        raise ArgumentError(f"Watts–Strogatz degree k={k} must be smaller than n={n}")
    if k < 2 or k % 2:
        raise ArgumentError(f"Watts–Strogatz degree must be even and at least 2, got {k}")
    if not 0 <= p <= 1:
        raise ArgumentError(f"Rewiring probability must be in [0, 1], got {p}")


def _check_ba(n: int, m: int) -> None:
    if not 1 <= m < n:
        raise ArgumentError(f"Barabási–Albert needs 1 <= m < n, got m={m}, n={n}")


def _check_complete(n: int) -> None:
    if n < 2:
        raise ArgumentError(f"Complete graphs need at least 2 nodes, got {n}")


def gen_er(n: int, p: float, rng: Rng) -> Graph:
    _check_er(n, p)
    return _connected(
        lambda seed: nx.gnp_random_graph(n, p, seed=seed), rng, f"ER(n={n}, p={p})"
    )


def gen_ws(n: int, k: int, p: float, rng: Rng) -> Graph:
    _check_ws(n, k, p)
    return _connected(
        lambda seed: nx.watts_strogatz_graph(n, k, p, seed=seed),
        rng,
        f"WS(n={n}, k={k}, p={p})",
    )


def gen_ba(n: int, m: int, rng: Rng) -> Graph:
    _check_ba(n, m)
    return Graph.from_networkx(nx.barabasi_albert_graph(n, m, seed=rng.seed_int()))


def complete_graph(n: int) -> Graph:
    _check_complete(n)
    return Graph(np.ones((n, n)) - np.eye(n))


@dataclass(frozen=True)
class GraphModel:
    """
    A named random graph model with its parameters. `k=None` for WS means the
    default degree `ws_degree(n)`.
    """

    name: GraphModelName = "er"
    p: float = 0.2
    k: int | None = None
    m: int = 1

    def check(self, n: int) -> None:
        """Raises `ArgumentError` if this model cannot draw graphs on n nodes"""
        match self.name:
            case "er":
                _check_er(n, self.p)
            case "ws":
                _check_ws(n, self.k or ws_degree(n), self.p)
            case "ba":
                _check_ba(n, self.m)
            case "complete":
                _check_complete(n)

    def generate(self, n: int, rng: Rng) -> Graph:
        match self.name:
            case "er":
                return gen_er(n, self.p, rng)
            case "ws":
                return gen_ws(n, self.k or ws_degree(n), self.p, rng)
            case "ba":
                return gen_ba(n, self.m, rng)
            case "complete":
                return complete_graph(n)

    def describe(self) -> str:
        match self.name:
            case "er":
                return f"er(p={self.p})"
            case "ws":
                return f"ws(k={self.k or 'log2'}, p={self.p})"
            case "ba":
                return f"ba(m={self.m})"
            case "complete":
                return "complete"


def normalize(g: Graph) -> NormalizedGraph:
    """A = D^(-1/2) W D^(-1/2), L = I - A, with the eigendecomposition of A cached"""
    deg = g.degrees
    if np.any(deg <= 0):
        isolated = np.flatnonzero(deg <= 0).tolist()
        raise ArgumentError(f"Cannot normalise a graph with isolated nodes {isolated}")

    inv_sqrt = 1.0 / np.sqrt(deg)
    a = inv_sqrt[:, None] * g.weights * inv_sqrt[None, :]
    a = 0.5 * (a + a.T)
    lap = np.eye(g.n) - a
    return NormalizedGraph(graph=g, adjacency=a, laplacian=lap, eig=sym_eig(a))
