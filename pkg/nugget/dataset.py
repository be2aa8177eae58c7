"""
Synthetic datasets of (actions, adjacency) pairs and their on-disk format.

File layout (JSON lines, UTF-8):

    line 1   {"format": "nugget-dataset", "version": 1, "meta": {...}}
    line 2+  {"split": "train", "n": 20, "k": 50,
              "adjacency": "0110...",   # strict upper triangle, row-major
              "actions": [...]}         # N × K, row-major

Floats are written with Python's shortest round-trip repr, so `load(save(ds))`
reproduces every bit.
"""

from __future__ import annotations

import json
import logging
import typing as t
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import numpy.typing as npt

from nugget._exceptions import (
    ArgumentError,
    ConfigError,
    DataError,
    DatasetIOError,
    FormatVersionError,
    MalformedRecordError,
)
from nugget.games import (
    BarikHonorio,
    GameSpec,
    LinearInfluence,
    LinearQuadratic,
    sample_actions,
)
from nugget.graphs import GraphModel, normalize
from nugget.linalg import Matrix, Rng

logger = logging.getLogger(__name__)

FORMAT_NAME = "nugget-dataset"
FORMAT_VERSION = 1

SplitName: t.TypeAlias = t.Literal["train", "val", "test"]
SPLITS: tuple[SplitName, ...] = ("train", "val", "test")

NormalizationMode: t.TypeAlias = t.Literal["none", "maxabs", "unit_l2"]


@dataclass(frozen=True)
class GameSample:
    actions: Matrix
    adjacency: npt.NDArray[np.int8]

    def __post_init__(self) -> None:
        a = self.adjacency
        n = self.actions.shape[0]
        if self.actions.ndim != 2:
            raise ArgumentError(f"Actions must be an N × K matrix, got {self.actions.shape}")
        if a.shape != (n, n):
            raise ArgumentError(f"Adjacency shape {a.shape} does not match {n} players")
        if not np.all((a == 0) | (a == 1)):
            raise ArgumentError("Adjacency must be binary")
        if np.any(np.diag(a) != 0) or not np.array_equal(a, a.T):
            raise ArgumentError("Adjacency must be symmetric with a zero diagonal")
        if not np.all(np.isfinite(self.actions)):
            raise DataError("Actions contain non-finite values")

    @property
    def n(self) -> int:
        return self.actions.shape[0]

    @property
    def k(self) -> int:
        return self.actions.shape[1]


@dataclass(frozen=True)
class GenerationConfig:
    graph: GraphModel = field(default_factory=GraphModel)
    n: int = 20
    game: GameSpec = field(default_factory=GameSpec)
    k: int = 50
    splits: tuple[int, int, int] = (850, 50, 100)
    normalization: NormalizationMode = "maxabs"
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if any(s < 1 for s in self.splits):
            raise ConfigError(f"Every split needs at least one sample, got {self.splits}")
        if self.k < 1:
            raise ConfigError(f"Need at least one game per graph, got k={self.k}")
        if self.n < 2:
            raise ConfigError(f"Need at least two players, got n={self.n}")
        self.graph.check(self.n)
        if self.noise_std < 0:
            raise ConfigError(f"noise_std must be non-negative, got {self.noise_std}")

    @property
    def total(self) -> int:
        return sum(self.splits)

    def to_dict(self) -> dict[str, t.Any]:
        kind = self.game.kind
        return {
            "graph": asdict(self.graph),
            "n": self.n,
            "game": {"name": self.game.name, "alpha": self.game.alpha, **asdict(kind)},
            "k": self.k,
            "splits": list(self.splits),
            "normalization": self.normalization,
            "noise_std": self.noise_std,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, t.Any]) -> t.Self:
        game = dict(raw["game"])
        name = game.pop("name")
        alpha = game.pop("alpha")
        kinds = {"lq": LinearQuadratic, "lig": LinearInfluence, "bh": BarikHonorio}
        if name not in kinds:
            raise DataError(f"Unknown game {name!r}")
        return cls(
            graph=GraphModel(**raw["graph"]),
            n=int(raw["n"]),
            game=GameSpec(kind=kinds[name](**game), alpha=float(alpha)),
            k=int(raw["k"]),
            splits=(int(raw["splits"][0]), int(raw["splits"][1]), int(raw["splits"][2])),
            normalization=raw["normalization"],
            noise_std=float(raw["noise_std"]),
            seed=int(raw["seed"]),
        )


@dataclass
class Dataset:
    samples: list[GameSample]
    split_tags: list[SplitName]
    meta: GenerationConfig

    def __post_init__(self) -> None:
        if len(self.samples) != len(self.split_tags):
            raise ArgumentError("Every sample needs exactly one split tag")

    def split(self, name: SplitName) -> list[GameSample]:
        return [s for s, tag in zip(self.samples, self.split_tags) if tag == name]

    def __len__(self) -> int:
        return len(self.samples)


def normalize_actions(x: Matrix, mode: NormalizationMode) -> Matrix:
    """Scales every column (game) independently"""
    if mode == "none":
        return x

    if mode == "maxabs":
        scale = np.max(np.abs(x), axis=0)
    else:
        scale = np.linalg.norm(x, axis=0)

    zero = np.flatnonzero(scale == 0)
    if len(zero):
        raise DataError(f"Cannot normalise all-zero action column {int(zero[0])}")
    return x / scale


def add_observation_noise(x: Matrix, std: float, rng: Rng) -> Matrix:
    if std < 0:
        raise ArgumentError(f"Noise std must be non-negative, got {std}")
    if std == 0:
        return x
    return x + std * rng.normal(x.shape)


def generate_sample(cfg: GenerationConfig, rng: Rng) -> GameSample:
    graph = cfg.graph.generate(cfg.n, rng)
    ng = normalize(graph)
    x = sample_actions(cfg.game, ng, rng, cfg.k)
    x = normalize_actions(x, cfg.normalization)
    x = add_observation_noise(x, cfg.noise_std, rng)
    return GameSample(actions=x, adjacency=graph.adjacency())


def generate_dataset(
    cfg: GenerationConfig, rng: Rng | None = None, workers: int = 1
) -> Dataset:
    """
    Sample i is drawn from `rng.child(i)`; the first `splits[0]` samples form
    the training split, then validation, then test. The result does not
    depend on `workers`.
    """
    rng = rng or Rng(cfg.seed)
    logger.info(
        "Generating %d samples: %s on %s, n=%d, k=%d",
        cfg.total,
        cfg.game.describe(),
        cfg.graph.describe(),
        cfg.n,
        cfg.k,
    )

    def _one(index: int) -> GameSample:
        return generate_sample(cfg, rng.child(index))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(_one, range(cfg.total)))
    else:
        samples = [_one(i) for i in range(cfg.total)]

    tags: list[SplitName] = []
    for name, size in zip(SPLITS, cfg.splits):
        tags.extend([name] * size)
    return Dataset(samples=samples, split_tags=tags, meta=cfg)


def _encode_upper(adjacency: npt.NDArray[np.int8]) -> str:
    iu = np.triu_indices(adjacency.shape[0], 1)
    return "".join("1" if v else "0" for v in adjacency[iu])


def _decode_upper(bits: str, n: int) -> npt.NDArray[np.int8]:
    iu = np.triu_indices(n, 1)
    if len(bits) != len(iu[0]) or set(bits) - {"0", "1"}:
        raise ValueError(f"expected {len(iu[0])} adjacency bits")
    a = np.zeros((n, n), dtype=np.int8)
    a[iu] = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    return a + a.T


def dumps_header(meta: GenerationConfig) -> str:
    return json.dumps(
        {"format": FORMAT_NAME, "version": FORMAT_VERSION, "meta": meta.to_dict()},
        allow_nan=False,
    )


def dumps_sample(sample: GameSample, split: SplitName) -> str:
    record = {
        "split": split,
        "n": sample.n,
        "k": sample.k,
        "adjacency": _encode_upper(sample.adjacency),
        "actions": sample.actions.ravel().tolist(),
    }
    return json.dumps(record, allow_nan=False)


def save(ds: Dataset, path: Path) -> None:
    lines = [dumps_header(ds.meta)]
    lines.extend(dumps_sample(s, tag) for s, tag in zip(ds.samples, ds.split_tags))
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"Cannot write dataset to {path}") from e
    logger.info("Wrote %d samples to %s", len(ds), path)


def _parse_header(line: str) -> GenerationConfig:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as e:
        raise MalformedRecordError(f"header is not JSON ({e.msg})", line=1) from e

    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise MalformedRecordError("not a nugget dataset header", line=1)
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(
            f"Dataset format version {version!r} is not supported"
            + f" (this reader understands version {FORMAT_VERSION})"
        )
    try:
        return GenerationConfig.from_dict(header["meta"])
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedRecordError(f"invalid meta ({e})", line=1) from e


def _parse_sample(line: str, line_no: int) -> tuple[GameSample, SplitName]:
    try:
        record = json.loads(line)
        split = record["split"]
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        n, k = int(record["n"]), int(record["k"])
        actions = np.asarray(record["actions"], dtype=np.float64)
        if actions.shape != (n * k,):
            raise ValueError(f"expected {n * k} action values, got {actions.size}")
        adjacency = _decode_upper(record["adjacency"], n)
        sample = GameSample(actions=actions.reshape(n, k), adjacency=adjacency)
    except json.JSONDecodeError as e:
        raise MalformedRecordError(f"truncated or invalid JSON ({e.msg})", line=line_no) from e
    except (KeyError, TypeError, ValueError, DataError) as e:
        raise MalformedRecordError(f"invalid record ({e})", line=line_no) from e
    return sample, split


def load(path: Path) -> Dataset:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"Cannot read dataset {path}") from e

    lines = text.splitlines()
    if not lines:
        raise MalformedRecordError("empty file", line=1)

    meta = _parse_header(lines[0])
    samples: list[GameSample] = []
    tags: list[SplitName] = []
    for line_no, line in enumerate(lines[1:], start=2):
        sample, split = _parse_sample(line, line_no)
        samples.append(sample)
        tags.append(split)

    if len(samples) != meta.total:
        raise MalformedRecordError(
            f"expected {meta.total} records, found {len(samples)}",
            line=len(lines) + 1,
        )
    expected = [name for name, size in zip(SPLITS, meta.splits) for _ in range(size)]
    if tags != expected:
        raise MalformedRecordError("split tags do not match the header", line=1)
    return Dataset(samples=samples, split_tags=tags, meta=meta)
