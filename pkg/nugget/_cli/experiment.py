"""
The resolved description of a run, as one flat `key = value` file.

Keys are the long flag names with underscores. Values use the same syntax
as on the command line (`splits = 850,50,100`, `degree = none`) and are parsed
with the clypi parser for the field's type, so a file and a command line can
never disagree on how a value is read.
"""

import dataclasses
import typing as t
from dataclasses import dataclass
from pathlib import Path

from clypi import closest, parsers

from nugget._exceptions import ConfigError, NuggetException
from nugget.dataset import GenerationConfig, NormalizationMode
from nugget.games import BarikHonorio, GameName, GameSpec, LinearInfluence, LinearQuadratic
from nugget.graphs import GraphModel, GraphModelName
from nugget.model import Aggregator, ModelShape
from nugget.training import StopMetric, TrainConfig


@dataclass(frozen=True)
class ExperimentConfig:
    # Graphs
    graph: GraphModelName = "ba"
    edge_prob: float = 0.2
    degree: int | None = None
    attach: int = 1
    nodes: int = 20

    # Games
    game: GameName = "lq"
    beta: float = 0.6
    alpha: float = 1.0
    bh_noise: float = 1.0
    epsilon: float = 0.2

    # Dataset
    games: int = 50
    splits: tuple[int, int, int] = (850, 50, 100)
    normalization: NormalizationMode = "maxabs"
    obs_noise: float = 0.0

    # Model
    features: int = 10
    query_features: int = 10
    heads: int = 10
    phi_hidden: int = 100
    psi_hidden: int = 100
    aggregator: Aggregator = "sum"

    # Training and evaluation
    lr: float = 0.001
    batch_size: int = 100
    patience: int = 50
    max_epochs: int = 1000
    metric: StopMetric = "auc"
    chunk_size: int | None = None
    threshold: float = 0.5

    seed: int = 0

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def field_types(cls) -> dict[str, t.Any]:
        return t.get_type_hints(cls)

    def replace(self, **changes: t.Any) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def game_spec(self) -> GameSpec:
        match self.game:
            case "lq":
                return GameSpec(LinearQuadratic(beta=self.beta), alpha=self.alpha)
            case "lig":
                return GameSpec(LinearInfluence(), alpha=self.alpha)
            case "bh":
                return GameSpec(BarikHonorio(noise_std=self.bh_noise, epsilon=self.epsilon))

    def graph_model(self) -> GraphModel:
        return GraphModel(name=self.graph, p=self.edge_prob, k=self.degree, m=self.attach)

    def generation(self) -> GenerationConfig:
        return GenerationConfig(
            graph=self.graph_model(),
            n=self.nodes,
            game=self.game_spec(),
            k=self.games,
            splits=self.splits,
            normalization=self.normalization,
            noise_std=self.obs_noise,
            seed=self.seed,
        )

    def with_generation(self, gen: GenerationConfig) -> "ExperimentConfig":
        """Copies the dataset description recorded in a dataset header"""
        kind = gen.game.kind
        changes: dict[str, t.Any] = {
            "graph": gen.graph.name,
            "edge_prob": gen.graph.p,
            "degree": gen.graph.k,
            "attach": gen.graph.m,
            "nodes": gen.n,
            "game": gen.game.name,
            "alpha": gen.game.alpha,
            "games": gen.k,
            "splits": gen.splits,
            "normalization": gen.normalization,
            "obs_noise": gen.noise_std,
        }
        match kind:
            case LinearQuadratic(beta=beta):
                changes["beta"] = beta
            case BarikHonorio(noise_std=std, epsilon=eps):
                changes["bh_noise"] = std
                changes["epsilon"] = eps
            case LinearInfluence():
                pass
        return self.replace(**changes)

    def with_model_shape(self, shape: ModelShape) -> "ExperimentConfig":
        return self.replace(
            features=shape.features,
            query_features=shape.query_features,
            heads=shape.heads,
            phi_hidden=shape.phi_hidden,
            psi_hidden=shape.psi_hidden,
            aggregator=shape.aggregator,
        )

    def model_shape(self) -> ModelShape:
        return ModelShape(
            features=self.features,
            query_features=self.query_features,
            heads=self.heads,
            phi_hidden=self.phi_hidden,
            psi_hidden=self.psi_hidden,
            aggregator=self.aggregator,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr,
            batch_size=self.batch_size,
            patience=self.patience,
            max_epochs=self.max_epochs,
            seed=self.seed,
            metric=self.metric,
            chunk_size=self.chunk_size,
        )

    def validate(self) -> None:
        """Builds every derived config once so bad values fail before any work"""
        try:
            self.generation()
            self.model_shape()
            self.train_config()
        except NuggetException as e:
            raise ConfigError("Invalid experiment configuration") from e
        if not 0 <= self.threshold <= 1:
            raise ConfigError(f"threshold must be in [0, 1], got {self.threshold}")

    def dumps(self) -> str:
        lines = [f"{key} = {_format(getattr(self, key))}" for key in self.keys()]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, source: str = "<config>") -> dict[str, t.Any]:
        """
        Parses a config file into the values it sets. Unknown keys are
        rejected with a suggestion for the closest known key.
        """
        types = cls.field_types()
        values: dict[str, t.Any] = {}
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{line_no}: expected 'key = value', got {raw!r}")

            key, value = (part.strip() for part in line.split("=", 1))
            if key not in types:
                hint, dist = closest(key, list(types))
                suggestion = f" (did you mean {hint!r}?)" if dist <= 2 else ""
                raise ConfigError(f"{source}:{line_no}: unknown key {key!r}{suggestion}")
            values[key] = parse_value(key, value, types[key], f"{source}:{line_no}")
        return values

    @classmethod
    def from_file(cls, path: Path) -> dict[str, t.Any]:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}") from e
        return cls.loads(text, source=str(path))

    @classmethod
    def resolve(
        cls, config: Path | None = None, flags: t.Mapping[str, t.Any] | None = None
    ) -> "ExperimentConfig":
        """Built-in defaults, then the config file, then every flag that was given"""
        values = cls.from_file(config) if config else {}
        values.update({k: v for k, v in (flags or {}).items() if v is not None})
        unknown = set(values) - set(cls.keys())
        if unknown:
            raise ConfigError(f"Unknown experiment keys {sorted(unknown)}")
        if "splits" in values:
            values["splits"] = tuple(values["splits"])
        cfg = cls(**values)
        cfg.validate()
        return cfg


def parse_value(key: str, raw: str, type_: t.Any, where: str) -> t.Any:
    try:
        return parsers.from_type(type_)(raw)
    except Exception as e:
        raise ConfigError(f"{where}: cannot parse {key} = {raw!r}") from e


def _format(value: t.Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in t.cast(tuple[t.Any, ...], value))
    if isinstance(value, float):
        return repr(value)
    return str(value)
