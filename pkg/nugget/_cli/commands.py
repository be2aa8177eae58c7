import logging
import os
import sys
import typing as t
from pathlib import Path

import numpy as np
from clypi import Command, arg, boxed, cprint, get_config, style
from typing_extensions import override

from nugget import dataset as datasets
from nugget._cli.artifacts import ArtifactDir, write_config
from nugget._cli.experiment import ExperimentConfig
from nugget._exceptions import ArgumentError, NumericalError
from nugget.analysis import (
    filter_response,
    mean_gft_profile,
    min_abs_nonzero_eig_stats,
)
from nugget.autodiff import grad_check, masked_bce
from nugget.baselines import (
    DEFAULT_GRID,
    BaselineName,
    graphical_lasso,
    run_baseline,
    tune_regularization,
)
from nugget.dataset import GameSample, NormalizationMode
from nugget.games import GameName
from nugget.graphs import GraphModel, GraphModelName
from nugget.linalg import Rng
from nugget.metrics import MetricReport, evaluate
from nugget.model import (
    Aggregator,
    NuggetParams,
    forward,
    init_params,
    load_checkpoint,
    logits,
    save_checkpoint,
)
from nugget.training import StopMetric, train, write_log

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.jsonl"
METRICS_HEADER = ("graph_id", "auc", "accuracy")

AblationAxis: t.TypeAlias = t.Literal["games", "nodes", "train_size", "noise", "alpha", "beta"]

_STDERR_FORMAT = "%(levelname)s %(name)s: %(message)s"
_stderr_handler: logging.Handler | None = None


def _overrides(cmd: Command) -> dict[str, t.Any]:
    """Experiment keys this command exposes as flags, with their parsed values"""
    fields = set(type(cmd).field_names())
    return {k: getattr(cmd, k) for k in ExperimentConfig.keys() if k in fields}


def _test_probabilities(
    params: NuggetParams, samples: t.Sequence[GameSample]
) -> list[np.ndarray]:
    return [forward(params, s.actions) for s in samples]


def _print_report(title: str, report: MetricReport) -> None:
    lines = [
        f"graphs    {len(report.per_graph)}",
        f"AUC       {report.mean_auc:.4f} ± {report.sem_auc:.4f}",
        f"accuracy  {report.mean_acc:.4f} ± {report.sem_acc:.4f}",
    ]
    for line in boxed(lines, title=title, color="blue"):
        cprint(line)


def _checkpoint_path(ckpt: Path) -> Path:
    return ckpt / CHECKPOINT_NAME if ckpt.is_dir() else ckpt


class Generate(Command):
    """Simulate game equilibria on random graphs and write a dataset"""

    out: Path = arg(help="dataset file to write (JSON lines)")
    config: Path | None = arg(None, help="experiment config file, overridden by flags")
    graph: GraphModelName | None = arg(None, help="random graph model", group="graph")
    edge_prob: float | None = arg(None, help="ER edge / WS rewiring probability", group="graph")
    degree: int | None = arg(None, help="WS ring degree (default: log2 n, made even)", group="graph")
    attach: int | None = arg(None, help="BA edges per new node", group="graph")
    nodes: int | None = arg(None, short="n", help="players per graph", group="graph")
    game: GameName | None = arg(None, help="network game", group="game")
    beta: float | None = arg(None, help="LQ spectral radius of βA", group="game")
    alpha: float | None = arg(None, help="benefit smoothness", group="game")
    bh_noise: float | None = arg(None, help="BH initial action std", group="game")
    epsilon: float | None = arg(None, help="BH equilibrium slack", group="game")
    games: int | None = arg(None, short="k", help="games observed per graph", group="dataset")
    splits: tuple[int, int, int] | None = arg(None, help="train,val,test sizes", group="dataset")
    normalization: NormalizationMode | None = arg(None, help="per-game scaling", group="dataset")
    obs_noise: float | None = arg(None, help="Gaussian observation noise std", group="dataset")
    seed: int | None = arg(None, help="random seed")
    workers: int = arg(1, help="threads used to simulate samples")
    verbose: bool = arg(inherited=True)
    no_color: bool = arg(inherited=True)

    @override
    async def run(self) -> None:
        cfg = ExperimentConfig.resolve(self.config, _overrides(self))
        ds = datasets.generate_dataset(cfg.generation(), workers=self.workers)
        datasets.save(ds, self.out)
        conf = write_config(cfg, self.out.with_name(self.out.name + ".conf"))
        cprint(style("✔", fg="green"), f"Wrote {len(ds)} samples to {self.out} ({conf.name})")


class Train(Command):
    """Train a model on a dataset and write its checkpoint and training log"""

    data: Path = arg(help="dataset file")
    out: Path = arg(help="artifact directory")
    config: Path | None = arg(None, help="experiment config file, overridden by flags")
    features: int | None = arg(None, help="expanded action features F", group="model")
    query_features: int | None = arg(None, help="attention width F′", group="model")
    heads: int | None = arg(None, help="attention heads H", group="model")
    phi_hidden: int | None = arg(None, help="encoder MLP hidden units", group="model")
    psi_hidden: int | None = arg(None, help="decoder MLP hidden units", group="model")
    aggregator: Aggregator | None = arg(None, help="pooling over games", group="model")
    lr: float | None = arg(None, help="Adam learning rate", group="training")
    batch_size: int | None = arg(None, help="graphs per minibatch", group="training")
    patience: int | None = arg(None, help="epochs without improvement before stopping", group="training")
    max_epochs: int | None = arg(None, help="epoch budget", group="training")
    metric: StopMetric | None = arg(None, help="validation metric for early stopping", group="training")
    chunk_size: int | None = arg(None, help="graphs per gradient chunk", group="training")
    seed: int | None = arg(None, help="random seed")
    verbose: bool = arg(inherited=True)
    no_color: bool = arg(inherited=True)

    @override
    async def run(self) -> None:
        ds = datasets.load(self.data)
        cfg = ExperimentConfig.resolve(self.config, _overrides(self)).with_generation(ds.meta)
        with ArtifactDir(self.out) as out:
            out.write_config(cfg)
            result = train(ds, cfg.train_config(), shape=cfg.model_shape())
            save_checkpoint(result.params, out.file(CHECKPOINT_NAME))
            write_log(result.log, out.file("train_log.csv"))

        best = result.log[result.best_epoch]
        stop = "early stop" if result.stopped_early else "epoch budget reached"
        cprint(
            style("✔", fg="green"),
            f"Best epoch {result.best_epoch} (val AUC {best.val_auc:.4f}, {stop})",
        )


class Eval(Command):
    """Score a checkpoint on the test split of a dataset"""

    data: Path = arg(help="dataset file")
    ckpt: Path = arg(help="checkpoint file, or the directory `train` wrote")
    out: Path | None = arg(None, help="artifact directory (default: <ckpt>/eval)")
    config: Path | None = arg(None, help="experiment config file, overridden by flags")
    threshold: float | None = arg(None, help="edge probability cut-off for accuracy")
    verbose: bool = arg(inherited=True)
    no_color: bool = arg(inherited=True)

    @override
    async def run(self) -> None:
        ds = datasets.load(self.data)
        params = load_checkpoint(_checkpoint_path(self.ckpt))
        cfg = (
            ExperimentConfig.resolve(self.config, _overrides(self))
            .with_generation(ds.meta)
            .with_model_shape(params.shape)
        )
        test = ds.split("test")
        root = self.ckpt if self.ckpt.is_dir() else self.ckpt.parent
        with ArtifactDir(self.out or root / "eval") as out:
            out.write_config(cfg)
            report = evaluate(
                _test_probabilities(params, test),
                [s.adjacency for s in test],
                threshold=cfg.threshold,
            )
            out.write_csv("metrics.csv", METRICS_HEADER, report.rows())
        _print_report("model", report)


class Baseline(Command):
    """Score the test graphs of a dataset with a classical baseline"""

    method: BaselineName = arg(help="edge scorer")
    data: Path = arg(help="dataset file")
    out: Path | None = arg(None, help="artifact directory (default: <data>-<method>)")
    grid: list[float] | None = arg(None, help="lasso penalties tried on the validation split")
    config: Path | None = arg(None, help="experiment config file")
    workers: int = arg(1, help="threads used for the penalty sweep")
    verbose: bool = arg(inherited=True)
    no_color: bool = arg(inherited=True)

    @override
    async def run(self) -> None:
        ds = datasets.load(self.data)
        cfg = ExperimentConfig.resolve(self.config).with_generation(ds.meta)
        test = ds.split("test")
        out_dir = self.out or self.data.with_name(f"{self.data.stem}-{self.method}")

        with ArtifactDir(out_dir) as out:
            out.write_config(cfg)
            if self.method == "glasso":
                tuning = tune_regularization(
                    graphical_lasso,
                    ds.split("val"),
                    test,
                    grid=self.grid or DEFAULT_GRID,
                    workers=self.workers,
                )
                out.write_csv("tuning.csv", ("lambda", "val_auc"), sorted(tuning.val_auc.items()))
                scores = tuning.test_scores
                cprint(f"Selected lambda {tuning.best_lambda:g}")
            else:
                scores = [run_baseline(self.method, s.actions) for s in test]

            threshold = scores[0].decision_threshold
            report = evaluate(scores, [s.adjacency for s in test], threshold=threshold)
            out.write_csv("metrics.csv", METRICS_HEADER, report.rows())
        _print_report(self.method, report)


class Spectrum(Command):
    """Write filter responses, graph Fourier profiles and eigenvalue statistics"""

    out: Path = arg(help="artifact directory")
    config: Path | None = arg(None, help="experiment config file, overridden by flags")
    graph: GraphModelName | None = arg(None, help="graph model for the Fourier profile", group="graph")
    edge_prob: float | None = arg(None, help="ER edge / WS rewiring probability", group="graph")
    degree: int | None = arg(None, help="WS ring degree", group="graph")
    attach: int | None = arg(None, help="BA edges per new node", group="graph")
    nodes: int | None = arg(None, short="n", help="players per graph", group="graph")
    game: GameName | None = arg(None, help="network game", group="game")
    beta: float | None = arg(None, help="LQ spectral radius of βA", group="game")
    alpha: float | None = arg(None, help="benefit smoothness", group="game")
    bh_noise: float | None = arg(None, help="BH initial action std", group="game")
    epsilon: float | None = arg(None, help="BH equilibrium slack", group="game")
    trials: int = arg(100, help="graphs sampled per statistic")
    points: int = arg(201, help="eigenvalues on the [-1, 1] response grid")
    seed: int | None = arg(None, help="random seed")
    verbose: bool = arg(inherited=True)
    no_color: bool = arg(inherited=True)

    @override
    async def run(self) -> None:
        if self.points < 2:
            raise ArgumentError(f"The response grid needs at least two points, got {self.points}")
        cfg = ExperimentConfig.resolve(self.config, _overrides(self))
        spec = cfg.game_spec()
        rng = Rng(cfg.seed)

        with ArtifactDir(self.out) as out:
            out.write_config(cfg)

            response = filter_response(spec, np.linspace(-1.0, 1.0, self.points))
            out.write_csv(
                "filter_response.csv",
                ("eigenvalue", "response"),
                zip(response.eigenvalues.tolist(), response.response.tolist()),
            )

            profile = mean_gft_profile(spec, cfg.graph_model(), cfg.nodes, self.trials, rng.child(0))
            out.write_csv(
                "gft.csv",
                ("index", "mean", "sem"),
                zip(range(cfg.nodes), profile.mean.tolist(), profile.sem.tolist()),
            )

            rows: list[tuple[str, float, float, float, int]] = []
            for i, name in enumerate(("er", "ws", "ba")):
                model = GraphModel(name=name, p=cfg.edge_prob, k=cfg.degree, m=cfg.attach)
                stats = min_abs_nonzero_eig_stats(model, cfg.nodes, self.trials, rng.child(i + 1))
                rows.append((name, stats.mean, stats.std, stats.sem, stats.trials))
            out.write_csv("min_eig.csv", ("model", "mean", "std", "sem", "trials"), rows)

        cprint(
            style("✔", fg="green"),
            f"{spec.describe()} on {cfg.graph_model().describe()}:",
            f"mid-spectrum mass {profile.mid_mass.mean:.4f} ± {profile.mid_mass.sem:.4f}",
        )


def ablated(cfg: ExperimentConfig, axis: AblationAxis, value: float) -> ExperimentConfig:
    """The experiment with one axis set to `value`"""

    def _count() -> int:
        if value != int(value) or value < 1:
            raise ArgumentError(f"{axis} must be a positive whole number, got {value}")
        return int(value)

    match axis:
        case "games":
            changed = cfg.replace(games=_count())
        case "nodes":
            changed = cfg.replace(nodes=_count())
        case "train_size":
            changed = cfg.replace(splits=(_count(), cfg.splits[1], cfg.splits[2]))
        case "noise":
            changed = cfg.replace(obs_noise=value)
        case "alpha":
            changed = cfg.replace(alpha=value)
        case "beta":
            changed = cfg.replace(beta=value)
    changed.validate()
    return changed


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> MetricReport:
    """Generate, train and score one configuration end to end"""
    ds = datasets.generate_dataset(cfg.generation(), workers=workers)
    result = train(ds, cfg.train_config(), shape=cfg.model_shape())
    test = ds.split("test")
    return evaluate(
        _test_probabilities(result.params, test),
        [s.adjacency for s in test],
        threshold=cfg.threshold,
    )


class Ablate(Command):
    """Retrain and score the model while sweeping one experiment axis"""

    axis: AblationAxis = arg(help="experiment axis to sweep")
    values: list[float] = arg(help="values taken by the axis")
    out: Path = arg(help="artifact directory")
    config: Path | None = arg(None, help="experiment config file, overridden by flags")
    graph: GraphModelName | None = arg(None, help="random graph model", group="graph")
    edge_prob: float | None = arg(None, help="ER edge / WS rewiring probability", group="graph")
    degree: int | None = arg(None, help="WS ring degree", group="graph")
    attach: int | None = arg(None, help="BA edges per new node", group="graph")
    nodes: int | None = arg(None, short="n", help="players per graph", group="graph")
    game: GameName | None = arg(None, help="network game", group="game")
    beta: float | None = arg(None, help="LQ spectral radius of βA", group="game")
    alpha: float | None = arg(None, help="benefit smoothness", group="game")
    games: int | None = arg(None, short="k", help="games observed per graph", group="dataset")
    splits: tuple[int, int, int] | None = arg(None, help="train,val,test sizes", group="dataset")
    obs_noise: float | None = arg(None, help="Gaussian observation noise std", group="dataset")
    lr: float | None = arg(None, help="Adam learning rate", group="training")
    batch_size: int | None = arg(None, help="graphs per minibatch", group="training")
    patience: int | None = arg(None, help="epochs without improvement before stopping", group="training")
    max_epochs: int | None = arg(None, help="epoch budget", group="training")
    seed: int | None = arg(None, help="random seed")
    workers: int = arg(1, help="threads used to simulate samples")
    verbose: bool = arg(inherited=True)
    no_color: bool = arg(inherited=True)

    @override
    async def run(self) -> None:
        if not self.values:
            raise ArgumentError("Give at least one value to sweep")
        base = ExperimentConfig.resolve(self.config, _overrides(self))
        points = [ablated(base, self.axis, v) for v in self.values]

        with ArtifactDir(self.out) as out:
            out.write_config(base)
            rows: list[tuple[str, float, float, float, float, float]] = []
            for value, cfg in zip(self.values, points):
                logger.info("Ablation %s=%g", self.axis, value)
                report = run_experiment(cfg, workers=self.workers)
                rows.append(
                    (
                        self.axis,
                        value,
                        report.mean_auc,
                        report.sem_auc,
                        report.mean_acc,
                        report.sem_acc,
                    )
                )
                cprint(f"{self.axis}={value:g}: AUC {report.mean_auc:.4f} ± {report.sem_auc:.4f}")
            out.write_csv(
                "ablation.csv",
                ("axis", "value", "mean_auc", "sem_auc", "mean_acc", "sem_acc"),
                rows,
            )


class Gradcheck(Command):
    """Compare backpropagated gradients against central finite differences"""

    nodes: int = arg(5, short="n", help="players per graph")
    games: int = arg(3, short="k", help="games observed per graph")
    graphs: int = arg(2, help="graphs in the checked batch")
    coords: int = arg(200, help="parameter coordinates to perturb")
    tolerance: float = arg(1e-4, help="largest accepted relative error")
    config: Path | None = arg(None, help="experiment config file, overridden by flags")
    seed: int | None = arg(None, help="random seed")
    verbose: bool = arg(inherited=True)
    no_color: bool = arg(inherited=True)

    @override
    async def run(self) -> None:
        if self.graphs < 1:
            raise ArgumentError(f"Need at least one graph, got {self.graphs}")
        cfg = ExperimentConfig.resolve(self.config, _overrides(self))
        rng = Rng(cfg.seed)
        gen = cfg.generation()
        samples = [datasets.generate_sample(gen, rng.child(i)) for i in range(self.graphs)]
        x = np.stack([s.actions for s in samples])
        a = np.stack([s.adjacency for s in samples]).astype(np.float64)

        params = init_params(rng.child(self.graphs), cfg.model_shape())
        leaves = params.tensors(requires_grad=True)
        worst = grad_check(
            lambda: masked_bce(logits(leaves, x, aggregator=cfg.aggregator), a),
            list(leaves.values()),
            rng.child(self.graphs + 1),
            coords=self.coords,
        )

        ok = worst <= self.tolerance
        mark = style("✔", fg="green") if ok else style("✘", fg="red")
        cprint(mark, f"max relative error {worst:.3e} (tolerance {self.tolerance:.1e})")
        if not ok:
            raise NumericalError(
                f"gradient check failed: relative error {worst:.3e} exceeds {self.tolerance:.1e}"
            )


class Nugget(Command):
    """
    Learn the hidden network of a game from its players' equilibrium actions
    """

    subcommand: Generate | Train | Eval | Baseline | Spectrum | Ablate | Gradcheck
    verbose: bool = arg(False, short="v", help="log progress to stderr")
    no_color: bool = arg(False, help="disable coloured output (also set by NO_COLOR)")

    @override
    @classmethod
    def prog(cls) -> str:
        return "nugget"

    @override
    async def pre_run_hook(self) -> None:
        global _stderr_handler

        if self.no_color or os.environ.get("NO_COLOR"):
            get_config().disable_colors = True

        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(_STDERR_FORMAT))
        handler.setLevel(logging.INFO if self.verbose else logging.WARNING)
        root = logging.getLogger("nugget")
        root.setLevel(logging.DEBUG)
        root.addHandler(handler)
        _stderr_handler = handler

    @override
    async def post_run_hook(self, exception: Exception | None) -> None:
        global _stderr_handler

        if _stderr_handler:
            logging.getLogger("nugget").removeHandler(_stderr_handler)
            _stderr_handler = None
