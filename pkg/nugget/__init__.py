from nugget._configuration import NuggetConfig, configure, get_config
from nugget._exceptions import (
    ArgumentError,
    ConfigError,
    ConvergenceError,
    DataError,
    DatasetIOError,
    FormatVersionError,
    GenerationError,
    MalformedRecordError,
    NuggetException,
    NumericalError,
    SingularMatrixError,
    UndefinedMetricError,
    format_reason,
)
from nugget.analysis import (
    FilterResponse,
    GftProfile,
    SampleStats,
    filter_response,
    gft_coefficients,
    mean_gft_profile,
    mid_spectrum_mass,
    min_abs_nonzero_eig_stats,
)
from nugget.autodiff import Tensor, grad_check
from nugget.baselines import (
    EdgeScores,
    GlassoResult,
    TuningResult,
    anticorrelation,
    correlation,
    graphical_lasso,
    graphical_lasso_fit,
    run_baseline,
    tune_regularization,
)
from nugget.dataset import (
    Dataset,
    GameSample,
    GenerationConfig,
    generate_dataset,
    generate_sample,
    load,
    save,
)
from nugget.games import (
    BarikHonorio,
    GameSpec,
    LinearInfluence,
    LinearQuadratic,
    analytic_covariance,
    generic_equilibrium,
    sample_actions,
)
from nugget.graphs import Graph, GraphModel, NormalizedGraph, normalize
from nugget.linalg import EigenDecomposition, Rng, sym_eig
from nugget.metrics import GraphMetrics, MetricReport, accuracy, evaluate, roc_auc
from nugget.model import (
    ModelShape,
    NuggetParams,
    Prediction,
    forward,
    init_params,
    load_checkpoint,
    predict,
    save_checkpoint,
)
from nugget.training import EpochRecord, TrainConfig, TrainResult, train

__all__ = (
    "ArgumentError",
    "BarikHonorio",
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "Dataset",
    "DatasetIOError",
    "EdgeScores",
    "EigenDecomposition",
    "EpochRecord",
    "FilterResponse",
    "FormatVersionError",
    "GameSample",
    "GameSpec",
    "GenerationConfig",
    "GenerationError",
    "GftProfile",
    "GlassoResult",
    "Graph",
    "GraphMetrics",
    "GraphModel",
    "LinearInfluence",
    "LinearQuadratic",
    "MalformedRecordError",
    "MetricReport",
    "ModelShape",
    "NormalizedGraph",
    "NuggetConfig",
    "NuggetException",
    "NuggetParams",
    "NumericalError",
    "Prediction",
    "Rng",
    "SampleStats",
    "SingularMatrixError",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "TuningResult",
    "UndefinedMetricError",
    "accuracy",
    "analytic_covariance",
    "anticorrelation",
    "configure",
    "correlation",
    "evaluate",
    "filter_response",
    "format_reason",
    "forward",
    "generate_dataset",
    "generate_sample",
    "generic_equilibrium",
    "get_config",
    "gft_coefficients",
    "grad_check",
    "graphical_lasso",
    "graphical_lasso_fit",
    "init_params",
    "load",
    "load_checkpoint",
    "mean_gft_profile",
    "mid_spectrum_mass",
    "min_abs_nonzero_eig_stats",
    "normalize",
    "predict",
    "roc_auc",
    "run_baseline",
    "sample_actions",
    "save",
    "save_checkpoint",
    "sym_eig",
    "train",
    "tune_regularization",
)
