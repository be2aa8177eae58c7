from nugget._cli.commands import (
    Ablate,
    Baseline,
    Eval,
    Generate,
    Gradcheck,
    Nugget,
    Spectrum,
    Train,
)
from nugget._cli.experiment import ExperimentConfig

__all__ = (
    "Ablate",
    "Baseline",
    "Eval",
    "ExperimentConfig",
    "Generate",
    "Gradcheck",
    "Nugget",
    "Spectrum",
    "Train",
)
