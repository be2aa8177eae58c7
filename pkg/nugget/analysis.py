"""
Spectral diagnostics: filter responses of the games, graph Fourier
coefficients of actions and eigenvalue statistics of graph models.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from nugget._configuration import get_config
from nugget._exceptions import ArgumentError
from nugget.games import GameSpec, filter_gain, sample_actions
from nugget.graphs import GraphModel, NormalizedGraph, normalize
from nugget.linalg import Rng, Vector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterResponse:
    eigenvalues: Vector
    response: Vector

    @property
    def poles(self) -> npt.NDArray[np.bool_]:
        return np.isinf(self.response)


def filter_response(game: GameSpec, eigenvalues: Vector) -> FilterResponse:
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if np.any(np.abs(lam) > 1 + 1e-8):
        raise ArgumentError("Eigenvalues of a normalised adjacency lie in [-1, 1]")
    return FilterResponse(eigenvalues=lam, response=filter_gain(game, lam))


def gft_coefficients(ng: NormalizedGraph, x: Vector) -> Vector:
    """|Uᵀ x̂| for the unit-norm x̂, ordered by descending eigenvalue"""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (ng.n,):
        raise ArgumentError(f"Expected an action vector of length {ng.n}, got {x.shape}")
    norm = float(np.linalg.norm(x))
    if norm == 0:
        raise ArgumentError("Cannot take the graph Fourier transform of a zero vector")
    return np.abs(ng.eig.eigenvectors.T @ (x / norm))


@dataclass(frozen=True)
class SampleStats:
    mean: float
    std: float
    sem: float
    trials: int


def _stats(values: list[float]) -> SampleStats:
    arr = np.asarray(values)
    std = float(arr.std())
    sem = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return SampleStats(mean=float(arr.mean()), std=std, sem=sem, trials=len(arr))


def min_abs_nonzero_eig_stats(
    graph_model: GraphModel, n: int, trials: int, rng: Rng
) -> SampleStats:
    """
    Smallest |λ| above the zero threshold of the normalised adjacency, over
    `trials` independent graphs. Trial i draws from `rng.child(i)`.
    """
    if trials < 1:
        raise ArgumentError(f"Need at least one trial, got {trials}")

    zero = get_config().zero_eig_tol
    values: list[float] = []
    for trial in range(trials):
        ng = normalize(graph_model.generate(n, rng.child(trial)))
        lam = np.abs(ng.eig.eigenvalues)
        values.append(float(lam[lam > zero].min()))
    return _stats(values)


@dataclass(frozen=True)
class GftProfile:
    mean: Vector
    sem: Vector
    mid_mass: SampleStats
    samples: int


def mean_gft_profile(
    spec: GameSpec, graph_model: GraphModel, n: int, trials: int, rng: Rng
) -> GftProfile:
    """Mean and SEM of the GFT coefficient at each eigenvalue index, one action per graph"""
    if trials < 1:
        raise ArgumentError(f"Need at least one trial, got {trials}")

    rows: list[Vector] = []
    for trial in range(trials):
        child = rng.child(trial)
        ng = normalize(graph_model.generate(n, child))
        x = sample_actions(spec, ng, child, 1)[:, 0]
        rows.append(gft_coefficients(ng, x))

    coeffs = np.vstack(rows)
    sem = (
        coeffs.std(axis=0, ddof=1) / math.sqrt(trials)
        if trials > 1
        else np.zeros(n)
    )
    mid = [mid_spectrum_mass(row) for row in coeffs]
    return GftProfile(
        mean=coeffs.mean(axis=0), sem=sem, mid_mass=_stats(mid), samples=trials
    )


def mid_spectrum_mass(coefficients: Vector) -> float:
    """Squared coefficient mass on the middle half of the eigenvalue indices"""
    n = len(coefficients)
    lo, hi = n // 4, n - n // 4
    return float(np.sum(coefficients[lo:hi] ** 2))
