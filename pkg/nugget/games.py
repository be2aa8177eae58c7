"""
Benefit sampling and equilibrium actions for the three network games.

Every game fits the generic form x* = F(A) H(b):

    linear quadratic   F(A) = (I - βA)^-1   H(b) = b
    linear influence   F(A) = A^†           H(b) = b
    Barik–Honorio      F(A) = u1            H(b) = 1

with b ~ N(0, L_α^†) and L_α = (1 - α) I + α L = I - α A.
"""

from __future__ import annotations

import logging
import typing as t
from dataclasses import dataclass, field

import numpy as np

from nugget._exceptions import ArgumentError
from nugget.graphs import NormalizedGraph
from nugget.linalg import Matrix, Rng, Vector, mvn_sample, pinv_apply, solve

logger = logging.getLogger(__name__)

GameName: t.TypeAlias = t.Literal["lq", "lig", "bh"]


@dataclass(frozen=True)
class LinearQuadratic:
    beta: float = 0.0

    def __post_init__(self) -> None:
        if not abs(self.beta) < 1:
            raise ArgumentError(f"Linear quadratic games need |beta| < 1, got {self.beta}")


@dataclass(frozen=True)
class LinearInfluence:
    pass


@dataclass(frozen=True)
class BarikHonorio:
    noise_std: float = 1.0
    epsilon: float = 0.2

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ArgumentError(f"epsilon must be positive, got {self.epsilon}")
        if self.noise_std < 0:
            raise ArgumentError(f"noise_std must be non-negative, got {self.noise_std}")


GameKind: t.TypeAlias = LinearQuadratic | LinearInfluence | BarikHonorio


@dataclass(frozen=True)
class GameSpec:
    kind: GameKind = field(default_factory=LinearQuadratic)
    alpha: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.alpha <= 1:
            raise ArgumentError(f"alpha must be in [0, 1], got {self.alpha}")

    @property
    def name(self) -> GameName:
        match self.kind:
            case LinearQuadratic():
                return "lq"
            case LinearInfluence():
                return "lig"
            case BarikHonorio():
                return "bh"

    @property
    def uses_benefits(self) -> bool:
        return not isinstance(self.kind, BarikHonorio)

    def describe(self) -> str:
        match self.kind:
            case LinearQuadratic(beta=beta):
                return f"lq(beta={beta}, alpha={self.alpha})"
            case LinearInfluence():
                return f"lig(alpha={self.alpha})"
            case BarikHonorio(noise_std=std, epsilon=eps):
                return f"bh(noise_std={std}, epsilon={eps})"


def sample_benefits(
    ng: NormalizedGraph, alpha: float, rng: Rng, size: int | None = None
) -> Vector | Matrix:
    """
    b ~ N(0, L_α^†). The eigenvalues of L_α are 1 - αλ_i(A), so the cached
    eigendecomposition of A is reused.
    """
    if not 0 <= alpha <= 1:
        raise ArgumentError(f"alpha must be in [0, 1], got {alpha}")
    precision = ng.eig.transform(lambda lam: 1.0 - alpha * lam)
    return mvn_sample(precision, rng, size)


def equilibrium_lq(ng: NormalizedGraph, beta: float, b: Vector | Matrix) -> Vector | Matrix:
    if not abs(beta) < 1:
        raise ArgumentError(f"Linear quadratic games need |beta| < 1, got {beta}")
    return solve(np.eye(ng.n) - beta * ng.adjacency, b)


def equilibrium_lig(ng: NormalizedGraph, b: Vector | Matrix) -> Vector | Matrix:
    return pinv_apply(ng.eig, b)


def equilibrium_bh(ng: NormalizedGraph, spec: GameSpec, rng: Rng) -> Vector:
    """
    u1 plus Gaussian noise, with the noise shrunk just enough that
    max_i |x_i - (Ax)_i| <= epsilon.
    """
    if not isinstance(spec.kind, BarikHonorio):
        raise ArgumentError(f"equilibrium_bh needs a Barik–Honorio spec, got {spec.describe()}")

    lam = ng.eig.eigenvalues
    if ng.n > 1 and lam[1] >= lam[0] - 1e-8:
        logger.warning(
            "Top eigenvalue of A has multiplicity > 1; using the first eigenvector"
        )

    eps = spec.kind.epsilon
    u1 = ng.top_eigenvector
    noise = spec.kind.noise_std * rng.normal(ng.n)
    if bh_residual(ng, u1 + noise) <= eps:
        return u1 + noise

    # Au1 = u1 only up to rounding, so budget for u1's own residual and
    # keep a relative margin for the rounding of the sum
    base = bh_residual(ng, u1)
    spread = bh_residual(ng, noise)
    scale = max(eps - base, 0.0) / spread * (1.0 - 1e-9)
    x = u1 + scale * noise
    while bh_residual(ng, x) > eps and scale > 0:
        scale *= 0.5
        x = u1 + scale * noise
    return x if scale > 0 else u1


def generic_equilibrium(spec: GameSpec, ng: NormalizedGraph, rng: Rng) -> Vector:
    match spec.kind:
        case LinearQuadratic(beta=beta):
            return equilibrium_lq(ng, beta, sample_benefits(ng, spec.alpha, rng))
        case LinearInfluence():
            return equilibrium_lig(ng, sample_benefits(ng, spec.alpha, rng))
        case BarikHonorio():
            return equilibrium_bh(ng, spec, rng)


def sample_actions(spec: GameSpec, ng: NormalizedGraph, rng: Rng, k: int) -> Matrix:
    """K independent equilibria of the same game on one graph, as an N × K matrix"""
    if k < 1:
        raise ArgumentError(f"Need at least one game, got k={k}")

    match spec.kind:
        case LinearQuadratic(beta=beta):
            return equilibrium_lq(ng, beta, sample_benefits(ng, spec.alpha, rng, size=k))
        case LinearInfluence():
            return equilibrium_lig(ng, sample_benefits(ng, spec.alpha, rng, size=k))
        case BarikHonorio():
            return np.column_stack([equilibrium_bh(ng, spec, rng) for _ in range(k)])


def filter_gain(spec: GameSpec, lam: Vector) -> Vector:
    """
    Spectral gain of the action covariance at each eigenvalue of A. Poles come
    back as +inf.
    """
    alpha = spec.alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        match spec.kind:
            case LinearQuadratic(beta=beta):
                gain = 1.0 / ((1.0 - beta * lam) ** 2 * (1.0 - alpha * lam))
            case LinearInfluence():
                gain = 1.0 / (lam**2 * (1.0 - alpha * lam))
            case BarikHonorio():
                gain = (np.arange(len(lam)) == np.argmax(lam)).astype(np.float64)
    return np.where(np.isfinite(gain), gain, np.inf)


def analytic_covariance(spec: GameSpec, ng: NormalizedGraph) -> Matrix:
    """
    Covariance of the equilibrium actions: U diag(g(λ)) Uᵀ where g is the
    game's filter gain with pseudoinverse semantics (directions where L_α or A
    vanish carry no variance).
    """
    if not spec.uses_benefits:
        raise ArgumentError("Barik–Honorio actions have no closed-form covariance")

    eig = ng.eig
    lam = eig.eigenvalues
    tol = eig.default_tol()
    precision = 1.0 - spec.alpha * lam
    live = precision > tol
    if isinstance(spec.kind, LinearInfluence):
        live &= np.abs(lam) > tol

    gain = np.zeros_like(lam)
    gain[live] = filter_gain(spec, lam[live])
    u = eig.eigenvectors
    return (u * gain) @ u.T


def lq_residual(ng: NormalizedGraph, beta: float, b: Vector, x: Vector) -> float:
    """max_i |x_i - b_i - β(Ax)_i|"""
    return float(np.max(np.abs(x - b - beta * (ng.adjacency @ x))))


def lig_residual(ng: NormalizedGraph, b: Vector, x: Vector) -> float:
    """max_i |(Ax)_i - (Π b)_i| with Π the projection on the range of A"""
    u = ng.eig.eigenvectors
    live = np.abs(ng.eig.eigenvalues) > ng.eig.default_tol()
    projected = u[:, live] @ (u[:, live].T @ b)
    return float(np.max(np.abs(ng.adjacency @ x - projected)))


def bh_residual(ng: NormalizedGraph, x: Vector) -> float:
    """max_i |x_i - (Ax)_i|"""
    return float(np.max(np.abs(x - ng.adjacency @ x)))


def dirichlet_energy(ng: NormalizedGraph, x: Vector) -> float:
    """xᵀLx / ‖x‖², small for actions that are smooth on the graph"""
    norm2 = float(x @ x)
    if norm2 == 0:
        raise ArgumentError("Dirichlet energy of the zero vector is undefined")
    return float(x @ ng.laplacian @ x) / norm2
