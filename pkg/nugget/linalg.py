"""
Dense real linear algebra and seeded sampling shared by every other module.

All arrays are float64 numpy arrays. Matrices are plain `ndarray`s; the
aliases below only document intent.
"""

from __future__ import annotations

import logging
import typing as t
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from nugget._configuration import get_config
from nugget._exceptions import ArgumentError, ConvergenceError, SingularMatrixError

logger = logging.getLogger(__name__)

Matrix: t.TypeAlias = npt.NDArray[np.float64]
Vector: t.TypeAlias = npt.NDArray[np.float64]


class Rng:
    """
    A seedable random stream backed by numpy's PCG64 bit generator.

    Streams are identified by `(seed, key)`; `child(i)` derives the stream for
    record `i` through `numpy.random.SeedSequence` spawn keys, so records can be
    generated in any order (or in parallel) and still come out identical.
    Both PCG64 and SeedSequence are specified bit-for-bit by numpy and do not
    depend on the platform.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()) -> None:
        if seed < 0 or seed >= 2**64:
            raise ArgumentError(f"Seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed
        self.key = key
        sequence = np.random.SeedSequence(seed, spawn_key=key)
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    def child(self, index: int) -> Rng:
        return Rng(self.seed, (*self.key, index))

    def normal(self, size: int | tuple[int, ...]) -> npt.NDArray[np.float64]:
        return self._generator.standard_normal(size)

    def uniform(
        self, low: float, high: float, size: int | tuple[int, ...]
    ) -> npt.NDArray[np.float64]:
        return self._generator.uniform(low, high, size)

    def random(self) -> float:
        return float(self._generator.random())

    def permutation(self, n: int) -> npt.NDArray[np.int64]:
        return self._generator.permutation(n)

    def choice(self, n: int, size: int) -> npt.NDArray[np.int64]:
        return self._generator.choice(n, size=size, replace=False)

    def seed_int(self) -> int:
        """An integer seed for libraries that keep their own generator (networkx)"""
        return int(self._generator.integers(0, 2**31 - 1))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, key={self.key})"


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: Vector
    eigenvectors: Matrix

    @classmethod
    def from_spectrum(cls, eigenvalues: Vector, eigenvectors: Matrix) -> t.Self:
        """
        Builds a decomposition sorted by descending eigenvalue. Ties keep their
        original order so the result is deterministic.
        """
        order = np.argsort(-eigenvalues, kind="stable")
        return cls(
            eigenvalues=np.ascontiguousarray(eigenvalues[order]),
            eigenvectors=np.ascontiguousarray(eigenvectors[:, order]),
        )

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> Matrix:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.T

    def transform(self, fn: t.Callable[[Vector], Vector]) -> EigenDecomposition:
        """The decomposition of f(M) for a spectral function f"""
        return EigenDecomposition.from_spectrum(fn(self.eigenvalues), self.eigenvectors)

    def default_tol(self) -> float:
        scale = float(np.max(np.abs(self.eigenvalues))) if self.n else 0.0
        return get_config().pinv_rel_tol * scale


def is_symmetric(m: Matrix) -> bool:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    return bool(np.all(np.abs(m - m.T) <= get_config().symmetry_tol * scale))


def _round_robin(n: int) -> list[tuple[npt.NDArray[np.intp], npt.NDArray[np.intp]]]:
    """
    Tournament ordering of all index pairs: n - 1 rounds (n even) of n / 2
    disjoint pairs. For odd n a dummy index n is added and dropped from the
    pairs it touches.
    """
    m = n + (n % 2)
    players = list(range(m))
    rounds: list[tuple[npt.NDArray[np.intp], npt.NDArray[np.intp]]] = []
    for _ in range(m - 1):
        p = np.array(players[: m // 2], dtype=np.intp)
        q = np.array(players[m // 2 :][::-1], dtype=np.intp)
        keep = (p < n) & (q < n)
        rounds.append((p[keep], q[keep]))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def _fix_signs(vectors: Matrix) -> Matrix:
    # Make the entry of largest magnitude positive in every column
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig(m: Matrix) -> EigenDecomposition:
    """
    Eigendecomposition of a real symmetric matrix with the cyclic Jacobi
    method. Each round applies n / 2 disjoint rotations at once (tournament
    ordering), which is the same sweep as the classical row-by-row cycle,
    only vectorised.

    Eigenvalues come back in descending order and each eigenvector is
    sign-normalised so its largest-magnitude entry is positive.
    """
    m = np.asarray(m, dtype=np.float64)
    if not is_symmetric(m):
        raise ArgumentError(f"sym_eig expects a symmetric square matrix, got shape {m.shape}")

    n = m.shape[0]
    a = 0.5 * (m + m.T)
    v = np.eye(n)
    norm = float(np.linalg.norm(a))
    conf = get_config()
    if n < 2 or norm == 0.0:
        return EigenDecomposition.from_spectrum(np.diag(a).copy(), v)

    rounds = _round_robin(n)
    off_mask = ~np.eye(n, dtype=bool)
    for sweep in range(conf.jacobi_max_sweeps + 1):
        off = float(np.linalg.norm(a[off_mask]))
        if off <= conf.jacobi_tol * n * norm:
            logger.debug("Jacobi converged after %d sweeps (n=%d)", sweep, n)
            break
        if sweep == conf.jacobi_max_sweeps:
            raise ConvergenceError(
                f"Jacobi did not converge in {conf.jacobi_max_sweeps} sweeps"
                + f" (off-diagonal norm {off:.3e})"
            )

        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]

            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            tan = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            tan[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(tan * tan + 1.0)
            s = tan * c

            # A <- A J, then A <- J^T A, V <- V J
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq

    return EigenDecomposition.from_spectrum(np.diag(a).copy(), _fix_signs(v))


def solve(m: Matrix, rhs: Vector | Matrix) -> Vector | Matrix:
    """
    Solves m x = rhs without forming the inverse. `rhs` may be a vector or a
    matrix of right-hand sides stacked as columns.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ArgumentError(f"solve expects a square matrix, got shape {m.shape}")
    if rhs.shape[0] != m.shape[0]:
        raise ArgumentError(f"Cannot solve {m.shape} system with rhs of shape {rhs.shape}")

    condition = float(np.linalg.cond(m))
    if not np.isfinite(condition) or condition > get_config().max_condition:
        raise SingularMatrixError(condition)
    return np.linalg.solve(m, rhs)


def pinv_apply(
    e: EigenDecomposition, rhs: Vector | Matrix, tol: float | None = None
) -> Vector | Matrix:
    """U diag(g(λ)) Uᵀ rhs where g(λ) = 1/λ above `tol` and 0 otherwise"""
    tol = e.default_tol() if tol is None else tol
    if tol < 0:
        raise ArgumentError(f"Tolerance must be non-negative, got {tol}")

    lam = e.eigenvalues
    keep = np.abs(lam) > tol
    gain = np.zeros_like(lam)
    gain[keep] = 1.0 / lam[keep]
    u = e.eigenvectors
    coeffs = u.T @ rhs
    if coeffs.ndim == 1:
        return u @ (gain * coeffs)
    return u @ (gain[:, None] * coeffs)


def mvn_sample(
    cov_eig: EigenDecomposition, rng: Rng, size: int | None = None
) -> Vector | Matrix:
    """
    Draws from N(0, P†) given the eigendecomposition of the precision matrix P.
    With `size` set, returns `size` independent draws as the columns of an
    n × size matrix.
    """
    lam = cov_eig.eigenvalues
    if np.any(lam < -get_config().zero_eig_tol):
        raise ArgumentError(
            f"Precision matrix has negative eigenvalue {float(lam.min()):.3e}"
        )

    tol = cov_eig.default_tol()
    keep = lam > tol
    scale = np.zeros_like(lam)
    scale[keep] = 1.0 / np.sqrt(lam[keep])

    u = cov_eig.eigenvectors
    if size is None:
        return u @ (scale * rng.normal(cov_eig.n))
    return u @ (scale[:, None] * rng.normal((cov_eig.n, size)))


def spectral_radius(e: EigenDecomposition) -> float:
    return float(np.max(np.abs(e.eigenvalues)))
