import numpy as np
import pytest

from nugget import NuggetConfig, configure
from nugget._exceptions import ArgumentError, ConvergenceError, SingularMatrixError
from nugget.linalg import (
    EigenDecomposition,
    Rng,
    is_symmetric,
    mvn_sample,
    pinv_apply,
    solve,
    spectral_radius,
    sym_eig,
)


def _symmetric(rng: Rng, n: int) -> np.ndarray:
    m = rng.normal((n, n))
    return 0.5 * (m + m.T)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 20])
def test_sym_eig_reconstructs(n: int):
    m = _symmetric(Rng(n), n)
    e = sym_eig(m)

    scale = max(float(np.linalg.norm(m)), 1.0)
    assert np.linalg.norm(e.reconstruct() - m) <= 1e-8 * scale
    assert np.linalg.norm(e.eigenvectors.T @ e.eigenvectors - np.eye(n)) <= 1e-8


def test_sym_eig_matches_numpy():
    m = _symmetric(Rng(7), 15)
    e = sym_eig(m)
    expected = np.sort(np.linalg.eigvalsh(m))[::-1]
    assert np.allclose(e.eigenvalues, expected, atol=1e-10)


def test_sym_eig_sorted_and_sign_normalised():
    e = sym_eig(_symmetric(Rng(3), 9))
    assert np.all(np.diff(e.eigenvalues) <= 0)
    for col in e.eigenvectors.T:
        assert col[np.argmax(np.abs(col))] > 0


def test_sym_eig_diagonal_is_immediate():
    e = sym_eig(np.diag([1.0, 3.0, 2.0]))
    assert e.eigenvalues.tolist() == [3.0, 2.0, 1.0]
    assert np.array_equal(np.abs(e.eigenvectors), np.eye(3)[:, [1, 2, 0]])


def test_sym_eig_zero_matrix():
    e = sym_eig(np.zeros((4, 4)))
    assert np.array_equal(e.eigenvalues, np.zeros(4))
    assert np.array_equal(e.eigenvectors, np.eye(4))


@pytest.mark.parametrize(
    "m",
    [
        np.array([[1.0, 2.0], [0.0, 1.0]]),
        np.ones((2, 3)),
    ],
)
def test_sym_eig_rejects_non_symmetric(m: np.ndarray):
    assert not is_symmetric(m)
    with pytest.raises(ArgumentError):
        sym_eig(m)


def test_sym_eig_sweep_budget():
    configure(NuggetConfig(jacobi_max_sweeps=0))
    with pytest.raises(ConvergenceError):
        sym_eig(_symmetric(Rng(0), 5))


def test_transform_resorts():
    e = EigenDecomposition.from_spectrum(np.array([1.0, -2.0, 0.5]), np.eye(3))
    squared = e.transform(lambda lam: lam**2)
    assert squared.eigenvalues.tolist() == [4.0, 1.0, 0.25]
    assert spectral_radius(e) == 2.0


def test_solve():
    m = np.array([[4.0, 1.0], [1.0, 3.0]])
    b = np.array([1.0, 2.0])
    assert np.allclose(m @ solve(m, b), b, atol=1e-12)


def test_solve_singular():
    with pytest.raises(SingularMatrixError) as exc_info:
        solve(np.ones((3, 3)), np.ones(3))
    assert exc_info.value.condition > 1e12


def test_solve_shape_mismatch():
    with pytest.raises(ArgumentError):
        solve(np.eye(3), np.ones(2))


def test_pinv_apply_agrees_with_solve():
    rng = Rng(11)
    for i in range(100):
        r = rng.child(i)
        m = _symmetric(r, 6) + 6 * np.eye(6)
        rhs = r.normal(6)
        expected = solve(m, rhs)
        got = pinv_apply(sym_eig(m), rhs)
        assert np.linalg.norm(got - expected) <= 1e-8 * np.linalg.norm(expected)


def test_pinv_apply_drops_nullspace():
    e = EigenDecomposition.from_spectrum(np.array([2.0, 0.0]), np.eye(2))
    assert pinv_apply(e, np.array([1.0, 5.0])).tolist() == [0.5, 0.0]


def test_mvn_sample_identity_covariance():
    e = EigenDecomposition.from_spectrum(np.ones(4), np.eye(4))
    x = mvn_sample(e, Rng(5), size=100_000)
    cov = np.cov(x)
    assert np.linalg.norm(cov - np.eye(4)) <= 0.05 * np.linalg.norm(np.eye(4))


def test_mvn_sample_avoids_nullspace():
    # Laplacian of a 3-node path: the constant vector spans its nullspace
    lap = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
    x = mvn_sample(sym_eig(lap), Rng(2), size=50)
    assert np.all(np.abs(np.ones(3) @ x) <= 1e-8)


def test_mvn_sample_rejects_negative_precision():
    e = EigenDecomposition.from_spectrum(np.array([1.0, -1.0]), np.eye(2))
    with pytest.raises(ArgumentError):
        mvn_sample(e, Rng(0))


def test_rng_children_are_reproducible():
    a = Rng(42).child(3).normal(5)
    b = Rng(42).child(3).normal(5)
    c = Rng(42).child(4).normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rng_choice_has_no_repeats():
    picked = Rng(0).choice(10, 10)
    assert sorted(picked.tolist()) == list(range(10))


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_rng_rejects_bad_seed(seed: int):
    with pytest.raises(ArgumentError):
        Rng(seed)
