import typing as t

import numpy as np
import pytest

from nugget._exceptions import ArgumentError
from nugget.games import (
    BarikHonorio,
    GameSpec,
    LinearInfluence,
    LinearQuadratic,
    analytic_covariance,
    bh_residual,
    dirichlet_energy,
    equilibrium_bh,
    equilibrium_lig,
    equilibrium_lq,
    filter_gain,
    generic_equilibrium,
    lig_residual,
    lq_residual,
    sample_actions,
    sample_benefits,
)
from nugget.graphs import GraphModel, NormalizedGraph, normalize
from nugget.linalg import Rng


def _graphs(model: GraphModel, count: int, n: int = 20) -> list[NormalizedGraph]:
    rng = Rng(77)
    return [normalize(model.generate(n, rng.child(i))) for i in range(count)]


@pytest.mark.parametrize("model", [GraphModel("er", p=0.2), GraphModel("ba", m=1)])
@pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
def test_lq_best_response(model: GraphModel, alpha: float):
    rng = Rng(1)
    for i, ng in enumerate(_graphs(model, 10)):
        b = sample_benefits(ng, alpha, rng.child(i))
        x = equilibrium_lq(ng, 0.6, b)
        assert lq_residual(ng, 0.6, b, x) <= 1e-8 * np.max(np.abs(b))


@pytest.mark.parametrize(
    "model", [GraphModel("er", p=0.2), GraphModel("ws", p=0.2), GraphModel("ba", m=1)]
)
def test_lig_best_response(model: GraphModel):
    rng = Rng(2)
    for i, ng in enumerate(_graphs(model, 10)):
        b = sample_benefits(ng, 0.5, rng.child(i))
        x = equilibrium_lig(ng, b)
        assert lig_residual(ng, b, x) <= 1e-8 * np.max(np.abs(b))


def test_lig_on_trees_stays_out_of_the_nullspace():
    rng = Rng(12)
    singular = 0
    for i, ng in enumerate(_graphs(GraphModel("ba", m=1), 10)):
        null = np.abs(ng.eig.eigenvalues) <= ng.eig.default_tol()
        singular += bool(np.any(null))
        b = sample_benefits(ng, 0.0, rng.child(i))
        x = equilibrium_lig(ng, b)
        assert np.all(np.isfinite(x))
        assert np.max(np.abs(ng.eig.eigenvectors[:, null].T @ x), initial=0.0) <= 1e-8
    assert singular > 0


@pytest.mark.parametrize(
    "spec",
    [
        GameSpec(LinearQuadratic(beta=0.6), alpha=0.5),
        GameSpec(LinearQuadratic(beta=-0.6), alpha=0.0),
        GameSpec(LinearInfluence(), alpha=0.5),
    ],
)
def test_equilibria_follow_relabelling(spec: GameSpec):
    rng = Rng(13)
    for i, ng in enumerate(_graphs(GraphModel("ba", m=2), 5, n=12)):
        perm = rng.child(i).permutation(ng.n)
        relabelled = normalize(ng.graph.permuted(perm))
        b = sample_benefits(ng, spec.alpha, rng.child(100 + i))
        match spec.kind:
            case LinearQuadratic(beta=beta):
                x = equilibrium_lq(ng, beta, b)
                y = equilibrium_lq(relabelled, beta, b[perm])
            case _:
                x = equilibrium_lig(ng, b)
                y = equilibrium_lig(relabelled, b[perm])
        assert np.max(np.abs(y - x[perm])) <= 1e-9 * np.max(np.abs(x))


def test_bh_epsilon_equilibrium():
    spec = GameSpec(BarikHonorio(noise_std=1.0, epsilon=0.2))
    rng = Rng(3)
    for i, ng in enumerate(_graphs(GraphModel("er", p=0.2), 20)):
        x = equilibrium_bh(ng, spec, rng.child(i))
        assert bh_residual(ng, x) <= 0.2


def test_bh_noise_shrinks_onto_the_slack():
    spec = GameSpec(BarikHonorio(noise_std=5.0, epsilon=1e-3))
    rng = Rng(14)
    for i, ng in enumerate(_graphs(GraphModel("ws", p=0.2), 20)):
        x = equilibrium_bh(ng, spec, rng.child(i))
        residual = bh_residual(ng, x)
        assert residual <= 1e-3
        assert residual >= 0.5e-3


def test_bh_without_noise_is_exact():
    spec = GameSpec(BarikHonorio(noise_std=0.0))
    ng = _graphs(GraphModel("er", p=0.3), 1)[0]
    x = equilibrium_bh(ng, spec, Rng(0))
    assert np.array_equal(x, ng.top_eigenvector)
    assert bh_residual(ng, x) <= 1e-8


def test_bh_needs_bh_spec(er_graph: NormalizedGraph):
    with pytest.raises(ArgumentError):
        equilibrium_bh(er_graph, GameSpec(LinearInfluence()), Rng(0))


def test_benefits_avoid_nullspace_at_alpha_one(er_graph: NormalizedGraph):
    b = sample_benefits(er_graph, 1.0, Rng(4), size=20)
    assert np.all(np.abs(er_graph.top_eigenvector @ b) <= 1e-8)


@pytest.mark.parametrize(
    "spec",
    [
        GameSpec(LinearQuadratic(beta=0.6), alpha=0.5),
        GameSpec(LinearQuadratic(beta=-0.4), alpha=0.0),
        GameSpec(LinearInfluence(), alpha=0.5),
    ],
)
def test_analytic_covariance_matches_samples(spec: GameSpec):
    ng = _graphs(GraphModel("er", p=0.3), 1, n=10)[0]
    x = sample_actions(spec, ng, Rng(5), 100_000)
    empirical = np.cov(x)
    analytic = analytic_covariance(spec, ng)
    assert np.linalg.norm(empirical - analytic) <= 0.05 * np.linalg.norm(analytic)


def test_bh_has_no_covariance(er_graph: NormalizedGraph):
    with pytest.raises(ArgumentError):
        analytic_covariance(GameSpec(BarikHonorio()), er_graph)


@pytest.mark.parametrize(
    "spec",
    [
        GameSpec(LinearQuadratic(beta=0.6), alpha=1.0),
        GameSpec(LinearInfluence(), alpha=0.3),
        GameSpec(BarikHonorio()),
    ],
)
def test_sample_actions_shape(spec: GameSpec, er_graph: NormalizedGraph):
    x = sample_actions(spec, er_graph, Rng(6), 7)
    assert x.shape == (er_graph.n, 7)
    assert np.all(np.isfinite(x))
    assert generic_equilibrium(spec, er_graph, Rng(6)).shape == (er_graph.n,)


def test_sample_actions_needs_games(er_graph: NormalizedGraph):
    with pytest.raises(ArgumentError):
        sample_actions(GameSpec(), er_graph, Rng(0), 0)


def test_filter_gain_poles():
    lam = np.array([1.0, 0.5, 0.0, -0.5])
    lq = filter_gain(GameSpec(LinearQuadratic(beta=0.5), alpha=1.0), lam)
    assert np.isinf(lq[0])
    assert lq[1] == pytest.approx(1.0 / (0.75**2 * 0.5))

    lig = filter_gain(GameSpec(LinearInfluence(), alpha=0.0), lam)
    assert np.isinf(lig[2])
    assert lig[1] == pytest.approx(4.0)

    bh = filter_gain(GameSpec(BarikHonorio()), lam)
    assert bh.tolist() == [1.0, 0.0, 0.0, 0.0]


def test_smoothness_grows_with_alpha():
    ng = _graphs(GraphModel("ba", m=1), 1)[0]

    def mean_energy(alpha: float) -> float:
        spec = GameSpec(LinearQuadratic(beta=0.6), alpha=alpha)
        x = sample_actions(spec, ng, Rng(8), 500)
        return float(np.mean([dirichlet_energy(ng, col) for col in x.T]))

    assert mean_energy(0.9) < mean_energy(0.0)


def test_dirichlet_energy_of_top_eigenvector(er_graph: NormalizedGraph):
    assert dirichlet_energy(er_graph, er_graph.top_eigenvector) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(ArgumentError):
        dirichlet_energy(er_graph, np.zeros(er_graph.n))


@pytest.mark.parametrize(
    "build",
    [
        lambda: LinearQuadratic(beta=1.0),
        lambda: LinearQuadratic(beta=-1.2),
        lambda: BarikHonorio(epsilon=0.0),
        lambda: BarikHonorio(noise_std=-1.0),
        lambda: GameSpec(alpha=1.5),
        lambda: GameSpec(alpha=-0.1),
    ],
)
def test_invalid_parameters(build: t.Callable[[], object]):
    with pytest.raises(ArgumentError):
        build()


@pytest.mark.parametrize(
    "spec,name,describe",
    [
        (GameSpec(LinearQuadratic(beta=0.6), alpha=1.0), "lq", "lq(beta=0.6, alpha=1.0)"),
        (GameSpec(LinearInfluence(), alpha=0.5), "lig", "lig(alpha=0.5)"),
        (GameSpec(BarikHonorio()), "bh", "bh(noise_std=1.0, epsilon=0.2)"),
    ],
)
def test_spec_names(spec: GameSpec, name: str, describe: str):
    assert spec.name == name
    assert spec.describe() == describe
    assert spec.uses_benefits == (name != "bh")
