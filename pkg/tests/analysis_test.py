import numpy as np
import pytest

from nugget._exceptions import ArgumentError
from nugget.analysis import (
    filter_response,
    gft_coefficients,
    mean_gft_profile,
    mid_spectrum_mass,
    min_abs_nonzero_eig_stats,
)
from nugget.games import GameSpec, LinearInfluence, LinearQuadratic
from nugget.graphs import GraphModel, NormalizedGraph
from nugget.linalg import Rng


def test_complete_graph_min_eigenvalue():
    stats = min_abs_nonzero_eig_stats(GraphModel("complete"), 8, 5, Rng(0))
    assert stats.mean == pytest.approx(1 / 7)
    assert stats.std == pytest.approx(0.0, abs=1e-12)
    assert stats.trials == 5


def test_min_eigenvalue_is_reproducible():
    model = GraphModel("er", p=0.3)
    a = min_abs_nonzero_eig_stats(model, 15, 10, Rng(4))
    b = min_abs_nonzero_eig_stats(model, 15, 10, Rng(4))
    assert a == b
    assert 0 < a.mean <= 1


def test_gft_is_unit_norm(er_graph: NormalizedGraph, rng: Rng):
    coeffs = gft_coefficients(er_graph, rng.normal(er_graph.n))
    assert float(np.sum(coeffs**2)) == pytest.approx(1.0)
    assert np.all(coeffs >= 0)


def test_gft_of_top_eigenvector(er_graph: NormalizedGraph):
    coeffs = gft_coefficients(er_graph, 3.0 * er_graph.top_eigenvector)
    assert coeffs[0] == pytest.approx(1.0)
    assert np.allclose(coeffs[1:], 0.0, atol=1e-10)


@pytest.mark.parametrize("x", [np.zeros(12), np.ones(5)])
def test_gft_rejects_bad_vectors(er_graph: NormalizedGraph, x: np.ndarray):
    with pytest.raises(ArgumentError):
        gft_coefficients(er_graph, x)


def test_filter_response_poles():
    lam = np.linspace(-1, 1, 5)
    resp = filter_response(GameSpec(LinearInfluence(), alpha=1.0), lam)
    assert resp.poles.tolist() == [False, False, True, False, True]
    assert resp.response[0] == pytest.approx(0.5)


def test_filter_response_range():
    with pytest.raises(ArgumentError):
        filter_response(GameSpec(), np.array([1.5]))


def test_mid_spectrum_mass():
    assert mid_spectrum_mass(np.ones(8)) == 4.0
    assert mid_spectrum_mass(np.array([1.0, 0.0, 0.0, 0.0])) == 0.0


def test_mean_gft_profile():
    spec = GameSpec(LinearQuadratic(beta=0.6), alpha=1.0)
    profile = mean_gft_profile(spec, GraphModel("ba", m=1), 12, 30, Rng(5))
    assert profile.mean.shape == (12,)
    assert profile.sem.shape == (12,)
    assert profile.samples == 30
    assert np.all(profile.sem >= 0)
    # alpha = 1 removes all weight from the top eigenvector
    assert profile.mean[0] == pytest.approx(0.0, abs=1e-8)
    assert 0 <= profile.mid_mass.mean <= 1


def test_profile_needs_trials():
    with pytest.raises(ArgumentError):
        mean_gft_profile(GameSpec(), GraphModel("ba"), 6, 0, Rng(0))


def test_ba_spectrum_stays_away_from_zero():
    rng = Rng(21)
    ba = min_abs_nonzero_eig_stats(GraphModel("ba", m=1), 20, 1000, rng.child(0))
    for model in [GraphModel("er", p=0.2), GraphModel("ws", k=4, p=0.2)]:
        other = min_abs_nonzero_eig_stats(model, 20, 1000, rng.child(1))
        assert ba.mean - ba.sem > other.mean + other.sem


def test_lig_actions_fill_the_middle_of_er_spectra():
    spec = GameSpec(LinearInfluence(), alpha=0.0)
    rng = Rng(22)
    er = mean_gft_profile(spec, GraphModel("er", p=0.2), 20, 1000, rng.child(0)).mid_mass
    ba = mean_gft_profile(spec, GraphModel("ba", m=1), 20, 1000, rng.child(1)).mid_mass
    assert er.mean - er.sem > ba.mean + ba.sem
