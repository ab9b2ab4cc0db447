import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import complete_graph, cycle_graph, path_graph, random_connected, star_graph
from err_rewiring.curvature import (
    NeighborMeasure,
    curvature_after_addition,
    curvature_all_edges,
    neighbor_measure,
    ollivier_ricci_edge,
    wasserstein1,
)
from err_rewiring.graph import GraphError, all_pairs_distances, from_edge_list, symmetrize
from oracles import transport_by_bases

pytestmark = pytest.mark.usefixtures("backend")


class TestMeasures:
    def test_c4(self):
        assert neighbor_measure(cycle_graph(4), 0).as_dict() == {1: 0.5, 3: 0.5}

    def test_p3_endpoint(self):
        assert neighbor_measure(path_graph(3), 0).as_dict() == {1: 1.0}

    def test_k4(self):
        m = neighbor_measure(complete_graph(4), 0)
        assert m.support == (1, 2, 3)
        np.testing.assert_allclose(m.mass, 1 / 3)

    def test_directed_uses_union(self):
        assert neighbor_measure(path_graph(3, True), 1).support == (0, 2)

    def test_isolated(self):
        with pytest.raises(GraphError):
            neighbor_measure(from_edge_list([(0, 1)], 3, False), 2)

    def test_validation(self):
        with pytest.raises(ValueError):
            NeighborMeasure((0, 1), np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            NeighborMeasure((0, 0), np.array([0.5, 0.5]))


class TestWasserstein:
    def test_identical(self):
        g = cycle_graph(5)
        m = neighbor_measure(g, 0)
        assert wasserstein1(g, m, m) == 0.0

    def test_point_masses(self):
        g = path_graph(5)
        assert wasserstein1(g, NeighborMeasure.point(0), NeighborMeasure.point(3)) == 3.0

    def test_k3_edge(self):
        g = complete_graph(3)
        assert wasserstein1(g, neighbor_measure(g, 0), neighbor_measure(g, 1)) == pytest.approx(0.5, abs=1e-12)

    def test_unreachable_support(self):
        g = from_edge_list([(0, 1), (2, 3)], 4, False)
        with pytest.raises(GraphError):
            wasserstein1(g, NeighborMeasure.point(0), NeighborMeasure.point(3))


class TestCurvature:
    def test_k3(self):
        assert all(k == pytest.approx(0.5, abs=1e-12) for k in curvature_all_edges(complete_graph(3)).edge_values.values())

    def test_c4(self):
        assert all(abs(k) <= 1e-12 for k in curvature_all_edges(cycle_graph(4)).edge_values.values())

    def test_p3(self):
        assert ollivier_ricci_edge(path_graph(3), (0, 1)) == pytest.approx(0.0, abs=1e-12)

    def test_star_symmetry(self):
        vals = list(curvature_all_edges(star_graph(4)).edge_values.values())
        assert max(vals) - min(vals) <= 1e-12

    def test_absent_edge(self):
        with pytest.raises(GraphError):
            ollivier_ricci_edge(path_graph(3), (0, 2))

    def test_sorted_edge_order(self):
        g = random_connected(np.random.default_rng(1), 7, 0.4)
        assert list(curvature_all_edges(g).edge_values) == sorted(g.edges)

    def test_directed_graph_uses_symmetrized_metric(self):
        g = cycle_graph(4, True)
        np.testing.assert_allclose(
            list(curvature_all_edges(g).edge_values.values()),
            [curvature_all_edges(symmetrize(g)).edge_values[tuple(sorted(e))] for e in sorted(g.edges)],
        )

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 8), st.integers(0, 10**6), st.floats(0.1, 0.6))
    def test_matches_basis_enumeration(self, n, seed, p):
        g = random_connected(np.random.default_rng(seed), n, p)
        dist = all_pairs_distances(g)
        rep = curvature_all_edges(g)
        for (u, v), kappa in rep.edge_values.items():
            mu, nu = neighbor_measure(g, u), neighbor_measure(g, v)
            if len(mu.support) > 4 or len(nu.support) > 4:
                continue
            cost = dist[np.ix_(mu.support, nu.support)].astype(float)
            w = transport_by_bases(mu.mass, nu.mass, cost)
            assert abs((1.0 - kappa) - w) <= 1e-9
            assert kappa <= 1.0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(4, 9), st.integers(0, 10**6))
    def test_after_addition_matches_recompute(self, n, seed):
        rng = np.random.default_rng(seed)
        g = random_connected(rng, n, 0.25)
        absent = [p for p in itertools.combinations(range(n), 2) if not g.has_edge(*p)]
        if not absent:
            return
        add = absent[int(rng.integers(len(absent)))]
        dist = all_pairs_distances(g)
        g2 = g.with_edges_added([add])
        for e in sorted(g.edges):
            assert abs(curvature_after_addition(g, e, add, dist) - ollivier_ricci_edge(g2, e)) <= 1e-12
