import numpy as np
import pytest

from netforms import (
    CoordinateSequence,
    NetworkError,
    build_coordinate_sequence,
    build_m0,
    build_network,
    build_path,
    build_star,
    compare_metric_chain,
    coordinate_metric,
    dendrite_additivity_check,
    intrinsic_metric,
    intrinsic_metric_matrix,
    intrinsic_metric_tree,
    path_length_metric,
    rescale_dominated,
    resistance_metric,
    sqrt_resistance_metric,
)
from netforms.metrics import MetricMatrix, intrinsic_grid_oracle, triangle_violation
from netforms.verify import random_connected_network, random_measure


def two_vertex():
    return build_network(["a", "b"], [("a", "b", 1.0)])


def path3():
    return build_network(["0", "1", "2"], [("0", "1", 1.0), ("1", "2", 1.0)])


class TestMetricMatrix:
    def test_validation_rejects_asymmetry(self):
        with pytest.raises(ValueError, match="symmetric"):
            MetricMatrix(("a", "b"), np.array([[0.0, 1.0], [2.0, 0.0]]), "resistance")

    def test_validation_rejects_nonzero_diagonal(self):
        with pytest.raises(ValueError, match="diagonal"):
            MetricMatrix(("a", "b"), np.array([[1.0, 1.0], [1.0, 0.0]]), "resistance")

    def test_validation_rejects_triangle_violation(self):
        d = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]])
        with pytest.raises(ValueError, match="triangle"):
            MetricMatrix(("a", "b", "c"), d, "resistance")

    def test_wide_sense_allows_infinity(self):
        d = np.array([[0.0, np.inf], [np.inf, 0.0]])
        MetricMatrix(("a", "b"), d, "intrinsic")


class TestResistanceMetric:
    def test_two_vertex(self):
        d = resistance_metric(two_vertex())
        assert d.at("a", "b") == 1.0

    def test_star_values(self):
        tree = build_star(4, 3, [1.0] * 4)
        d = resistance_metric(tree.net)
        assert d.at("q1", "q3") == pytest.approx(2.0, abs=1e-10)
        assert d.at("p", "q2") == pytest.approx(1.0, abs=1e-10)

    def test_unit_triangle(self):
        net = build_network(
            ["1", "2", "3"], [("1", "2", 1.0), ("1", "3", 1.0), ("2", "3", 1.0)]
        )
        d = resistance_metric(net)
        assert d.at("1", "2") == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_axioms_on_random_networks(self, rng):
        for _ in range(25):
            net = random_connected_network(rng)
            d = resistance_metric(net)
            assert triangle_violation(d.values) <= 1e-10


class TestSqrtResistance:
    def test_two_vertex(self):
        assert sqrt_resistance_metric(two_vertex()).at("a", "b") == pytest.approx(1.0)

    def test_star_tips(self):
        tree = build_star(3, 2, [1.0] * 3)
        d = sqrt_resistance_metric(tree.net)
        assert d.at("q1", "q2") == pytest.approx(np.sqrt(2.0), abs=1e-9)

    def test_square_recovers_resistance(self, rng):
        for _ in range(10):
            net = random_connected_network(rng)
            r = resistance_metric(net).values
            s = sqrt_resistance_metric(net).values
            assert np.allclose(s**2, r, atol=1e-9)


class TestCoordinateMetric:
    def test_single_function(self):
        net = two_vertex()
        coords = CoordinateSequence(net=net, functions=(np.array([0.0, 1.0]),))
        assert coordinate_metric(coords).at("a", "b") == 1.0

    def test_monotone_under_added_functions(self, rng):
        net = random_connected_network(rng, n_min=4)
        coords = build_coordinate_sequence(net)
        smaller = CoordinateSequence(net=net, functions=coords.functions)
        d_small = coordinate_metric(smaller).values
        extra = coords.functions + (rng.standard_normal(net.n_vertices),)
        d_big = coordinate_metric(
            CoordinateSequence(net=net, functions=extra, unit_energy=False)
        ).values
        assert np.all(d_big >= d_small - 1e-15)

    def test_normalized_indicator_on_two_vertex(self):
        net = two_vertex()
        coords = build_coordinate_sequence(net, seeds=[net.indicator("a")])
        assert coordinate_metric(coords).at("a", "b") == pytest.approx(1.0)


class TestIntrinsicMetric:
    def test_two_vertex_closed_form(self):
        sol = intrinsic_metric(two_vertex(), np.array([0.5, 0.5]), "a", "b")
        assert sol.distance == pytest.approx(1.0, abs=1e-8)
        assert set(sol.active_vertices) == {"a", "b"}

    def test_same_vertex(self):
        sol = intrinsic_metric(two_vertex(), np.array([0.5, 0.5]), "a", "a")
        assert sol.distance == 0.0
        assert np.all(sol.maximizer == 0.0)

    def test_three_vertex_path_value(self):
        m = np.full(3, 1.0 / 3.0)
        sol = intrinsic_metric(path3(), m, "0", "2")
        assert sol.distance == pytest.approx(2.0 / np.sqrt(3.0), abs=1e-8)
        oracle = intrinsic_grid_oracle(path3(), m, "0", "2", step=1e-3)
        assert abs(sol.distance - oracle) <= 5e-3

    def test_maximizer_feasible_and_pinned(self, rng):
        from netforms.network import energy_measure

        for _ in range(10):
            net = random_connected_network(rng, n_max=6)
            m = random_measure(rng, net)
            x, y = net.vertices[0], net.vertices[-1]
            sol = intrinsic_metric(net, m, x, y)
            gamma = energy_measure(net, sol.maximizer)
            assert np.all(gamma <= m * (1 + 1e-8))
            assert sol.maximizer[net.index(y)] == 0.0
            assert sol.stats["gap"] < 1e-8

    def test_certified_gap_small(self, rng):
        net = random_connected_network(rng, n_max=8)
        m = random_measure(rng, net)
        sol = intrinsic_metric(net, m, net.vertices[0], net.vertices[-1])
        assert 0.0 <= sol.stats["gap"] < 1e-8

    def test_scaling_covariance(self, rng):
        for _ in range(10):
            net = random_connected_network(rng, n_max=6)
            m = random_measure(rng, net)
            c = float(rng.uniform(0.3, 5.0))
            x, y = net.vertices[0], net.vertices[-1]
            d1 = intrinsic_metric(net, m, x, y).distance
            d2 = intrinsic_metric(net, c * m, x, y).distance
            assert d2 == pytest.approx(np.sqrt(c) * d1, abs=1e-9 * max(1, d1))

    def test_symmetry(self, rng):
        net = random_connected_network(rng, n_max=5)
        m = random_measure(rng, net)
        x, y = net.vertices[0], net.vertices[-1]
        assert intrinsic_metric(net, m, x, y).distance == pytest.approx(
            intrinsic_metric(net, m, y, x).distance, abs=1e-8
        )

    def test_matrix_satisfies_axioms(self, rng):
        net = random_connected_network(rng, n_max=5)
        m = random_measure(rng, net)
        d = intrinsic_metric_matrix(net, m)
        assert triangle_violation(d.values) <= d.tol

    def test_grid_oracle_agreement_small_instances(self, rng):
        for _ in range(8):
            net = random_connected_network(rng, n_min=2, n_max=4)
            m = random_measure(rng, net)
            m /= np.sum(m)
            x, y = net.vertices[0], net.vertices[-1]
            sol = intrinsic_metric(net, m, x, y)
            oracle = intrinsic_grid_oracle(net, m, x, y, step=1e-3)
            assert abs(sol.distance - oracle) <= 5e-3

    def test_nonpositive_measure_rejected(self):
        with pytest.raises(NetworkError, match="positive"):
            intrinsic_metric(two_vertex(), np.array([1.0, 0.0]), "a", "b")


class TestIntrinsicTree:
    def test_star_hub_to_tip(self):
        a = [1.0, 0.5, 2.0]
        tree = build_star(3, 4, a)
        for n, an in enumerate(a, start=1):
            assert intrinsic_metric_tree(tree, "p", f"q{n}") == pytest.approx(
                np.sqrt(an), abs=1e-12
            )

    def test_unit_path(self):
        tree = build_path(8, 1.0, 1.0)
        assert intrinsic_metric_tree(tree, "x0", "x1") == pytest.approx(1.0, abs=1e-12)

    def test_tip_to_tip_additivity(self):
        a = [0.7, 1.3]
        tree = build_star(2, 3, a)
        assert intrinsic_metric_tree(tree, "q1", "q2") == pytest.approx(
            np.sqrt(a[0]) + np.sqrt(a[1]), abs=1e-12
        )

    def test_unknown_vertex(self):
        tree = build_path(2)
        with pytest.raises(NetworkError):
            intrinsic_metric_tree(tree, "x0", "zz")

    def test_refinement_convergence_to_closed_form(self):
        # nonuniform density: the lumped solve differs at finite k and
        # converges to the arc-length integral of sqrt(density)
        density = lambda s: 1.0 if s < 0.5 else 4.0
        closed = 0.5 * 1.0 + 0.5 * 2.0
        errors = []
        for k in (4, 8, 16, 32, 64):
            tree = build_path(k, 1.0, density)
            sol = intrinsic_metric(tree.net, tree.mu, "x0", "x1", gap_tol=1e-10)
            errors.append(abs(sol.distance - closed))
        assert all(errors[i + 1] <= errors[i] + 1e-9 for i in range(len(errors) - 1))
        assert errors[-1] < 1e-3


class TestPathLengthMetric:
    def test_tree_intrinsic_is_length_metric(self):
        # the closed-form tree metric is additive along unique paths, so
        # chaining over edges reproduces it exactly
        tree = build_star(3, 2, [1.0, 0.25, 4.0])
        n = tree.net.n_vertices
        d = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d[i, j] = d[j, i] = intrinsic_metric_tree(
                    tree, tree.net.vertices[i], tree.net.vertices[j]
                )
        dl = path_length_metric(d, tree.net)
        assert np.allclose(dl.values, d, atol=1e-12)

    def test_two_vertex_identity(self):
        d = resistance_metric(two_vertex())
        dl = path_length_metric(d, two_vertex())
        assert np.allclose(dl.values, d.values)

    def test_strict_dominance_for_non_length_metric(self):
        # euclidean-style metric on a 3-vertex path: the chain through
        # the middle vertex is strictly longer than the direct distance
        net = path3()
        d = np.array([[0.0, 1.0, 1.9], [1.0, 0.0, 1.0], [1.9, 1.0, 0.0]])
        dl = path_length_metric(d, net)
        assert dl.values[0, 2] == pytest.approx(2.0) and dl.values[0, 2] > d[0, 2]
        assert np.all(dl.values >= d - 1e-15)

    def test_dominates_metric_inputs(self, rng):
        for _ in range(10):
            net = random_connected_network(rng)
            d = resistance_metric(net)
            dl = path_length_metric(d, net)
            assert np.all(dl.values >= d.values - 1e-12)


class TestMetricChain:
    def _chain_inputs(self, rng, n_max=6):
        net = random_connected_network(rng, n_max=n_max)
        coords = build_coordinate_sequence(net)
        k = len(coords.functions)
        m = build_m0(coords, np.full(k, 1.0 / (k + 1)))
        return net, m, rescale_dominated(coords, m)

    def test_two_vertex_quarter_measure(self):
        net = two_vertex()
        m = np.array([0.25, 0.25])
        coords = rescale_dominated(
            build_coordinate_sequence(net, seeds=[np.array([0.0, 1.0])]), m
        )
        rep = compare_metric_chain(net, m, coords)
        assert rep.passed

    def test_star_with_subunit_mass(self):
        tree = build_star(3, 2, [0.2, 0.3, 0.4])
        assert np.sum(tree.mu) <= 1.0
        coords = rescale_dominated(build_coordinate_sequence(tree.net), tree.mu)
        rep = compare_metric_chain(tree.net, tree.mu, coords)
        assert rep.passed

    def test_random_instances(self, rng):
        for _ in range(20):
            net, m, coords = self._chain_inputs(rng)
            rep = compare_metric_chain(net, m, coords)
            assert rep.passed, rep.details

    def test_mass_guard(self):
        net = two_vertex()
        coords = build_coordinate_sequence(net)
        with pytest.raises(NetworkError, match="mass"):
            compare_metric_chain(net, np.array([1.0, 1.0]), coords)

    def test_domination_guard(self):
        net = two_vertex()
        coords = build_coordinate_sequence(net)   # unit energy, not dominated
        with pytest.raises(NetworkError, match="not dominated"):
            compare_metric_chain(net, np.array([0.1, 0.1]), coords)


class TestDendriteAdditivity:
    def test_star_through_hub(self):
        a = [0.5, 2.0, 1.0]
        tree = build_star(3, 4, a)
        reports = dendrite_additivity_check(tree, [("q1", "p", "q2")])
        assert all(r.passed for r in reports)
        assert reports[0].lhs == pytest.approx(np.sqrt(0.5) + np.sqrt(2.0), abs=1e-12)

    def test_endpoint_case(self):
        tree = build_path(4)
        reports = dendrite_additivity_check(tree, [("x0", "x0", "x1")])
        assert all(r.passed for r in reports)

    def test_path_midpoint(self):
        tree = build_path(4, 1.0, 2.0)
        reports = dendrite_additivity_check(tree, [("x0", "x1/2", "x1")])
        assert all(r.passed for r in reports)

    def test_solver_check_at_coarse_mesh(self):
        tree = build_path(4, 1.0, 1.0)
        reports = dendrite_additivity_check(
            tree, [("x0", "x1/2", "x1")], solver_check=True
        )
        assert all(r.passed for r in reports)

    def test_off_path_vertex_rejected(self):
        tree = build_star(3, 2, [1.0] * 3)
        with pytest.raises(NetworkError, match="not on the path"):
            dendrite_additivity_check(tree, [("q1", "q3", "q2")])
