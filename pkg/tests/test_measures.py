import math

import numpy as np
import pytest

from oracles import (
    dtw_oracle,
    frechet_oracle,
    hausdorff_oracle,
    tau_b_oracle,
    transport_cost_oracle,
)

from trajeval.measures import (
    EmpiricalDistribution,
    GroundCostMatrix,
    RankVector,
    align_rank_vectors,
    cosine_distance,
    discrete_frechet,
    dtw,
    hausdorff,
    kendall_tau_b,
    rank_by_frequency,
    spatial_ground_cost,
    transport_plan,
    wasserstein1_ground_cost,
    wasserstein1_scalar,
)


def dist(atoms, weights):
    return EmpiricalDistribution(tuple(atoms), np.asarray(weights, dtype=float))


def random_instance(rng, max_atoms=4):
    n = int(rng.integers(1, max_atoms + 1))
    m = int(rng.integers(1, max_atoms + 1))
    a = rng.random(n) + 0.05
    b = rng.random(m) + 0.05
    a /= a.sum()
    b /= b.sum()
    costs = rng.random((n, m)) * 10
    return a, b, costs


class TestEmpiricalDistribution:
    def test_normalizes_weights(self):
        d = dist([1.0, 2.0], [2.0, 6.0])
        assert np.allclose(d.weights, [0.25, 0.75])

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError, match="unique"):
            dist([1.0, 1.0], [0.5, 0.5])

    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError):
            dist([0.0, 1.0], [-0.1, 1.1])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            dist([], [])

    def test_from_samples_merges(self):
        d = EmpiricalDistribution.from_samples([1.0, 1.0, 2.0, 3.0])
        assert d.atoms == (1.0, 2.0, 3.0)
        assert np.allclose(d.weights, [0.5, 0.25, 0.25])


class TestWasserstein1Scalar:
    def test_identity_is_zero(self):
        d = dist([0.0, 3.0, 7.0], [0.2, 0.5, 0.3])
        assert wasserstein1_scalar(d, d) == 0.0

    def test_unit_translation(self):
        assert wasserstein1_scalar(dist([0.0], [1.0]), dist([1.0], [1.0])) == pytest.approx(1.0)

    def test_half_mass_move(self):
        # expected value pinned by the 2x1 transport-polytope oracle
        mu = dist([0.0, 1.0], [0.5, 0.5])
        nu = dist([0.0], [1.0])
        oracle = transport_cost_oracle(mu.weights, nu.weights, [[0.0], [1.0]])
        assert oracle == pytest.approx(0.5)
        assert wasserstein1_scalar(mu, nu) == pytest.approx(oracle, abs=1e-12)

    def test_matches_ground_cost_form_on_random_instances(self):
        rng = np.random.default_rng(5)
        for _ in range(80):
            xs = np.sort(rng.choice(np.arange(20), size=rng.integers(1, 5), replace=False)).astype(float)
            ys = np.sort(rng.choice(np.arange(20), size=rng.integers(1, 5), replace=False)).astype(float)
            wa = rng.random(len(xs)) + 0.01
            wb = rng.random(len(ys)) + 0.01
            mu = dist(xs, wa / wa.sum())
            nu = dist(ys, wb / wb.sum())
            costs = np.abs(xs[:, None] - ys[None, :])
            expected = wasserstein1_ground_cost(mu, nu, GroundCostMatrix(costs, 0.0))
            assert wasserstein1_scalar(mu, nu) == pytest.approx(expected, abs=1e-9)


class TestTransportSolver:
    def test_identity_plan_cost_zero(self):
        cells = [(0, 0), (2, 1), (5, 5)]
        mu = dist(cells, [0.2, 0.3, 0.5])
        cost = spatial_ground_cost(cells, cells, 100.0)
        assert wasserstein1_ground_cost(mu, mu, cost) == 0.0

    def test_all_mass_at_dmax_pair(self):
        cost = spatial_ground_cost([(0, 0)], [(3, 4)], 250.0)
        value = wasserstein1_ground_cost(dist([(0, 0)], [1.0]), dist([(3, 4)], [1.0]), cost)
        assert value == pytest.approx(1.0)

    def test_3x2_matches_vertex_oracle(self):
        a = np.array([0.2, 0.3, 0.5])
        b = np.array([0.6, 0.4])
        costs = np.array([[1.0, 4.0], [2.0, 0.5], [3.0, 2.5]])
        mu = dist([0, 1, 2], a)
        nu = dist([10, 11], b)
        got = wasserstein1_ground_cost(mu, nu, GroundCostMatrix(costs, 0.0))
        assert got == pytest.approx(transport_cost_oracle(a, b, costs), abs=1e-9)

    def test_random_instances_match_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(60):
            a, b, costs = random_instance(rng)
            plan = transport_plan(a, b, costs)
            got = float((plan * costs).sum())
            assert got == pytest.approx(transport_cost_oracle(a, b, costs), abs=1e-9)

    def test_plan_marginals(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            a, b, costs = random_instance(rng)
            plan = transport_plan(a, b, costs)
            assert np.all(plan >= -1e-12)
            assert np.allclose(plan.sum(axis=1), a, atol=1e-9)
            assert np.allclose(plan.sum(axis=0), b, atol=1e-9)

    def test_dimension_mismatch_rejected(self):
        mu = dist([0.0, 1.0], [0.5, 0.5])
        nu = dist([0.0], [1.0])
        with pytest.raises(ValueError, match="atoms"):
            wasserstein1_ground_cost(mu, nu, GroundCostMatrix(np.zeros((3, 1)), 0.0))

    def test_metric_axioms_on_shared_support(self):
        rng = np.random.default_rng(29)
        cells = [(0, 0), (1, 0), (0, 2), (3, 3)]
        cost = spatial_ground_cost(cells, cells, 50.0)
        for _ in range(25):
            ws = [rng.random(4) + 0.01 for _ in range(3)]
            da, db, dc = (dist(cells, w / w.sum()) for w in ws)
            ab = wasserstein1_ground_cost(da, db, cost)
            ba = wasserstein1_ground_cost(db, da, GroundCostMatrix(cost.costs.T, cost.d_max))
            ac = wasserstein1_ground_cost(da, dc, cost)
            bc = wasserstein1_ground_cost(db, dc, cost)
            assert ab == pytest.approx(ba, abs=1e-9)
            assert ac <= ab + bc + 1e-9
            assert wasserstein1_ground_cost(da, da, cost) == pytest.approx(0.0, abs=1e-12)


class TestSpatialGroundCost:
    def test_two_cells_self_normalize(self):
        c = spatial_ground_cost([(0, 0)], [(5, 1)], 300.0)
        assert c.costs.shape == (1, 1)
        assert c.costs[0, 0] == pytest.approx(1.0)

    def test_scale_invariance(self):
        cells_a = [(0, 0), (2, 3)]
        cells_b = [(1, 1), (4, 0)]
        c1 = spatial_ground_cost(cells_a, cells_b, 100.0)
        c2 = spatial_ground_cost(cells_a, cells_b, 200.0)
        assert np.allclose(c1.costs, c2.costs)
        assert c2.d_max == pytest.approx(2 * c1.d_max)

    def test_three_collinear_cells(self):
        c = spatial_ground_cost([(0, 0), (1, 0), (2, 0)], [(0, 0), (1, 0), (2, 0)], 500.0)
        assert np.allclose(sorted(set(np.round(c.costs.ravel(), 12))), [0.0, 0.5, 1.0])

    def test_single_shared_cell_all_zero(self):
        c = spatial_ground_cost([(4, 4)], [(4, 4)], 100.0)
        assert c.d_max == 0.0
        assert np.all(c.costs == 0.0)

    def test_dmax_spans_union_not_only_cross_pairs(self):
        # farthest pair sits inside one support; normalization must still see it
        c = spatial_ground_cost([(0, 0), (10, 0)], [(1, 0)], 100.0)
        assert c.d_max == pytest.approx(1000.0)
        assert c.costs.max() < 1.0


class TestKendallTauB:
    def test_identical_rankings(self):
        rv = rank_by_frequency({"a": 5, "b": 3, "c": 1})
        assert kendall_tau_b(rv, rv) == pytest.approx(1.0)

    def test_exact_reversal(self):
        x = RankVector(("a", "b", "c"), np.array([1, 2, 3]))
        y = RankVector(("a", "b", "c"), np.array([3, 2, 1]))
        assert kendall_tau_b(x, y) == pytest.approx(-1.0)

    def test_identical_with_ties_still_one(self):
        rv = rank_by_frequency({"a": 5, "b": 5, "c": 1})
        assert kendall_tau_b(rv, rv) == pytest.approx(1.0)

    def test_missing_items_get_bottom_ties(self):
        x = RankVector(("a", "b"), np.array([1, 2]))
        y = RankVector(("b", "c"), np.array([1, 2]))
        rx, ry = align_rank_vectors(x, y)
        # union order a, b, c
        assert list(rx) == [1, 2, 3]
        assert list(ry) == [3, 1, 2]

    def test_all_tied_is_error(self):
        x = RankVector(("a", "b"), np.array([1, 1]))
        y = RankVector(("a", "b"), np.array([1, 2]))
        with pytest.raises(ValueError, match="tied"):
            kendall_tau_b(x, y)

    def test_random_tied_partial_instances_match_oracle(self):
        rng = np.random.default_rng(101)
        items = list("abcdefghij")
        for _ in range(120):
            sx = sorted(rng.choice(items, size=rng.integers(2, 8), replace=False))
            sy = sorted(rng.choice(items, size=rng.integers(2, 8), replace=False))
            x = rank_by_frequency({it: int(rng.integers(1, 4)) for it in sx})
            y = rank_by_frequency({it: int(rng.integers(1, 4)) for it in sy})
            x_map = dict(zip(x.items, (float(r) for r in x.ranks)))
            y_map = dict(zip(y.items, (float(r) for r in y.ranks)))
            try:
                expected = tau_b_oracle(x_map, y_map)
            except ValueError:
                with pytest.raises(ValueError):
                    kendall_tau_b(x, y)
                continue
            assert kendall_tau_b(x, y) == pytest.approx(expected, abs=1e-12)

    def test_symmetry(self):
        x = rank_by_frequency({"a": 3, "b": 2, "c": 2, "d": 1})
        y = rank_by_frequency({"b": 9, "c": 1, "e": 4})
        assert kendall_tau_b(x, y) == pytest.approx(kendall_tau_b(y, x), abs=1e-12)


class TestPointSetDistances:
    def test_hausdorff_identity(self):
        pts = np.array([[0.0, 0.0], [1.0, 2.0]])
        assert hausdorff(pts, pts) == 0.0

    def test_hausdorff_3_4_5(self):
        assert hausdorff(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == pytest.approx(5.0)

    def test_hausdorff_asymmetric_matches_oracle(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]])
        b = np.array([[0.5, 0.0], [10.0, 0.0], [5.0, 4.0]])
        assert hausdorff(a, b) == pytest.approx(hausdorff_oracle(a, b), abs=1e-12)

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            hausdorff(np.zeros((0, 2)), np.array([[0.0, 0.0]]))

    def test_frechet_identity_and_single_points(self):
        seq = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
        assert discrete_frechet(seq, seq) == 0.0
        assert discrete_frechet(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == pytest.approx(5.0)

    def test_frechet_3x3_matches_recursion_oracle(self):
        a = np.array([[0.0, 0.0], [2.0, 1.0], [4.0, 0.0]])
        b = np.array([[0.0, 1.0], [2.0, -1.0], [4.0, 1.0]])
        assert discrete_frechet(a, b) == pytest.approx(frechet_oracle(a, b), abs=1e-12)

    def test_frechet_random_matches_oracle(self):
        rng = np.random.default_rng(55)
        for _ in range(50):
            a = rng.random((int(rng.integers(1, 7)), 2)) * 10
            b = rng.random((int(rng.integers(1, 7)), 2)) * 10
            assert discrete_frechet(a, b) == pytest.approx(frechet_oracle(a, b), abs=1e-12)

    def test_frechet_at_least_hausdorff_on_same_points(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            a = rng.random((5, 2))
            b = rng.random((6, 2))
            assert discrete_frechet(a, b) >= hausdorff(a, b) - 1e-12

    def test_dtw_identity(self):
        seq = np.array([[0.0, 0.0], [1.0, 1.0]])
        assert dtw(seq, seq) == 0.0

    def test_dtw_forced_alignment_single_point(self):
        a = np.array([[0.0, 0.0]])
        b = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
        assert dtw(a, b) == pytest.approx(6.0)

    def test_dtw_3x4_matches_path_enumeration(self):
        a = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, 1.0]])
        b = np.array([[0.0, 1.0], [1.0, 1.0], [2.0, 2.0], [3.0, 0.0]])
        assert dtw(a, b) == pytest.approx(dtw_oracle(a, b), abs=1e-12)

    def test_dtw_random_matches_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(40):
            a = rng.random((int(rng.integers(1, 6)), 2)) * 5
            b = rng.random((int(rng.integers(1, 6)), 2)) * 5
            assert dtw(a, b) == pytest.approx(dtw_oracle(a, b), abs=1e-12)


class TestCosine:
    def test_identity(self):
        assert cosine_distance(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == pytest.approx(0.0)

    def test_orthogonal_one_hot(self):
        assert cosine_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(1.0)

    def test_hand_computed(self):
        got = cosine_distance(np.array([1.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0]))
        assert got == pytest.approx(1 - 1 / math.sqrt(2))

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="zero"):
            cosine_distance(np.zeros(3), np.ones(3))
