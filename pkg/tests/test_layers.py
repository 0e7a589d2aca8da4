import json

import numpy as np
import pytest

from trajeval.layers import (
    ConstraintLayers,
    RoadEdge,
    dijkstra,
    load_layers,
    point_in_polygon,
    point_in_ring,
    point_segment_distance,
    points_to_segments_distance,
    shortest_path_nodes,
)

SQUARE = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0], [0.0, 0.0]])
HOLE = np.array([[4.0, 4.0], [6.0, 4.0], [6.0, 6.0], [4.0, 6.0], [4.0, 4.0]])


class TestGeometry:
    def test_point_in_ring(self):
        assert point_in_ring((5.0, 5.0), SQUARE)
        assert not point_in_ring((15.0, 5.0), SQUARE)

    def test_polygon_hole_subtracts(self):
        rings = [SQUARE, HOLE]
        assert point_in_polygon((2.0, 2.0), rings)
        assert not point_in_polygon((5.0, 5.0), rings)

    def test_segment_distance(self):
        a = np.array([0.0, 0.0])
        b = np.array([10.0, 0.0])
        assert point_segment_distance(np.array([5.0, 3.0]), a, b) == pytest.approx(3.0)
        assert point_segment_distance(np.array([-4.0, 3.0]), a, b) == pytest.approx(5.0)

    def test_degenerate_segment(self):
        a = np.array([1.0, 1.0])
        assert point_segment_distance(np.array([4.0, 5.0]), a, a) == pytest.approx(5.0)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(2)
        segs = rng.random((8, 4)) * 100
        pts = rng.random((20, 2)) * 100
        got = points_to_segments_distance(pts, segs)
        for i, p in enumerate(pts):
            expected = min(
                point_segment_distance(p, s[0:2], s[2:4]) for s in segs
            )
            assert got[i] == pytest.approx(expected, abs=1e-9)


class TestDijkstra:
    def test_shortest_path_small_graph(self):
        adj = {
            "a": [("b", 1.0), ("c", 4.0)],
            "b": [("a", 1.0), ("c", 2.0), ("d", 6.0)],
            "c": [("a", 4.0), ("b", 2.0), ("d", 3.0)],
            "d": [("b", 6.0), ("c", 3.0)],
        }
        dist, _ = dijkstra(adj, ["a"])
        assert dist["d"] == pytest.approx(6.0)  # a-b-c-d
        path = shortest_path_nodes(adj, ["a"], ["d"])
        assert path == ["a", "b", "c", "d"]

    def test_unreachable_returns_none(self):
        adj = {"a": [("b", 1.0)], "b": [("a", 1.0)], "z": []}
        assert shortest_path_nodes(adj, ["a"], ["z"]) is None

    def test_multi_source_takes_best(self):
        adj = {
            "a": [("m", 10.0)],
            "b": [("m", 1.0)],
            "m": [("a", 10.0), ("b", 1.0)],
        }
        dist, _ = dijkstra(adj, ["a", "b"])
        assert dist["m"] == pytest.approx(1.0)


class TestLoading:
    def test_city_layers_load(self, city_layers):
        assert len(city_layers.implausible) == 1
        assert len(city_layers.infrastructure) > 10
        assert len(city_layers.road_edges) > 10
        assert city_layers.adjacency["n0_0"]

    def test_missing_files_leave_layers_empty(self, tmp_path):
        layers = load_layers(tmp_path, crs="metric")
        assert layers.implausible == [] and layers.road_edges == []

    def test_road_edge_requires_node_ids(self, tmp_path):
        doc = {"type": "FeatureCollection", "features": [{
            "type": "Feature", "properties": {},
            "geometry": {"type": "LineString", "coordinates": [[0, 0], [1, 1]]},
        }]}
        (tmp_path / "roads.geojson").write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(ValueError, match="node ids"):
            load_layers(tmp_path, crs="metric")

    def test_non_feature_collection_rejected(self, tmp_path):
        (tmp_path / "implausible.geojson").write_text("{}", encoding="utf-8")
        with pytest.raises(ValueError, match="FeatureCollection"):
            load_layers(tmp_path, crs="metric")

    def test_projected_load(self, tmp_path):
        doc = {"type": "FeatureCollection", "features": [{
            "type": "Feature", "properties": {},
            "geometry": {"type": "Polygon",
                         "coordinates": [[[6.0, 45.0], [6.01, 45.0], [6.01, 45.01], [6.0, 45.01], [6.0, 45.0]]]},
        }]}
        (tmp_path / "implausible.geojson").write_text(json.dumps(doc), encoding="utf-8")
        layers = load_layers(tmp_path, crs="aeqd:45.0,6.0")
        ring = layers.implausible[0][0]
        assert ring[0] == pytest.approx([0.0, 0.0], abs=1e-6)
        assert ring[2][1] == pytest.approx(1112.0, rel=0.01)

    def test_adjacency_symmetric(self):
        layers = ConstraintLayers(
            road_nodes={"a": (0.0, 0.0), "b": (1.0, 0.0)},
            road_edges=[RoadEdge("a", "b", np.array([[0.0, 0.0], [1.0, 0.0]]), 1.0)],
        )
        adj = layers.adjacency
        assert ("b", 1.0) in adj["a"] and ("a", 1.0) in adj["b"]
