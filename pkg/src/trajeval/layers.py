"""Spatial constraint layers: implausible domains, accessible infrastructure, road graph.

Layers are ingested from GeoJSON-style FeatureCollections, pre-projected or
projected at load with the dataset's projection.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import parse_crs, project_aeqd

IMPLAUSIBLE_FILE = "implausible.geojson"
INFRASTRUCTURE_FILE = "infrastructure.geojson"
ROADS_FILE = "roads.geojson"


@dataclass
class RoadEdge:
    u: str
    v: str
    coords: np.ndarray  # (k, 2) polyline
    length: float


@dataclass
class ConstraintLayers:
    """Implausible-domain polygons, accessible-infrastructure geometries, road graph."""

    implausible: list[list[np.ndarray]] = field(default_factory=list)  # polygons as rings
    infrastructure: list[np.ndarray] = field(default_factory=list)     # polylines / rings
    road_nodes: dict[str, tuple[float, float]] = field(default_factory=dict)
    road_edges: list[RoadEdge] = field(default_factory=list)

    @property
    def adjacency(self) -> dict[str, list[tuple[str, float]]]:
        adj: dict[str, list[tuple[str, float]]] = {nid: [] for nid in self.road_nodes}
        for e in self.road_edges:
            adj.setdefault(e.u, []).append((e.v, e.length))
            adj.setdefault(e.v, []).append((e.u, e.length))
        return adj


# ---------------------------------------------------------------------------
# geometry primitives
# ---------------------------------------------------------------------------

def point_in_ring(p: Sequence[float], ring: np.ndarray) -> bool:
    """Even-odd ray casting; boundary treatment follows the crossing rule."""
    x, y = float(p[0]), float(p[1])
    inside = False
    xs = ring[:, 0]
    ys = ring[:, 1]
    n = len(ring)
    j = n - 1
    for i in range(n):
        if (ys[i] > y) != (ys[j] > y):
            x_cross = xs[j] + (y - ys[j]) * (xs[i] - xs[j]) / (ys[i] - ys[j])
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def point_in_polygon(p: Sequence[float], rings: Sequence[np.ndarray]) -> bool:
    """Even-odd over all rings, so holes subtract naturally."""
    return sum(point_in_ring(p, ring) for ring in rings) % 2 == 1


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0:
        return float(np.linalg.norm(p - a))
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def points_to_segments_distance(points: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Min distance from each point to any segment; segments is (S, 4) as x1,y1,x2,y2."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    a = segments[:, 0:2]
    ab = segments[:, 2:4] - a
    denom = (ab ** 2).sum(axis=1)
    denom_safe = np.where(denom == 0, 1.0, denom)
    ap = pts[:, None, :] - a[None, :, :]
    t = np.clip((ap * ab[None, :, :]).sum(-1) / denom_safe[None, :], 0.0, 1.0)
    t = np.where(denom[None, :] == 0, 0.0, t)
    proj = a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d = np.sqrt(((pts[:, None, :] - proj) ** 2).sum(-1))
    return d.min(axis=1)


def polyline_segments(coords: np.ndarray) -> np.ndarray:
    c = np.asarray(coords, dtype=float)
    return np.hstack([c[:-1], c[1:]])


def geometry_segments(layers_geoms: Sequence[np.ndarray]) -> np.ndarray:
    parts = [polyline_segments(g) for g in layers_geoms if len(g) >= 2]
    if not parts:
        return np.zeros((0, 4))
    return np.vstack(parts)


def distance_to_infrastructure(p: Sequence[float], layers: ConstraintLayers) -> float:
    """Distance to the nearest accessible geometry (0 when none exist is not assumed)."""
    if not layers.infrastructure:
        return math.inf
    segs = geometry_segments(layers.infrastructure)
    return float(points_to_segments_distance(np.asarray(p, dtype=float), segs)[0])


# ---------------------------------------------------------------------------
# road graph
# ---------------------------------------------------------------------------

def dijkstra(adjacency: dict[str, list[tuple[str, float]]], sources: Sequence[str]) -> tuple[dict[str, float], dict[str, str]]:
    """Multi-source shortest-path distances and predecessors."""
    dist: dict[str, float] = {}
    pred: dict[str, str] = {}
    heap: list[tuple[float, str]] = []
    for s in sources:
        dist[s] = 0.0
        heap.append((0.0, s))
    heapq.heapify(heap)
    done: set[str] = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in adjacency.get(u, []):
            nd = d + w
            if nd < dist.get(v, math.inf) - 1e-12:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred


def shortest_path_nodes(
    adjacency: dict[str, list[tuple[str, float]]], sources: Sequence[str], targets: Sequence[str]
) -> list[str] | None:
    """Node sequence of the shortest path from any source to any target, or None."""
    dist, pred = dijkstra(adjacency, sources)
    best, best_d = None, math.inf
    for t in targets:
        if dist.get(t, math.inf) < best_d:
            best, best_d = t, dist[t]
    if best is None:
        return None
    path = [best]
    while path[-1] not in sources:
        path.append(pred[path[-1]])
    path.reverse()
    return path


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

def _projector(crs: str) -> Callable[[np.ndarray], np.ndarray] | None:
    kind, lat0, lon0 = parse_crs(crs)
    if kind == "metric":
        return None
    if lat0 is None:
        raise ValueError("layers need a concrete projection center; got aeqd:auto")

    def proj(coords: np.ndarray) -> np.ndarray:
        lon = coords[:, 0]
        lat = coords[:, 1]
        x, y = project_aeqd(lat, lon, lat0, lon0)
        return np.column_stack([x, y])

    return proj


def _coords(raw, proj) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if proj is not None:
        arr = proj(arr)
    return arr


def _load_features(path: Path) -> list[dict]:
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("type") != "FeatureCollection" or "features" not in doc:
        raise ValueError(f"{path.name}: expected a FeatureCollection")
    return doc["features"]


def load_layers(directory: str | Path, crs: str = "metric") -> ConstraintLayers:
    """Load the three layer files from a directory.

    ``implausible.geojson`` (Polygon/MultiPolygon), ``infrastructure.geojson``
    (LineString/Polygon) and ``roads.geojson`` (LineString features with
    ``u``/``v`` node-id properties) are each optional; missing files leave the
    corresponding layer empty. Coordinates are lon/lat when ``crs`` is a
    projection, planar meters when ``crs == "metric"``.
    """
    directory = Path(directory)
    proj = _projector(crs)
    layers = ConstraintLayers()

    imp_path = directory / IMPLAUSIBLE_FILE
    if imp_path.exists():
        for feat in _load_features(imp_path):
            geom = feat.get("geometry", {})
            gtype = geom.get("type")
            if gtype == "Polygon":
                layers.implausible.append([_coords(r, proj) for r in geom["coordinates"]])
            elif gtype == "MultiPolygon":
                for poly in geom["coordinates"]:
                    layers.implausible.append([_coords(r, proj) for r in poly])
            else:
                raise ValueError(f"{IMPLAUSIBLE_FILE}: unsupported geometry {gtype!r}")

    infra_path = directory / INFRASTRUCTURE_FILE
    if infra_path.exists():
        for feat in _load_features(infra_path):
            geom = feat.get("geometry", {})
            gtype = geom.get("type")
            if gtype == "LineString":
                layers.infrastructure.append(_coords(geom["coordinates"], proj))
            elif gtype == "Polygon":
                for ring in geom["coordinates"]:
                    layers.infrastructure.append(_coords(ring, proj))
            elif gtype == "MultiLineString":
                for line in geom["coordinates"]:
                    layers.infrastructure.append(_coords(line, proj))
            else:
                raise ValueError(f"{INFRASTRUCTURE_FILE}: unsupported geometry {gtype!r}")

    roads_path = directory / ROADS_FILE
    if roads_path.exists():
        for feat in _load_features(roads_path):
            geom = feat.get("geometry", {})
            if geom.get("type") != "LineString":
                raise ValueError(f"{ROADS_FILE}: road edges must be LineStrings")
            props = feat.get("properties") or {}
            u, v = str(props.get("u")), str(props.get("v"))
            if u == "None" or v == "None":
                raise ValueError(f"{ROADS_FILE}: road edge missing u/v node ids")
            coords = _coords(geom["coordinates"], proj)
            length = float(np.linalg.norm(np.diff(coords, axis=0), axis=1).sum())
            if length <= 0:
                raise ValueError(f"{ROADS_FILE}: edge {u}-{v} has non-positive length")
            layers.road_nodes.setdefault(u, (float(coords[0, 0]), float(coords[0, 1])))
            layers.road_nodes.setdefault(v, (float(coords[-1, 0]), float(coords[-1, 1])))
            layers.road_edges.append(RoadEdge(u, v, coords, length))

    return layers
