"""Deterministic synthetic datasets and constraint layers for the test suite."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from trajeval.core import Dataset, GeoPoint, TrajPoint, Trajectory

CATEGORIES = ("food", "home", "office", "park")

# city fixture geometry
WATER_RECT = (13000.0, 8000.0, 16000.0, 11000.0)  # x0, y0, x1, y1
WATER_ANCHOR = (14500.0, 9500.0)
PIER = ((13000.0, 9500.0), (13800.0, 9500.0))
ROAD_SPAN = 12000.0
ROAD_STEP = 2000.0


def _category_at(x: float, y: float) -> str:
    col = math.floor(x / 500.0)
    row = math.floor(y / 500.0)
    return CATEGORIES[(col * 7 + row * 13) % len(CATEGORIES)]


def build_city(n_users: int = 10, trajs_per_user: int = 5, seed: int = 7) -> Dataset:
    """Anchored random-walk city: users on a lattice, 4 anchors each with
    skewed visit frequencies, one user anchored inside the water body."""
    rng = np.random.default_rng(seed)
    anchor_probs = np.array([0.4, 0.3, 0.2, 0.1])
    trajectories = []
    for u in range(n_users):
        cx = 1000.0 + (u % 4) * 3500.0
        cy = 1000.0 + (u // 4) * 3500.0
        anchors = np.array([
            (cx, cy),
            (cx + 800.0, cy + 150.0),
            (cx + 250.0, cy + 900.0),
            (cx - 700.0, cy + 600.0),
        ])
        if u == 0:
            anchors[3] = WATER_ANCHOR
        for k in range(trajs_per_user):
            length = int(rng.integers(8, 15))
            t0 = float(u * 10_000_000 + k * 100_000)
            points = []
            ts = t0
            for _ in range(length):
                a = int(rng.choice(len(anchors), p=anchor_probs))
                x = float(anchors[a][0] + rng.normal(0, 60.0))
                y = float(anchors[a][1] + rng.normal(0, 60.0))
                points.append(TrajPoint(GeoPoint(x, y), ts, _category_at(x, y)))
                ts += float(rng.integers(240, 600))
            trajectories.append(Trajectory(f"u{u:02d}-t{k:02d}", f"user{u:02d}", tuple(points)))
    return Dataset(tuple(trajectories), name="city", crs="metric", vocabulary=CATEGORIES)


def write_city_layers(directory: Path) -> Path:
    """Water polygon, roads+pier infrastructure and the road graph."""
    directory.mkdir(parents=True, exist_ok=True)
    x0, y0, x1, y1 = WATER_RECT
    implausible = {
        "type": "FeatureCollection",
        "features": [{
            "type": "Feature",
            "properties": {"kind": "water"},
            "geometry": {
                "type": "Polygon",
                "coordinates": [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]],
            },
        }],
    }
    (directory / "implausible.geojson").write_text(json.dumps(implausible), encoding="utf-8")

    n = int(ROAD_SPAN / ROAD_STEP) + 1
    road_features = []
    infra_features = []
    for i in range(n):
        for j in range(n):
            x, y = i * ROAD_STEP, j * ROAD_STEP
            if i + 1 < n:
                seg = [[x, y], [x + ROAD_STEP, y]]
                road_features.append({
                    "type": "Feature",
                    "properties": {"u": f"n{i}_{j}", "v": f"n{i + 1}_{j}"},
                    "geometry": {"type": "LineString", "coordinates": seg},
                })
                infra_features.append({
                    "type": "Feature", "properties": {},
                    "geometry": {"type": "LineString", "coordinates": seg},
                })
            if j + 1 < n:
                seg = [[x, y], [x, y + ROAD_STEP]]
                road_features.append({
                    "type": "Feature",
                    "properties": {"u": f"n{i}_{j}", "v": f"n{i}_{j + 1}"},
                    "geometry": {"type": "LineString", "coordinates": seg},
                })
                infra_features.append({
                    "type": "Feature", "properties": {},
                    "geometry": {"type": "LineString", "coordinates": seg},
                })
    infra_features.append({
        "type": "Feature", "properties": {"kind": "pier"},
        "geometry": {"type": "LineString", "coordinates": [list(PIER[0]), list(PIER[1])]},
    })
    (directory / "roads.geojson").write_text(
        json.dumps({"type": "FeatureCollection", "features": road_features}), encoding="utf-8"
    )
    (directory / "infrastructure.geojson").write_text(
        json.dumps({"type": "FeatureCollection", "features": infra_features}), encoding="utf-8"
    )
    return directory


def build_privacy_fixture(
    n_users: int = 20,
    trajs_per_user: int = 20,
    seed: int = 11,
    user_spacing_m: float = 15000.0,
    slot_spacing_m: float = 1500.0,
    loop_radius_m: float = 80.0,
    jitter_m: float = 10.0,
    user_prefix: str = "user",
    varied_lengths: bool = False,
) -> Dataset:
    """Well-separated users; each trajectory loops around a distinct slot of
    the user's sub-lattice, so records are duplicate-free with a known
    minimum inter-record distance.

    Lengths are uniform (12 visits) unless ``varied_lengths`` spreads them
    over 8..16; uniform lengths keep nearest-record distances concentrated at
    the slot spacing, which threshold-transfer tests rely on.
    """
    rng = np.random.default_rng(seed)
    trajectories = []
    for u in range(n_users):
        cx = (u % 5) * user_spacing_m
        cy = (u // 5) * user_spacing_m
        for k in range(trajs_per_user):
            sx = cx + (k % 5) * slot_spacing_m - 2 * slot_spacing_m
            sy = cy + (k // 5) * slot_spacing_m - 2 * slot_spacing_m
            length = 8 + (k % 9) if varied_lengths else 12
            phase = float(rng.uniform(0, 2 * math.pi))
            points = []
            for t in range(length):
                theta = phase + 2 * math.pi * t / length
                x = sx + loop_radius_m * math.cos(theta) + float(rng.normal(0, jitter_m))
                y = sy + loop_radius_m * math.sin(theta) + float(rng.normal(0, jitter_m))
                points.append(TrajPoint(
                    GeoPoint(x, y), float(t * 300), CATEGORIES[(u + t) % len(CATEGORIES)]
                ))
            trajectories.append(
                Trajectory(f"{user_prefix}{u:02d}-t{k:02d}", f"{user_prefix}{u:02d}", tuple(points))
            )
    return Dataset(tuple(trajectories), name="privacy-fixture", crs="metric", vocabulary=CATEGORIES)


def build_scatter_fixture(
    n_records: int = 400,
    region_m: float = 60000.0,
    loop_radius_m: float = 80.0,
    length: int = 12,
    seed: int = 31,
    user_prefix: str = "scat",
) -> Dataset:
    """Loops at uniformly random centers, one user per record.

    Record placement is independent across records, so per-target attack
    scores are iid and binomial confidence intervals apply.
    """
    rng = np.random.default_rng(seed)
    trajectories = []
    for i in range(n_records):
        cx = float(rng.uniform(0, region_m))
        cy = float(rng.uniform(0, region_m))
        phase = float(rng.uniform(0, 2 * math.pi))
        points = []
        for t in range(length):
            theta = phase + 2 * math.pi * t / length
            x = cx + loop_radius_m * math.cos(theta)
            y = cy + loop_radius_m * math.sin(theta)
            points.append(TrajPoint(
                GeoPoint(x, y), float(t * 300), CATEGORIES[t % len(CATEGORIES)]
            ))
        trajectories.append(
            Trajectory(f"{user_prefix}-{i:04d}", f"{user_prefix}u-{i:04d}", tuple(points))
        )
    return Dataset(tuple(trajectories), name="scatter-fixture", crs="metric", vocabulary=CATEGORIES)


def build_comb_fixture(
    n_records: int = 512,
    n_teeth: int = 12,
    tooth_spacing_m: float = 1000.0,
    height_m: float = 500.0,
    code_offset: int = 1,
    user_prefix: str = "comb",
) -> Dataset:
    """Records whose tooth heights encode unique binary codes.

    Any two distinct records sit at Frechet distance exactly ``height_m``
    (tooth spacing dominates every off-diagonal coupling), so nearest-record
    distances do not depend on how many candidates are released. That makes
    the fixture suitable for threshold attacks whose auxiliary candidate set
    is much smaller than the released set.
    """
    if code_offset + n_records > 2 ** n_teeth:
        raise ValueError("not enough distinct codes for the requested records")
    if height_m * 2 > tooth_spacing_m:
        raise ValueError("teeth must be farther apart than twice the height")
    trajectories = []
    for i in range(n_records):
        code = format(code_offset + i, f"0{n_teeth}b")
        points = tuple(
            TrajPoint(
                GeoPoint(k * tooth_spacing_m, height_m * int(bit)),
                float(k * 300),
                CATEGORIES[int(bit)],
            )
            for k, bit in enumerate(code)
        )
        trajectories.append(
            Trajectory(f"{user_prefix}-{i:04d}", f"{user_prefix}u-{i:04d}", tuple(points))
        )
    return Dataset(tuple(trajectories), name="comb-fixture", crs="metric", vocabulary=CATEGORIES)
