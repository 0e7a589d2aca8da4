"""Trajectory data model: ingestion, splitting, masking and statistical profiling."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import cached_property
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

EARTH_RADIUS_M = 6_371_008.8

#: canonical CSV roles -> default column names
CSV_ROLES = ("user_id", "traj_id", "timestamp", "lat", "lon", "category")


class IngestError(ValueError):
    """A dataset file could not be parsed or failed validation."""


@dataclass(frozen=True)
class GeoPoint:
    """Planar position in meters (projected CRS), optionally keeping source lat/lon."""

    x: float
    y: float
    lat: float | None = None
    lon: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if self.lat is not None:
            object.__setattr__(self, "lat", float(self.lat))
        if self.lon is not None:
            object.__setattr__(self, "lon", float(self.lon))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")


@dataclass(frozen=True)
class TrajPoint:
    point: GeoPoint
    timestamp: float
    category: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "timestamp", float(self.timestamp))
        if not math.isfinite(self.timestamp):
            raise ValueError(f"non-finite timestamp {self.timestamp}")


@dataclass(eq=True)
class Trajectory:
    """Chronologically ordered visit sequence of one user.

    Treated as immutable after construction; the cached coordinate arrays
    assume points are never reassigned.
    """

    traj_id: str
    user_id: str
    points: tuple[TrajPoint, ...]

    def __post_init__(self) -> None:
        self.points = tuple(self.points)
        if not self.points:
            raise ValueError(f"trajectory {self.traj_id!r} is empty")
        ts = [p.timestamp for p in self.points]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError(f"trajectory {self.traj_id!r} has decreasing timestamps")

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def xy(self) -> np.ndarray:
        """(L, 2) array of planar coordinates in meters."""
        return np.array([[p.point.x, p.point.y] for p in self.points], dtype=float)

    @cached_property
    def timestamps(self) -> np.ndarray:
        return np.array([p.timestamp for p in self.points], dtype=float)

    @property
    def categories(self) -> tuple[str | None, ...]:
        return tuple(p.category for p in self.points)


@dataclass(eq=True)
class Dataset:
    """Immutable collection of trajectories plus projection/vocabulary metadata."""

    trajectories: tuple[Trajectory, ...]
    name: str = ""
    crs: str = "metric"
    vocabulary: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        self.trajectories = tuple(self.trajectories)
        seen: set[str] = set()
        for t in self.trajectories:
            if t.traj_id in seen:
                raise ValueError(f"duplicate traj_id {t.traj_id!r}")
            seen.add(t.traj_id)
        if self.vocabulary is not None:
            vocab = tuple(self.vocabulary)
            if len(set(vocab)) != len(vocab):
                raise ValueError("vocabulary labels must be unique")
            self.vocabulary = vocab

    @cached_property
    def users(self) -> frozenset[str]:
        return frozenset(t.user_id for t in self.trajectories)

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.trajectories)

    def replace_trajectories(self, trajectories: Sequence[Trajectory], name: str | None = None) -> "Dataset":
        return Dataset(
            trajectories=tuple(trajectories),
            name=self.name if name is None else name,
            crs=self.crs,
            vocabulary=self.vocabulary,
        )


@dataclass(frozen=True)
class SplitSpec:
    """Trajectory-level split description.

    With ``ensure_user_coverage`` every user keeps at least one trajectory in
    the first part, and single-trajectory users appear only there.
    """

    fractions: tuple[float, ...]
    ensure_user_coverage: bool = False

    def __post_init__(self) -> None:
        if len(self.fractions) < 2:
            raise ValueError("need at least two parts")
        if any(f <= 0 for f in self.fractions):
            raise ValueError("fractions must be positive")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("fractions must sum to 1")


@dataclass(frozen=True)
class DatasetProfile:
    """Headline descriptors of a trajectory dataset (sampling, size, movement)."""

    mean_sampling_interval_min: float
    cv_sampling_interval: float
    gap_fraction: float
    n_traj: int
    median_length: float
    p95_length: float
    mean_traveled_km: float
    mean_displacement_km: float

    FIELDS = (
        "mean_sampling_interval_min",
        "cv_sampling_interval",
        "gap_fraction",
        "n_traj",
        "median_length",
        "p95_length",
        "mean_traveled_km",
        "mean_displacement_km",
    )


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

def project_aeqd(lat: np.ndarray, lon: np.ndarray, lat0: float, lon0: float) -> tuple[np.ndarray, np.ndarray]:
    """Azimuthal-equidistant forward projection about (lat0, lon0), in meters."""
    phi = np.radians(np.asarray(lat, dtype=float))
    lam = np.radians(np.asarray(lon, dtype=float))
    phi0 = math.radians(lat0)
    lam0 = math.radians(lon0)
    cos_c = np.sin(phi0) * np.sin(phi) + np.cos(phi0) * np.cos(phi) * np.cos(lam - lam0)
    c = np.arccos(np.clip(cos_c, -1.0, 1.0))
    # k = c/sin(c) -> 1 at the projection center
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(c > 1e-12, c / np.sin(np.where(c > 1e-12, c, 1.0)), 1.0)
    x = EARTH_RADIUS_M * k * np.cos(phi) * np.sin(lam - lam0)
    y = EARTH_RADIUS_M * k * (np.cos(phi0) * np.sin(phi) - np.sin(phi0) * np.cos(phi) * np.cos(lam - lam0))
    return x, y


def parse_crs(crs: str) -> tuple[str, float | None, float | None]:
    """Split a CRS spec into (kind, lat0, lon0); kind is 'metric' or 'aeqd'."""
    if crs == "metric":
        return "metric", None, None
    if crs == "aeqd:auto":
        return "aeqd", None, None
    if crs.startswith("aeqd:"):
        try:
            lat0_s, lon0_s = crs[len("aeqd:"):].split(",")
            return "aeqd", float(lat0_s), float(lon0_s)
        except ValueError as exc:
            raise ValueError(f"bad CRS spec {crs!r}") from exc
    raise ValueError(f"unknown CRS spec {crs!r}")


# ---------------------------------------------------------------------------
# ingestion / serialization
# ---------------------------------------------------------------------------

def _parse_timestamp(raw: str) -> float:
    """Seconds since epoch from either a number or an ISO-8601 string."""
    try:
        return float(raw)
    except ValueError:
        pass
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def ingest_csv(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    crs: str | None = None,
    vocabulary: Sequence[str] | None = None,
    min_length: int | None = None,
    name: str | None = None,
) -> Dataset:
    """Read a trajectory CSV into a projected :class:`Dataset`.

    ``schema`` maps canonical roles (user_id, traj_id, timestamp, lat, lon,
    category) to the file's column names. Timestamps are auto-detected as
    numeric seconds or ISO-8601. A ``<file>.meta.json`` sidecar, when present,
    supplies defaults for crs, vocabulary and name.

    ``min_length`` optionally drops trajectories shorter than the given number
    of visits after grouping.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"dataset file not found: {path}")

    sidecar = _sidecar_path(path)
    meta: dict = {}
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    if crs is None:
        crs = meta.get("crs", "aeqd:auto")
    if vocabulary is None and meta.get("vocabulary") is not None:
        vocabulary = tuple(meta["vocabulary"])
    if name is None:
        name = meta.get("name", path.stem)

    cols = {role: role for role in CSV_ROLES}
    if schema:
        cols.update(schema)

    kind, lat0, lon0 = parse_crs(crs)

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = ("user_id", "traj_id", "timestamp", "lat", "lon")
        for role in required:
            if cols[role] not in header:
                raise IngestError(f"missing column {cols[role]!r} (role {role})")
        has_category = cols["category"] in header

        rows: list[tuple[str, str, float, float, float, str | None]] = []
        for line_no, row in enumerate(reader, start=2):
            try:
                user = row[cols["user_id"]].strip()
                tid = row[cols["traj_id"]].strip()
                ts = _parse_timestamp(row[cols["timestamp"]])
                lat = float(row[cols["lat"]])
                lon = float(row[cols["lon"]])
            except (KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"{path.name}:{line_no}: unparsable row ({exc})") from exc
            cat: str | None = None
            if has_category:
                raw_cat = (row.get(cols["category"]) or "").strip()
                cat = raw_cat or None
            if not user or not tid:
                raise IngestError(f"{path.name}:{line_no}: empty user_id or traj_id")
            rows.append((user, tid, ts, lat, lon, cat))

    if not rows:
        raise IngestError(f"{path.name}: no data rows")

    if vocabulary is not None:
        vocab_set = set(vocabulary)
        for i, r in enumerate(rows):
            if r[5] is not None and r[5] not in vocab_set:
                raise IngestError(f"{path.name}: unknown category label {r[5]!r} (row {i + 2})")
        vocab: tuple[str, ...] | None = tuple(vocabulary)
    else:
        labels = sorted({r[5] for r in rows if r[5] is not None})
        vocab = tuple(labels) if labels else None

    lats = np.array([r[3] for r in rows])
    lons = np.array([r[4] for r in rows])
    if kind == "aeqd":
        if lat0 is None:
            lat0 = float(np.mean(lats))
            lon0 = float(np.mean(lons))
        crs_resolved = f"aeqd:{lat0!r},{lon0!r}"
        xs, ys = project_aeqd(lats, lons, lat0, lon0)
        points = [
            TrajPoint(GeoPoint(float(x), float(y), lat=r[3], lon=r[4]), r[2], r[5])
            for x, y, r in zip(xs, ys, rows)
        ]
    else:
        crs_resolved = "metric"
        points = [TrajPoint(GeoPoint(r[4], r[3]), r[2], r[5]) for r in rows]

    grouped: dict[str, list[tuple[float, TrajPoint]]] = {}
    traj_user: dict[str, str] = {}
    order: list[str] = []
    for r, pt in zip(rows, points):
        user, tid = r[0], r[1]
        if tid not in traj_user:
            traj_user[tid] = user
            grouped[tid] = []
            order.append(tid)
        elif traj_user[tid] != user:
            raise IngestError(f"{path.name}: traj_id {tid!r} appears under two users")
        grouped[tid].append((pt.timestamp, pt))

    trajectories = []
    for tid in order:
        pts = [p for _, p in sorted(grouped[tid], key=lambda item: item[0])]
        if min_length is not None and len(pts) < min_length:
            continue
        trajectories.append(Trajectory(tid, traj_user[tid], tuple(pts)))
    if not trajectories:
        raise IngestError(f"{path.name}: no trajectories left after filtering")

    return Dataset(tuple(trajectories), name=name, crs=crs_resolved, vocabulary=vocab)


def write_csv(dataset: Dataset, path: str | Path) -> None:
    """Serialize a dataset to CSV plus a JSON metadata sidecar.

    Re-ingesting the written pair reproduces the dataset exactly: source
    lat/lon are written when present, otherwise the metric coordinates go to
    the lon/lat columns under ``crs == "metric"``.
    """
    path = Path(path)
    has_cat = any(p.category is not None for t in dataset for p in t.points)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["user_id", "traj_id", "timestamp", "lat", "lon"]
        if has_cat:
            header.append("category")
        writer.writerow(header)
        for t in dataset:
            for p in t.points:
                lat = p.point.lat if p.point.lat is not None else p.point.y
                lon = p.point.lon if p.point.lon is not None else p.point.x
                row = [t.user_id, t.traj_id, repr(p.timestamp), repr(lat), repr(lon)]
                if has_cat:
                    row.append(p.category or "")
                writer.writerow(row)
    meta = {
        "name": dataset.name,
        "crs": dataset.crs,
        "vocabulary": list(dataset.vocabulary) if dataset.vocabulary else None,
    }
    _sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# splitting / masking
# ---------------------------------------------------------------------------

def _part_sizes(n: int, fractions: Sequence[float]) -> list[int]:
    bounds = [int(round(sum(fractions[: i + 1]) * n)) for i in range(len(fractions))]
    bounds[-1] = n
    sizes = [bounds[0]] + [bounds[i] - bounds[i - 1] for i in range(1, len(bounds))]
    if any(s <= 0 for s in sizes):
        raise ValueError(f"fractions {tuple(fractions)} infeasible for {n} trajectories")
    return sizes


def split_dataset(dataset: Dataset, spec: SplitSpec, seed: int) -> list[Dataset]:
    """Partition trajectories into parts by the spec's fractions.

    The result is a true partition (disjoint, exhaustive) and deterministic in
    the seed. Under user coverage, one seeded trajectory per user is pinned to
    the first part before the remainder is distributed.
    """
    n = len(dataset)
    sizes = _part_sizes(n, spec.fractions)
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(n))

    assignment = np.full(n, -1, dtype=int)
    if spec.ensure_user_coverage:
        pinned: set[str] = set()
        pinned_idx: list[int] = []
        for idx in order:
            user = dataset.trajectories[idx].user_id
            if user not in pinned:
                pinned.add(user)
                pinned_idx.append(idx)
        if len(pinned_idx) > sizes[0]:
            raise ValueError(
                f"user coverage infeasible: {len(pinned_idx)} users exceed first-part size {sizes[0]}"
            )
        for idx in pinned_idx:
            assignment[idx] = 0
        remaining = [idx for idx in order if assignment[idx] < 0]
        quotas = list(sizes)
        quotas[0] -= len(pinned_idx)
    else:
        remaining = order
        quotas = list(sizes)

    part = 0
    for idx in remaining:
        while quotas[part] == 0:
            part += 1
        assignment[idx] = part
        quotas[part] -= 1

    parts = []
    for k in range(len(spec.fractions)):
        trajs = [t for i, t in enumerate(dataset.trajectories) if assignment[i] == k]
        parts.append(dataset.replace_trajectories(trajs, name=f"{dataset.name}#part{k}"))
    return parts


def mask_trajectory(trajectory: Trajectory, keep_fraction: float, seed: int) -> Trajectory:
    """Keep ceil(keep_fraction * |T|) visits, uniformly sampled, order preserved."""
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must be in (0, 1]")
    n = len(trajectory)
    k = math.ceil(keep_fraction * n)
    if k >= n:
        return Trajectory(trajectory.traj_id, trajectory.user_id, trajectory.points)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=k, replace=False))
    return Trajectory(
        trajectory.traj_id,
        trajectory.user_id,
        tuple(trajectory.points[i] for i in idx),
    )


def mask_size_preimage(masked_len: int, keep_fraction: float, max_len: int) -> set[int]:
    """Original lengths whose mask of the given fraction has ``masked_len`` visits."""
    return {
        n for n in range(1, max_len + 1)
        if math.ceil(keep_fraction * n) == masked_len
    }


# ---------------------------------------------------------------------------
# profiling
# ---------------------------------------------------------------------------

def profile_dataset(dataset: Dataset) -> DatasetProfile:
    """Compute sampling/size/movement descriptors of a dataset.

    Sampling intervals pool all consecutive within-trajectory gaps; the gap
    fraction counts intervals above ten times the median interval. Length-1
    trajectories contribute no intervals.
    """
    if len(dataset) == 0:
        raise ValueError("cannot profile an empty dataset")

    intervals_s: list[np.ndarray] = []
    segment_m: list[np.ndarray] = []
    traveled_m: list[float] = []
    lengths = []
    for t in dataset:
        lengths.append(len(t))
        if len(t) >= 2:
            intervals_s.append(np.diff(t.timestamps))
            seg = np.linalg.norm(np.diff(t.xy, axis=0), axis=1)
            segment_m.append(seg)
            traveled_m.append(float(seg.sum()))
        else:
            traveled_m.append(0.0)

    if intervals_s:
        dt_min = np.concatenate(intervals_s) / 60.0
        mu_dt = float(dt_min.mean())
        cv_dt = float(dt_min.std() / mu_dt) if mu_dt > 0 else 0.0
        tau_gap = 10.0 * float(np.median(dt_min))
        gap_fraction = float(np.mean(dt_min > tau_gap))
    else:
        mu_dt = cv_dt = gap_fraction = 0.0

    segments = np.concatenate(segment_m) if segment_m else np.zeros(0)
    return DatasetProfile(
        mean_sampling_interval_min=mu_dt,
        cv_sampling_interval=cv_dt,
        gap_fraction=gap_fraction,
        n_traj=len(dataset),
        median_length=float(np.median(lengths)),
        p95_length=float(np.percentile(lengths, 95)),
        mean_traveled_km=float(np.mean(traveled_m) / 1000.0),
        mean_displacement_km=float(segments.mean() / 1000.0) if segments.size else 0.0,
    )
