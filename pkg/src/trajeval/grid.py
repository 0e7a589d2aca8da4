"""Absolute uniform spatial grid: discretization, cell-size selection, stability sweeps."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import Dataset


class CellId(NamedTuple):
    col: int
    row: int


@dataclass(frozen=True)
class GridSpec:
    """Uniform square grid anchored at the global origin, with a phase offset.

    Offsets are normalized into [0, cell_edge_m) — every lattice alignment has
    a unique representative.
    """

    cell_edge_m: float
    origin_offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if not self.cell_edge_m > 0:
            raise ValueError("cell_edge_m must be positive")
        dx, dy = self.origin_offset
        object.__setattr__(self, "origin_offset", (dx % self.cell_edge_m, dy % self.cell_edge_m))


@dataclass
class DiscretizedTrajectory:
    traj_id: str
    user_id: str
    cells: tuple[CellId, ...]
    timestamps: np.ndarray
    categories: tuple[str | None, ...] | None = None

    def __len__(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class GridDiagnostics:
    unique_transition_fraction: float
    self_transition_fraction: float
    occupancy_ratio: float


def cell_indices(xy: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(N, 2) integer cell coordinates: floor((coord - offset) / edge) per axis."""
    dx, dy = grid.origin_offset
    shifted = np.asarray(xy, dtype=float) - np.array([dx, dy])
    return np.floor(shifted / grid.cell_edge_m).astype(np.int64)


def cell_of(x: float, y: float, grid: GridSpec) -> CellId:
    idx = cell_indices(np.array([[x, y]]), grid)[0]
    return CellId(int(idx[0]), int(idx[1]))


def cell_centroid(cell: CellId, grid: GridSpec) -> tuple[float, float]:
    dx, dy = grid.origin_offset
    e = grid.cell_edge_m
    return (dx + (cell.col + 0.5) * e, dy + (cell.row + 0.5) * e)


def discretize(dataset: Dataset, grid: GridSpec) -> list[DiscretizedTrajectory]:
    """Map every visit to its containing cell; categories/timestamps carried through."""
    out = []
    for t in dataset:
        idx = cell_indices(t.xy, grid)
        cells = tuple(CellId(int(c), int(r)) for c, r in idx)
        cats = t.categories if any(c is not None for c in t.categories) else None
        out.append(DiscretizedTrajectory(t.traj_id, t.user_id, cells, t.timestamps, cats))
    return out


def grid_diagnostics(discretized: Sequence[DiscretizedTrajectory]) -> GridDiagnostics:
    """Unique-transition, self-transition and occupancy ratios of a discretized dataset."""
    if not discretized:
        raise ValueError("empty discretized dataset")
    transitions: list[tuple[CellId, CellId]] = []
    visited: set[CellId] = set()
    for dt in discretized:
        visited.update(dt.cells)
        transitions.extend(zip(dt.cells, dt.cells[1:]))
    if not transitions:
        raise ValueError("no transitions: all trajectories have length 1")
    n = len(transitions)
    unique_frac = len(set(transitions)) / n
    self_frac = sum(1 for a, b in transitions if a == b) / n
    cols = [c.col for c in visited]
    rows = [c.row for c in visited]
    bbox_cells = (max(cols) - min(cols) + 1) * (max(rows) - min(rows) + 1)
    return GridDiagnostics(
        unique_transition_fraction=unique_frac,
        self_transition_fraction=self_frac,
        occupancy_ratio=len(visited) / bbox_cells,
    )


# ---------------------------------------------------------------------------
# data-driven cell-size selection
# ---------------------------------------------------------------------------

def segment_lengths(dataset: Dataset) -> np.ndarray:
    """Pooled consecutive-point distances in meters."""
    segs = [
        np.linalg.norm(np.diff(t.xy, axis=0), axis=1)
        for t in dataset
        if len(t) >= 2
    ]
    if not segs:
        raise ValueError("dataset has no multi-point trajectories")
    return np.concatenate(segs)


def _elbow(xs: np.ndarray, ys: np.ndarray) -> float:
    """x of the point farthest from the chord between curve endpoints (axes normalized)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    xn = (xs - xs[0]) / (xs[-1] - xs[0]) if xs[-1] != xs[0] else np.zeros_like(xs)
    span = ys.max() - ys.min()
    yn = (ys - ys.min()) / span if span > 0 else np.zeros_like(ys)
    x0, y0 = xn[0], yn[0]
    x1, y1 = xn[-1], yn[-1]
    # distance from the chord through (x0,y0)-(x1,y1)
    num = np.abs((y1 - y0) * xn - (x1 - x0) * yn + x1 * y0 - y1 * x0)
    return float(xs[int(np.argmax(num))])


@dataclass(frozen=True)
class CellSizeSelection:
    edge_m: float
    candidates: tuple[float, ...]
    elbows: dict  # diagnostic name -> elbow edge
    curves: dict  # diagnostic name -> tuple of values over candidates


def cell_size_selection(dataset: Dataset, step_m: float = 50.0) -> CellSizeSelection:
    """Sweep candidate edges over [P10, P50] of segment lengths and pick a consensus.

    Each diagnostic curve gets an independent elbow (max distance from the
    endpoint chord); the selected edge is the mean of the three elbows.
    """
    seg = segment_lengths(dataset)
    p10, p50 = float(np.percentile(seg, 10)), float(np.percentile(seg, 50))
    if p50 - p10 < 1e-9:
        warnings.warn("degenerate segment-length distribution; returning P10")
        return CellSizeSelection(p10, (p10,), {}, {})
    candidates = np.arange(p10, p50 + 1e-9, step_m)
    if candidates.size < 4:
        candidates = np.linspace(p10, p50, 9)

    names = ("unique_transition_fraction", "self_transition_fraction", "occupancy_ratio")
    curves: dict[str, list[float]] = {n: [] for n in names}
    for edge in candidates:
        diag = grid_diagnostics(discretize(dataset, GridSpec(float(edge))))
        for n in names:
            curves[n].append(getattr(diag, n))
    elbows = {n: _elbow(candidates, np.array(curves[n])) for n in names}
    edge = float(np.mean(list(elbows.values())))
    return CellSizeSelection(
        edge_m=edge,
        candidates=tuple(float(c) for c in candidates),
        elbows=elbows,
        curves={n: tuple(v) for n, v in curves.items()},
    )


def select_cell_size(dataset: Dataset, step_m: float = 50.0) -> float:
    return cell_size_selection(dataset, step_m=step_m).edge_m


# ---------------------------------------------------------------------------
# grid stability sweep
# ---------------------------------------------------------------------------

DEFAULT_SWEEP_EDGES = tuple(float(e) for e in range(100, 1001, 50))

#: metric ids the sweep knows how to recompute per grid configuration
SWEEPABLE_METRICS = (
    "i_rank",
    "g_rank",
    "transition_probabilities",
    "global_flow_prediction",
    "category_location_match",
)


@dataclass(frozen=True)
class SweepCell:
    metric: str
    edge_m: float
    offset: tuple[float, float]
    value: float | None
    error: str | None = None


@dataclass(frozen=True)
class SweepSummary:
    metric: str
    edge_m: float
    mean: float | None
    std: float | None
    n_offsets: int


def stability_sweep(
    real: Dataset,
    syn: Dataset,
    metrics: Sequence[str],
    edges: Sequence[float] = DEFAULT_SWEEP_EDGES,
    phase_steps: int = 3,
) -> list[SweepCell]:
    """Recompute grid-based metrics over edge sizes and lattice phase shifts.

    Offsets form a phase_steps x phase_steps regular sample of the alignment
    equivalence class. Per-metric failures become empty cells, not aborts.
    """
    from . import metrics as _metrics  # deferred: metrics depends on this module

    for m in metrics:
        if m not in SWEEPABLE_METRICS:
            raise ValueError(f"metric {m!r} is not grid-based; sweepable: {SWEEPABLE_METRICS}")

    cells: list[SweepCell] = []
    for edge in edges:
        for i in range(phase_steps):
            for j in range(phase_steps):
                offset = (i * edge / phase_steps, j * edge / phase_steps)
                grid = GridSpec(float(edge), offset)
                real_dt = discretize(real, grid)
                syn_dt = discretize(syn, grid)
                for m in metrics:
                    try:
                        result = _metrics.evaluate_grid_metric(m, real_dt, syn_dt, grid)
                        cells.append(SweepCell(m, float(edge), offset, result.value))
                    except Exception as exc:  # propagate as a missing table cell
                        cells.append(SweepCell(m, float(edge), offset, None, error=str(exc)))
    return cells


def sweep_summary(cells: Sequence[SweepCell]) -> list[SweepSummary]:
    """Aggregate sweep cells to mean/std per (metric, edge)."""
    grouped: dict[tuple[str, float], list[float]] = {}
    counts: dict[tuple[str, float], int] = {}
    order: list[tuple[str, float]] = []
    for c in cells:
        key = (c.metric, c.edge_m)
        if key not in counts:
            counts[key] = 0
            grouped[key] = []
            order.append(key)
        counts[key] += 1
        if c.value is not None:
            grouped[key].append(c.value)
    out = []
    for key in order:
        vals = grouped[key]
        if vals:
            out.append(SweepSummary(key[0], key[1], float(np.mean(vals)), float(np.std(vals)), counts[key]))
        else:
            out.append(SweepSummary(key[0], key[1], None, None, counts[key]))
    return out
