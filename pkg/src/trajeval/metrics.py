"""Concrete utility metrics over trajectory datasets.

Every cross-dataset comparison here is distribution-level: relational
statistics are computed within each dataset independently and only the
resulting distributions are compared (never record-to-record proximity
between real and synthetic data).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Dataset, GeoPoint
from .grid import CellId, DiscretizedTrajectory, GridSpec
from .layers import (
    ConstraintLayers,
    geometry_segments,
    point_in_polygon,
    points_to_segments_distance,
    polyline_segments,
    shortest_path_nodes,
)
from .measures import (
    EmpiricalDistribution,
    GroundCostMatrix,
    RankVector,
    cell_centroids_m,
    cosine_distance,
    hausdorff,
    kendall_tau_b,
    rank_by_frequency,
    wasserstein1_ground_cost,
    wasserstein1_scalar,
)

GPS_TOLERANCE_M = 30.0


@dataclass
class MetricResult:
    """One evaluated metric with its taxonomy cell and direction annotation."""

    metric_id: str
    level: str    # trajectory | point
    notion: str   # marginal_stats | relational_stats | realism | task
    statistic: str
    direction: str  # "lower" | "higher" is better
    value: float | None
    detail: dict = field(default_factory=dict)
    error: str | None = None

    def __post_init__(self) -> None:
        if self.level not in ("trajectory", "point"):
            raise ValueError(f"bad taxonomy level {self.level!r}")
        if self.notion not in ("marginal_stats", "relational_stats", "realism", "task"):
            raise ValueError(f"bad taxonomy notion {self.notion!r}")


# ---------------------------------------------------------------------------
# transition matrix
# ---------------------------------------------------------------------------

@dataclass
class TransitionMatrix:
    """Row-stochastic first-order mobility kernel pooled over all trajectories."""

    states: tuple[CellId, ...]
    rows: dict[int, tuple[np.ndarray, np.ndarray]]  # origin index -> (dest indices, probs)
    visit_counts: np.ndarray  # outgoing-transition counts per state
    grid: GridSpec

    def index(self) -> dict[CellId, int]:
        return {s: i for i, s in enumerate(self.states)}

    def row_of(self, cell: CellId) -> tuple[np.ndarray, np.ndarray] | None:
        idx = self.index().get(cell)
        if idx is None:
            return None
        return self.rows.get(idx)


def build_transition_matrix(
    discretized: Sequence[DiscretizedTrajectory], grid: GridSpec
) -> TransitionMatrix:
    counts: Counter[tuple[CellId, CellId]] = Counter()
    cells: set[CellId] = set()
    for dt in discretized:
        cells.update(dt.cells)
        counts.update(zip(dt.cells, dt.cells[1:]))
    if not counts:
        raise ValueError("no transitions observed: cannot build a transition matrix")
    states = tuple(sorted(cells))
    index = {s: i for i, s in enumerate(states)}
    by_origin: dict[int, Counter[int]] = {}
    for (a, b), c in counts.items():
        by_origin.setdefault(index[a], Counter())[index[b]] += c
    visit_counts = np.zeros(len(states))
    rows: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for i, dests in by_origin.items():
        total = sum(dests.values())
        visit_counts[i] = total
        dest_idx = np.array(sorted(dests.keys()), dtype=int)
        probs = np.array([dests[j] for j in dest_idx], dtype=float) / total
        rows[i] = (dest_idx, probs)
    return TransitionMatrix(states, rows, visit_counts, grid)


def states_ground_cost(states: Sequence[CellId], edge_m: float) -> GroundCostMatrix:
    """Normalized centroid-distance costs over a full state list."""
    pts = cell_centroids_m(states, edge_m)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    d_max = float(d.max())
    if d_max == 0.0:
        return GroundCostMatrix(np.zeros_like(d), 0.0)
    return GroundCostMatrix(d / d_max, d_max)


def transition_probability_metric(
    real_tm: TransitionMatrix,
    syn_tm: TransitionMatrix,
    cost: GroundCostMatrix | None = None,
) -> MetricResult:
    """Visitation-weighted per-origin W1 between the two kernels, in [0, 1].

    Real origins with no synthetic outgoing mass take the maximal penalty 1;
    synthetic-only origins carry zero weight and are ignored. ``cost``, when
    given, must be indexed by the sorted union of both state lists.
    """
    if real_tm.grid != syn_tm.grid:
        raise ValueError("transition matrices use different grids")
    if not real_tm.rows:
        raise ValueError("real transition matrix has no transitions")
    union = tuple(sorted(set(real_tm.states) | set(syn_tm.states)))
    if cost is None:
        cost = states_ground_cost(union, real_tm.grid.cell_edge_m)
    if cost.costs.shape != (len(union), len(union)):
        raise ValueError("cost matrix must cover the union state space")
    uidx = {s: i for i, s in enumerate(union)}
    real_map = np.array([uidx[s] for s in real_tm.states], dtype=int)
    syn_map = np.array([uidx[s] for s in syn_tm.states], dtype=int)
    syn_index = {s: i for i, s in enumerate(syn_tm.states)}

    total_visits = real_tm.visit_counts.sum()
    value = 0.0
    penalized = 0
    for i, (dest_idx, probs) in real_tm.rows.items():
        pi = real_tm.visit_counts[i] / total_visits
        origin = real_tm.states[i]
        syn_i = syn_index.get(origin)
        syn_row = syn_tm.rows.get(syn_i) if syn_i is not None else None
        if syn_row is None:
            value += pi * 1.0
            penalized += 1
            continue
        sdest_idx, sprobs = syn_row
        sub = cost.costs[np.ix_(real_map[dest_idx], syn_map[sdest_idx])]
        mu = EmpiricalDistribution(tuple(real_tm.states[j] for j in dest_idx), probs)
        nu = EmpiricalDistribution(tuple(syn_tm.states[j] for j in sdest_idx), sprobs)
        value += pi * wasserstein1_ground_cost(mu, nu, GroundCostMatrix(sub, cost.d_max))
    return MetricResult(
        "transition_probabilities", "point", "relational_stats", "W1", "lower",
        float(value), detail={"penalized_origins": penalized, "real_origins": len(real_tm.rows)},
    )


# ---------------------------------------------------------------------------
# rank statistics
# ---------------------------------------------------------------------------

def _user_cell_counts(discretized: Sequence[DiscretizedTrajectory]) -> dict[str, Counter]:
    per_user: dict[str, Counter] = {}
    for dt in discretized:
        per_user.setdefault(dt.user_id, Counter()).update(dt.cells)
    return per_user


def _irank_scores(discretized: Sequence[DiscretizedTrajectory]) -> tuple[list[float], int]:
    """Per-user (1 - tau_b(frequency rank, index rank)) / 2 scores."""
    per_user = _user_cell_counts(discretized)
    scores: list[float] = []
    excluded = 0
    for user in sorted(per_user):
        counts = per_user[user]
        if len(counts) < 2:
            excluded += 1
            continue
        freq_rank = rank_by_frequency(counts)
        ordered = sorted(counts.keys())
        ref_rank = RankVector(tuple(ordered), np.arange(1, len(ordered) + 1))
        try:
            tau = kendall_tau_b(freq_rank, ref_rank)
        except ValueError:
            excluded += 1
            continue
        scores.append((1.0 - tau) / 2.0)
    return scores, excluded


def i_rank_metric(
    real_dt: Sequence[DiscretizedTrajectory], syn_dt: Sequence[DiscretizedTrajectory]
) -> MetricResult:
    """W1 between the per-user location-rank concordance scores of both datasets."""
    real_scores, real_excluded = _irank_scores(real_dt)
    syn_scores, syn_excluded = _irank_scores(syn_dt)
    if not real_scores or not syn_scores:
        raise ValueError("i-rank undefined: no user with a usable rank vector")
    value = wasserstein1_scalar(
        EmpiricalDistribution.from_samples(real_scores),
        EmpiricalDistribution.from_samples(syn_scores),
    )
    return MetricResult(
        "i_rank", "trajectory", "marginal_stats", "W1", "lower", value,
        detail={"excluded_users_real": real_excluded, "excluded_users_syn": syn_excluded},
    )


def g_rank_metric(
    real_dt: Sequence[DiscretizedTrajectory], syn_dt: Sequence[DiscretizedTrajectory]
) -> MetricResult:
    """tau_b between pooled location-popularity rankings of the two datasets."""
    real_counts: Counter = Counter()
    syn_counts: Counter = Counter()
    for dt in real_dt:
        real_counts.update(dt.cells)
    for dt in syn_dt:
        syn_counts.update(dt.cells)
    if not real_counts or not syn_counts:
        raise ValueError("g-rank undefined: empty dataset")
    tau = kendall_tau_b(rank_by_frequency(real_counts), rank_by_frequency(syn_counts))
    return MetricResult("g_rank", "point", "marginal_stats", "tau_b", "higher", tau)


def categorical_g_rank(real: Dataset, syn: Dataset) -> MetricResult:
    """tau_b between category-popularity rankings."""
    def counts(d: Dataset) -> Counter:
        c: Counter = Counter()
        for t in d:
            c.update(cat for cat in t.categories if cat is not None)
        return c

    real_counts = counts(real)
    syn_counts = counts(syn)
    if not real_counts or not syn_counts:
        raise ValueError("categorical g-rank requires category annotations in both datasets")
    tau = kendall_tau_b(rank_by_frequency(real_counts), rank_by_frequency(syn_counts))
    return MetricResult("categorical_g_rank", "point", "marginal_stats", "tau_b", "higher", tau)


# ---------------------------------------------------------------------------
# scalar per-trajectory distributions
# ---------------------------------------------------------------------------

def _per_trajectory_speeds_kmh(d: Dataset) -> tuple[list[float], int]:
    values: list[float] = []
    excluded = 0
    for t in d:
        if len(t) < 2:
            excluded += 1
            continue
        dt_s = np.diff(t.timestamps)
        dist_m = np.linalg.norm(np.diff(t.xy, axis=0), axis=1)
        ok = dt_s > 0
        if not ok.any():
            excluded += 1
            continue
        speeds = dist_m[ok] / dt_s[ok] * 3.6
        values.append(float(speeds.mean()))
    return values, excluded


def average_speed_metric(real: Dataset, syn: Dataset) -> MetricResult:
    """W1 between per-trajectory mean step speeds (km/h)."""
    rv, rx = _per_trajectory_speeds_kmh(real)
    sv, sx = _per_trajectory_speeds_kmh(syn)
    if not rv or not sv:
        raise ValueError("average speed undefined: no trajectory with a positive time step")
    value = wasserstein1_scalar(
        EmpiricalDistribution.from_samples(rv), EmpiricalDistribution.from_samples(sv)
    )
    return MetricResult(
        "average_speed", "trajectory", "marginal_stats", "W1 (km/h)", "lower", value,
        detail={"excluded_real": rx, "excluded_syn": sx},
    )


def traveled_distance_metric(real: Dataset, syn: Dataset) -> MetricResult:
    """W1 between per-trajectory traveled distances (km)."""
    def traveled(d: Dataset) -> list[float]:
        return [
            float(np.linalg.norm(np.diff(t.xy, axis=0), axis=1).sum() / 1000.0)
            for t in d
        ]

    value = wasserstein1_scalar(
        EmpiricalDistribution.from_samples(traveled(real)),
        EmpiricalDistribution.from_samples(traveled(syn)),
    )
    return MetricResult("traveled_distance", "trajectory", "marginal_stats", "W1 (km)", "lower", value)


# ---------------------------------------------------------------------------
# pairwise (intra-dataset) similarity
# ---------------------------------------------------------------------------

def _category_vector(t, vocab: tuple[str, ...]) -> np.ndarray:
    counts = Counter(c for c in t.categories if c is not None)
    return np.array([counts.get(v, 0) for v in vocab], dtype=float)


def _pairwise_values(d: Dataset, kind: str) -> tuple[list[float], int]:
    if kind == "hausdorff":
        xys = [t.xy for t in d]
        vals = [
            hausdorff(xys[i], xys[j]) / 1000.0
            for i in range(len(xys))
            for j in range(i + 1, len(xys))
        ]
        return vals, 0
    if kind == "cosine":
        vocab = d.vocabulary
        if vocab is None:
            raise ValueError("cosine pairwise similarity requires category annotations")
        vecs = []
        excluded = 0
        for t in d:
            v = _category_vector(t, vocab)
            if v.sum() == 0:
                excluded += 1
            else:
                vecs.append(v)
        vals = [
            cosine_distance(vecs[i], vecs[j])
            for i in range(len(vecs))
            for j in range(i + 1, len(vecs))
        ]
        return vals, excluded
    raise ValueError(f"unknown pairwise kind {kind!r}")


def pairwise_similarity_metric(real: Dataset, syn: Dataset, kind: str = "hausdorff") -> MetricResult:
    """W1 between within-dataset pairwise-distance distributions.

    Distances are computed over all trajectory pairs inside each dataset
    separately; no real-to-synthetic record distance is ever taken.
    """
    rv, rx = _pairwise_values(real, kind)
    sv, sx = _pairwise_values(syn, kind)
    if len(rv) < 1 or len(sv) < 1:
        raise ValueError("pairwise similarity needs at least 2 usable trajectories per dataset")
    value = wasserstein1_scalar(
        EmpiricalDistribution.from_samples(rv), EmpiricalDistribution.from_samples(sv)
    )
    stat = "W1 (km)" if kind == "hausdorff" else "W1"
    return MetricResult(
        f"pairwise_{kind}", "trajectory", "relational_stats", stat, "lower", value,
        detail={"excluded_real": rx, "excluded_syn": sx},
    )


# ---------------------------------------------------------------------------
# realism
# ---------------------------------------------------------------------------

def point_violation(p: GeoPoint, layers: ConstraintLayers, delta_m: float = GPS_TOLERANCE_M) -> bool:
    """True iff the point lies in the implausible domain and farther than
    delta_m from any accessible infrastructure."""
    xy = (p.x, p.y)
    if not any(point_in_polygon(xy, rings) for rings in layers.implausible):
        return False
    if not layers.infrastructure:
        return True
    segs = geometry_segments(layers.infrastructure)
    dist = float(points_to_segments_distance(np.array(xy), segs)[0])
    return dist > delta_m


def _violations(d: Dataset, layers: ConstraintLayers, delta_m: float) -> list[np.ndarray]:
    segs = geometry_segments(layers.infrastructure) if layers.infrastructure else None
    per_traj = []
    for t in d:
        inside = np.array(
            [any(point_in_polygon((p.point.x, p.point.y), rings) for rings in layers.implausible)
             for p in t.points],
            dtype=bool,
        )
        if segs is not None and inside.any():
            far = points_to_segments_distance(t.xy, segs) > delta_m
            flags = inside & far
        else:
            flags = inside
        per_traj.append(flags)
    return per_traj


def trajectory_implausibility(
    d: Dataset, layers: ConstraintLayers, delta_m: float = GPS_TOLERANCE_M
) -> MetricResult:
    """Fraction of trajectories with at least one constraint-violating point."""
    flags = _violations(d, layers, delta_m)
    value = float(np.mean([f.any() for f in flags]))
    return MetricResult("trajectory_implausibility", "trajectory", "realism", "ratio", "lower", value)


def location_implausibility(
    d: Dataset, layers: ConstraintLayers, delta_m: float = GPS_TOLERANCE_M
) -> MetricResult:
    """Fraction of all points violating the spatial constraints."""
    flags = np.concatenate(_violations(d, layers, delta_m))
    value = float(flags.mean())
    return MetricResult("location_implausibility", "point", "realism", "ratio", "lower", value)


def _cell_category_counts(discretized: Sequence[DiscretizedTrajectory]) -> dict[CellId, Counter]:
    out: dict[CellId, Counter] = {}
    for dt in discretized:
        if dt.categories is None:
            continue
        for cell, cat in zip(dt.cells, dt.categories):
            if cat is not None:
                out.setdefault(cell, Counter())[cat] += 1
    return out


def _dominant(counter: Counter) -> str:
    # deterministic argmax: highest count, then lexicographic label
    return sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]


def category_location_match(
    real_dt: Sequence[DiscretizedTrajectory],
    syn_dt: Sequence[DiscretizedTrajectory],
    k_min: int = 5,
    dominance: float = 0.5,
) -> MetricResult:
    """Top-1 category agreement over cells that are eligible in the real data.

    A real cell is eligible with at least ``k_min`` categorized observations
    and a dominant-category share of at least ``dominance``. A synthetic cell
    without observations counts as a mismatch.
    """
    real_counts = _cell_category_counts(real_dt)
    syn_counts = _cell_category_counts(syn_dt)
    eligible = []
    for cell, counter in real_counts.items():
        total = sum(counter.values())
        if total >= k_min and max(counter.values()) / total >= dominance:
            eligible.append(cell)
    if not eligible:
        raise ValueError("category-location match undefined: no eligible cells")
    matches = 0
    for cell in eligible:
        syn = syn_counts.get(cell)
        if syn and _dominant(real_counts[cell]) == _dominant(syn):
            matches += 1
    return MetricResult(
        "category_location_match", "point", "realism", "match rate", "higher",
        matches / len(eligible), detail={"eligible_cells": len(eligible)},
    )


def map_reconstruction_metric(real: Dataset, syn: Dataset, layers: ConstraintLayers) -> MetricResult:
    """Mean distance (km) from synthetic points to the road infrastructure
    activated by the real data, with shortest-path imputation between
    consecutive activated edges.

    Averaged per trajectory first, then across the dataset. Disconnected
    transitions are kept as-is (nothing imputed).
    """
    if not layers.road_edges:
        raise ValueError("map reconstruction requires a road graph")

    edge_segments = [polyline_segments(e.coords) for e in layers.road_edges]
    seg_all = np.vstack(edge_segments)
    seg_edge = np.concatenate(
        [np.full(len(s), i, dtype=int) for i, s in enumerate(edge_segments)]
    )

    # nearest activated edge for every real point
    activated: set[int] = set()
    per_traj_edges: list[list[int]] = []
    for t in real:
        d = points_to_segments_distance(t.xy, seg_all)
        # recompute per point to recover the argmin segment
        pts = t.xy
        a = seg_all[:, 0:2]
        ab = seg_all[:, 2:4] - a
        denom = (ab ** 2).sum(axis=1)
        denom_safe = np.where(denom == 0, 1.0, denom)
        tpar = np.clip(((pts[:, None, :] - a[None, :, :]) * ab[None, :, :]).sum(-1) / denom_safe, 0, 1)
        proj = a[None, :, :] + tpar[:, :, None] * ab[None, :, :]
        dmat = np.sqrt(((pts[:, None, :] - proj) ** 2).sum(-1))
        nearest = seg_edge[np.argmin(dmat, axis=1)]
        activated.update(int(e) for e in nearest)
        per_traj_edges.append([int(e) for e in nearest])
        del d

    # shortest-path imputation between consecutive distinct edges
    adjacency = layers.adjacency
    edge_by_pair: dict[tuple[str, str], int] = {}
    for i, e in enumerate(layers.road_edges):
        edge_by_pair.setdefault((e.u, e.v), i)
        edge_by_pair.setdefault((e.v, e.u), i)
    imputed: set[int] = set()
    seen_pairs: set[tuple[int, int]] = set()
    unreachable = 0
    for edges in per_traj_edges:
        for e1, e2 in zip(edges, edges[1:]):
            if e1 == e2 or (e1, e2) in seen_pairs:
                continue
            seen_pairs.add((e1, e2))
            src = layers.road_edges[e1]
            dst = layers.road_edges[e2]
            path = shortest_path_nodes(adjacency, (src.u, src.v), (dst.u, dst.v))
            if path is None:
                unreachable += 1
                continue
            for a_node, b_node in zip(path, path[1:]):
                idx = edge_by_pair.get((a_node, b_node))
                if idx is not None:
                    imputed.add(idx)

    infra_edges = sorted(activated | imputed)
    infra_segs = np.vstack([edge_segments[i] for i in infra_edges])

    traj_means = []
    for t in syn:
        dists = points_to_segments_distance(t.xy, infra_segs)
        traj_means.append(float(dists.mean()))
    return MetricResult(
        "map_reconstruction", "trajectory", "realism", "mean (km)", "lower",
        float(np.mean(traj_means) / 1000.0),
        detail={
            "activated_edges": len(activated),
            "imputed_edges": len(imputed - activated),
            "unreachable_transitions": unreachable,
        },
    )


# ---------------------------------------------------------------------------
# task performance
# ---------------------------------------------------------------------------

def _top_k_candidates(tm: TransitionMatrix, k: int) -> dict[CellId | None, frozenset[CellId]]:
    """Top-k next-state sets per origin; None key holds the uniform (sink) fallback.

    Ties, including padding beyond a row's support, break by state index order.
    """
    n = len(tm.states)
    order_uniform = list(range(min(k, n)))
    cache: dict[CellId | None, frozenset[CellId]] = {
        None: frozenset(tm.states[i] for i in order_uniform)
    }
    for i, (dest_idx, probs) in tm.rows.items():
        full = np.zeros(n)
        full[dest_idx] = probs
        order = np.lexsort((np.arange(n), -full))[:k]
        cache[tm.states[i]] = frozenset(tm.states[j] for j in order)
    return cache


def next_location_prediction(
    syn_tm: TransitionMatrix, real_dt: Sequence[DiscretizedTrajectory], k: int = 10
) -> MetricResult:
    """Mean top-k next-cell accuracy of the synthetic kernel on real sequences.

    Origins unknown to the kernel fall back to a uniform distribution over its
    state space.
    """
    cache = _top_k_candidates(syn_tm, k)
    known = set(syn_tm.states)
    accs = []
    excluded = 0
    for dt in real_dt:
        if len(dt.cells) < 2:
            excluded += 1
            continue
        hits = 0
        for cur, nxt in zip(dt.cells, dt.cells[1:]):
            # unknown origins and known sink origins both fall back to uniform
            candidates = cache.get(cur, cache[None]) if cur in known else cache[None]
            if nxt in candidates:
                hits += 1
        accs.append(hits / (len(dt.cells) - 1))
    if not accs:
        raise ValueError("next-location prediction needs trajectories of length >= 2")
    return MetricResult(
        "next_location_prediction", "trajectory", "task", "mean accuracy", "higher",
        float(np.mean(accs)), detail={"k": k, "excluded": excluded},
    )


def global_flow_prediction(
    syn_tm: TransitionMatrix, real_dt: Sequence[DiscretizedTrajectory]
) -> MetricResult:
    """Mean W1 between kernel-predicted and observed step-wise population flows.

    Step distributions index sequence position within trajectories; the
    horizon is the 90th percentile of trajectory lengths. Sink origins spread
    uniformly over the kernel's state space.
    """
    lengths = [len(dt) for dt in real_dt]
    if not lengths:
        raise ValueError("empty real dataset")
    horizon = int(np.percentile(lengths, 90))
    if horizon < 2:
        raise ValueError("global flow prediction needs a horizon of at least 2 steps")

    all_cells: set[CellId] = set(syn_tm.states)
    for dt in real_dt:
        all_cells.update(dt.cells)
    union = tuple(sorted(all_cells))
    cost = states_ground_cost(union, syn_tm.grid.cell_edge_m)
    uidx = {s: i for i, s in enumerate(union)}

    syn_index = {s: i for i, s in enumerate(syn_tm.states)}
    n_syn = len(syn_tm.states)

    w1_values = []
    for n in range(1, horizon):
        v_n: Counter[CellId] = Counter(dt.cells[n - 1] for dt in real_dt if len(dt) >= n)
        v_next: Counter[CellId] = Counter(dt.cells[n] for dt in real_dt if len(dt) >= n + 1)
        if not v_n or not v_next:
            continue
        total = sum(v_n.values())
        predicted: dict[CellId, float] = {}
        for cell, cnt in v_n.items():
            mass = cnt / total
            row = None
            si = syn_index.get(cell)
            if si is not None:
                row = syn_tm.rows.get(si)
            if row is None:
                for s in syn_tm.states:
                    predicted[s] = predicted.get(s, 0.0) + mass / n_syn
            else:
                dest_idx, probs = row
                for j, p in zip(dest_idx, probs):
                    s = syn_tm.states[j]
                    predicted[s] = predicted.get(s, 0.0) + mass * p
        mu = EmpiricalDistribution.from_counts(predicted)
        nu = EmpiricalDistribution.from_counts(v_next)
        sub = cost.costs[np.ix_(
            [uidx[c] for c in mu.atoms], [uidx[c] for c in nu.atoms]
        )]
        w1_values.append(wasserstein1_ground_cost(mu, nu, GroundCostMatrix(sub, cost.d_max)))
    if not w1_values:
        raise ValueError("global flow prediction: no comparable steps")
    return MetricResult(
        "global_flow_prediction", "point", "task", "mean W1", "lower",
        float(np.mean(w1_values)), detail={"horizon": horizon, "steps": len(w1_values)},
    )


# ---------------------------------------------------------------------------
# trajectory clustering (density-based world view + silhouette transfer)
# ---------------------------------------------------------------------------

def dbscan(points: np.ndarray, eps: float, min_pts: int) -> tuple[np.ndarray, np.ndarray]:
    """Plain DBSCAN; neighborhood counts include the point itself.

    Returns (labels, core_mask); noise points carry label -1.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    neighbors = [np.nonzero(d[i] <= eps)[0] for i in range(n)]
    core = np.array([len(nb) >= min_pts for nb in neighbors])
    labels = np.full(n, -1, dtype=int)
    cid = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cid
        frontier = [i]
        while frontier:
            q = frontier.pop()
            for nb in neighbors[q]:
                if labels[nb] == -1:
                    labels[nb] = cid
                    if core[nb]:
                        frontier.append(nb)
        cid += 1
    return labels, core


def trajectory_centroids(d: Dataset) -> np.ndarray:
    return np.array([t.xy.mean(axis=0) for t in d])


def trajectory_clustering_silhouette(
    syn: Dataset, real: Dataset, eps: float, min_pts: int = 3
) -> MetricResult:
    """Mean silhouette of real trajectory centroids against clusters discovered
    on the synthetic centroids.

    Synthetic centroids are clustered density-wise; each real centroid joins
    the cluster of its nearest synthetic core point, then scores
    (b - a) / max(a, b) with a = mean distance to that cluster's members and
    b = mean distance to the nearest other cluster.
    """
    syn_c = trajectory_centroids(syn)
    real_c = trajectory_centroids(real)
    labels, core = dbscan(syn_c, eps, min_pts)
    cluster_ids = sorted(set(labels[labels >= 0]))
    if len(cluster_ids) < 2:
        raise ValueError(f"clustering found {len(cluster_ids)} cluster(s); need at least 2")
    noise = int((labels == -1).sum())
    members = {cid: syn_c[labels == cid] for cid in cluster_ids}
    core_pts = syn_c[core]
    core_labels = labels[core]

    scores = []
    for c in real_c:
        d_core = np.linalg.norm(core_pts - c, axis=1)
        own = int(core_labels[int(np.argmin(d_core))])
        a = float(np.linalg.norm(members[own] - c, axis=1).mean())
        b = min(
            float(np.linalg.norm(members[cid] - c, axis=1).mean())
            for cid in cluster_ids
            if cid != own
        )
        top = max(a, b)
        scores.append(0.0 if top == 0 else (b - a) / top)
    return MetricResult(
        "trajectory_clustering", "trajectory", "task", "silhouette", "higher",
        float(np.mean(scores)),
        detail={"clusters": len(cluster_ids), "noise_centroids": noise},
    )


# ---------------------------------------------------------------------------
# sweep dispatch
# ---------------------------------------------------------------------------

def evaluate_grid_metric(
    metric_id: str,
    real_dt: Sequence[DiscretizedTrajectory],
    syn_dt: Sequence[DiscretizedTrajectory],
    grid: GridSpec,
) -> MetricResult:
    """Evaluate one grid-dependent metric on already-discretized datasets."""
    if metric_id == "i_rank":
        return i_rank_metric(real_dt, syn_dt)
    if metric_id == "g_rank":
        return g_rank_metric(real_dt, syn_dt)
    if metric_id == "transition_probabilities":
        return transition_probability_metric(
            build_transition_matrix(real_dt, grid), build_transition_matrix(syn_dt, grid)
        )
    if metric_id == "global_flow_prediction":
        return global_flow_prediction(build_transition_matrix(syn_dt, grid), real_dt)
    if metric_id == "category_location_match":
        return category_location_match(real_dt, syn_dt)
    raise ValueError(f"not a grid metric: {metric_id!r}")
