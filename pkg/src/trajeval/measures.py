"""Distribution and sequence distances.

Exact 1-Wasserstein (closed-form scalar coupling and a min-cost-flow solver
for arbitrary ground costs), tie-aware Kendall tau-b over partially
overlapping supports, Hausdorff, discrete Frechet, DTW and cosine distance.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

WEIGHT_TOL = 1e-9
FLOW_TOL = 1e-12


@dataclass
class EmpiricalDistribution:
    """Weighted discrete distribution over unique atoms (scalars or cell ids)."""

    atoms: tuple
    weights: np.ndarray

    def __post_init__(self) -> None:
        self.atoms = tuple(self.atoms)
        w = np.asarray(self.weights, dtype=float)
        if len(self.atoms) == 0:
            raise ValueError("empty distribution")
        if len(self.atoms) != len(w):
            raise ValueError("atoms/weights length mismatch")
        if len(set(self.atoms)) != len(self.atoms):
            raise ValueError("support atoms must be unique")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
        total = float(w.sum())
        if total <= 0:
            raise ValueError("weights must have positive mass")
        if abs(total - 1.0) > WEIGHT_TOL:
            w = w / total
        self.weights = w

    @classmethod
    def from_samples(cls, values: Sequence) -> "EmpiricalDistribution":
        """Uniform empirical distribution; duplicate values merge their mass."""
        counts: dict = {}
        for v in values:
            counts[v] = counts.get(v, 0) + 1
        return cls.from_counts(counts)

    @classmethod
    def from_counts(cls, counts: Mapping[Hashable, float]) -> "EmpiricalDistribution":
        items = sorted(counts.keys())
        w = np.array([counts[k] for k in items], dtype=float)
        return cls(tuple(items), w)

    def scalar_atoms(self) -> np.ndarray:
        return np.asarray(self.atoms, dtype=float)


@dataclass
class GroundCostMatrix:
    """Pairwise atom costs; d_max records the normalization used, if any."""

    costs: np.ndarray
    d_max: float

    def __post_init__(self) -> None:
        self.costs = np.asarray(self.costs, dtype=float)
        if self.costs.ndim != 2:
            raise ValueError("cost matrix must be 2-D")
        if np.any(self.costs < 0):
            raise ValueError("costs must be non-negative")


@dataclass
class RankVector:
    """Items with (possibly tied) ordinal ranks, 1 = first."""

    items: tuple
    ranks: np.ndarray

    def __post_init__(self) -> None:
        self.items = tuple(self.items)
        self.ranks = np.asarray(self.ranks, dtype=float)
        if len(self.items) != len(self.ranks):
            raise ValueError("items/ranks length mismatch")
        if len(set(self.items)) != len(self.items):
            raise ValueError("items must be unique")
        if len(self.items) and (self.ranks.min() < 1 or self.ranks.max() > len(self.items)):
            raise ValueError("ranks must lie within [1, n]")


def rank_by_frequency(counts: Mapping[Hashable, float]) -> RankVector:
    """Competition ranking by descending count; equal counts share a rank."""
    items = sorted(counts.keys(), key=lambda k: (-counts[k], k))
    ranks = np.empty(len(items))
    pos = 0
    while pos < len(items):
        end = pos
        while end < len(items) and counts[items[end]] == counts[items[pos]]:
            end += 1
        ranks[pos:end] = pos + 1
        pos = end
    return RankVector(tuple(items), ranks)


# ---------------------------------------------------------------------------
# 1-Wasserstein
# ---------------------------------------------------------------------------

def wasserstein1_scalar(mu: EmpiricalDistribution, nu: EmpiricalDistribution) -> float:
    """Exact W1 between scalar distributions via the CDF-difference integral."""
    pos = np.concatenate([mu.scalar_atoms(), nu.scalar_atoms()])
    signed = np.concatenate([mu.weights, -nu.weights])
    order = np.argsort(pos, kind="stable")
    pos = pos[order]
    cum = np.cumsum(signed[order])
    if len(pos) < 2:
        return 0.0
    return float(np.sum(np.abs(cum[:-1]) * np.diff(pos)))


def transport_plan(a: np.ndarray, b: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """Exact optimal plan for the balanced transportation problem.

    Successive shortest augmenting paths with node potentials (min-cost flow
    on the complete bipartite network). Supplies ``a`` and demands ``b`` must
    carry equal total mass.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(costs, dtype=float)
    n, m = C.shape
    if a.shape != (n,) or b.shape != (m,):
        raise ValueError("marginals do not match the cost matrix")
    if abs(a.sum() - b.sum()) > WEIGHT_TOL:
        raise ValueError("unbalanced marginals")
    if n == 1:
        return b.reshape(1, m).copy()
    if m == 1:
        return a.reshape(n, 1).copy()

    flow = np.zeros((n, m))
    rem_a = a.copy()
    rem_b = b.copy()
    ps = np.zeros(n)  # source potentials
    pt = np.zeros(m)  # sink potentials

    max_rounds = n * m + n + m + 16
    rounds = 0
    while rem_a.sum() > FLOW_TOL:
        rounds += 1
        if rounds > max_rounds:
            raise RuntimeError("transport solver failed to converge")

        dist_s = np.full(n, np.inf)
        dist_t = np.full(m, np.inf)
        done_s = np.zeros(n, dtype=bool)
        done_t = np.zeros(m, dtype=bool)
        pred_sink = np.full(m, -1, dtype=int)    # source that reached sink j
        pred_source = np.full(n, -1, dtype=int)  # sink whose reverse arc reached source i

        heap: list[tuple[float, int, int]] = []
        for i in np.nonzero(rem_a > FLOW_TOL)[0]:
            dist_s[i] = 0.0
            heap.append((0.0, 0, int(i)))
        heapq.heapify(heap)

        target = -1
        while heap:
            d, side, idx = heapq.heappop(heap)
            if side == 0:
                if done_s[idx]:
                    continue
                done_s[idx] = True
                # forward arcs idx -> all sinks, reduced cost clamped for float safety
                red = np.maximum(C[idx] + ps[idx] - pt, 0.0)
                nd = d + red
                better = (~done_t) & (nd < dist_t - FLOW_TOL)
                for j in np.nonzero(better)[0]:
                    dist_t[j] = nd[j]
                    pred_sink[j] = idx
                    heapq.heappush(heap, (float(nd[j]), 1, int(j)))
            else:
                if done_t[idx]:
                    continue
                done_t[idx] = True
                if rem_b[idx] > FLOW_TOL:
                    target = idx
                    break
                # reverse arcs idx -> sources with positive flow
                carriers = np.nonzero(flow[:, idx] > FLOW_TOL)[0]
                if carriers.size:
                    red = np.maximum(-C[carriers, idx] - ps[carriers] + pt[idx], 0.0)
                    nd = d + red
                    for i_pos, i in enumerate(carriers):
                        if not done_s[i] and nd[i_pos] < dist_s[i] - FLOW_TOL:
                            dist_s[i] = nd[i_pos]
                            pred_source[i] = idx
                            heapq.heappush(heap, (float(nd[i_pos]), 0, int(i)))
        if target < 0:
            raise RuntimeError("transport solver: no augmenting path found")

        # walk the path back to a supply source, collecting arcs
        d_target = dist_t[target]
        forward_arcs: list[tuple[int, int]] = []
        reverse_arcs: list[tuple[int, int]] = []
        j = target
        while True:
            i = pred_sink[j]
            forward_arcs.append((int(i), int(j)))
            if pred_source[i] < 0:
                root = int(i)
                break
            j = pred_source[i]
            reverse_arcs.append((int(i), int(j)))

        delta = min(rem_a[root], rem_b[target])
        for i, j in reverse_arcs:
            delta = min(delta, flow[i, j])
        for i, j in forward_arcs:
            flow[i, j] += delta
        for i, j in reverse_arcs:
            flow[i, j] -= delta
            if flow[i, j] < FLOW_TOL:
                flow[i, j] = 0.0
        rem_a[root] -= delta
        rem_b[target] -= delta
        if rem_a[root] < FLOW_TOL:
            rem_a[root] = 0.0
        if rem_b[target] < FLOW_TOL:
            rem_b[target] = 0.0

        ps += np.minimum(dist_s, d_target)
        pt += np.minimum(dist_t, d_target)

    return flow


def wasserstein1_ground_cost(
    mu: EmpiricalDistribution, nu: EmpiricalDistribution, cost: GroundCostMatrix
) -> float:
    """Exact W1 under an explicit ground cost (LP optimum via min-cost flow)."""
    n, m = cost.costs.shape
    if len(mu.atoms) != n or len(nu.atoms) != m:
        raise ValueError(
            f"cost matrix is {n}x{m} but supports have {len(mu.atoms)} and {len(nu.atoms)} atoms"
        )
    plan = transport_plan(mu.weights, nu.weights, cost.costs)
    return float(np.sum(plan * cost.costs))


def cell_centroids_m(cells: Sequence, edge_m: float) -> np.ndarray:
    """Cell centers in meters, up to a common translation (offsets cancel in costs)."""
    arr = np.array([(c[0], c[1]) for c in cells], dtype=float)
    return (arr + 0.5) * edge_m


def spatial_ground_cost(cells_a: Sequence, cells_b: Sequence, edge_m: float) -> GroundCostMatrix:
    """Centroid distances normalized by the max pairwise distance over the support union."""
    if len(cells_a) == 0 or len(cells_b) == 0:
        raise ValueError("empty support")
    union = sorted(set(cells_a) | set(cells_b))
    pts = cell_centroids_m(union, edge_m)
    diffs = pts[:, None, :] - pts[None, :, :]
    all_d = np.sqrt((diffs ** 2).sum(-1))
    d_max = float(all_d.max())
    idx = {c: i for i, c in enumerate(union)}
    ia = np.array([idx[c] for c in cells_a])
    ib = np.array([idx[c] for c in cells_b])
    if d_max == 0.0:
        return GroundCostMatrix(np.zeros((len(cells_a), len(cells_b))), 0.0)
    return GroundCostMatrix(all_d[np.ix_(ia, ib)] / d_max, d_max)


# ---------------------------------------------------------------------------
# rank correlation
# ---------------------------------------------------------------------------

def align_rank_vectors(x: RankVector, y: RankVector) -> tuple[np.ndarray, np.ndarray]:
    """Extend both rankings to the union support; absent items share one bottom rank."""
    union = sorted(set(x.items) | set(y.items))
    rx_map = dict(zip(x.items, x.ranks))
    ry_map = dict(zip(y.items, y.ranks))
    bottom_x = float(x.ranks.max()) + 1.0 if len(x.ranks) else 1.0
    bottom_y = float(y.ranks.max()) + 1.0 if len(y.ranks) else 1.0
    rx = np.array([rx_map.get(it, bottom_x) for it in union])
    ry = np.array([ry_map.get(it, bottom_y) for it in union])
    return rx, ry


def kendall_tau_b(x: RankVector, y: RankVector) -> float:
    """Tie-corrected Kendall rank correlation over the union of the supports."""
    rx, ry = align_rank_vectors(x, y)
    n = len(rx)
    if n < 2:
        raise ValueError("need at least 2 items in the support union")
    nc = nd = tx = ty = 0
    for i in range(n - 1):
        sx = np.sign(rx[i + 1:] - rx[i])
        sy = np.sign(ry[i + 1:] - ry[i])
        prod = sx * sy
        nc += int((prod > 0).sum())
        nd += int((prod < 0).sum())
        tx += int((sx == 0).sum())
        ty += int((sy == 0).sum())
    n0 = n * (n - 1) // 2
    if tx == n0 or ty == n0:
        raise ValueError("tau-b undefined: all pairs tied on one side")
    return (nc - nd) / math.sqrt((n0 - tx) * (n0 - ty))


# ---------------------------------------------------------------------------
# point-set / sequence distances
# ---------------------------------------------------------------------------

def _pair_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if b.ndim == 1:
        b = b[None, :]
    if a.size == 0 or b.size == 0:
        raise ValueError("empty point set")
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    """max(sup-inf, sup-inf) over Euclidean distances, both directions."""
    d = _pair_distances(a, b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def discrete_frechet(a: np.ndarray, b: np.ndarray) -> float:
    """Discrete Frechet distance via the coupling-lattice recurrence."""
    d = _pair_distances(a, b)
    n, m = d.shape
    ca = np.empty((n, m))
    ca[0, 0] = d[0, 0]
    for j in range(1, m):
        ca[0, j] = max(ca[0, j - 1], d[0, j])
    for i in range(1, n):
        ca[i, 0] = max(ca[i - 1, 0], d[i, 0])
        for j in range(1, m):
            ca[i, j] = max(d[i, j], min(ca[i - 1, j], ca[i - 1, j - 1], ca[i, j - 1]))
    return float(ca[n - 1, m - 1])


def dtw(a: np.ndarray, b: np.ndarray) -> float:
    """Accumulated dynamic-time-warping cost with Euclidean local distances."""
    d = _pair_distances(a, b)
    n, m = d.shape
    acc = np.empty((n, m))
    acc[0, 0] = d[0, 0]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + d[0, j]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + d[i, 0]
        for j in range(1, m):
            acc[i, j] = d[i, j] + min(acc[i - 1, j], acc[i - 1, j - 1], acc[i, j - 1])
    return float(acc[n - 1, m - 1])


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - cos(u, v); in [0, 1] for non-negative vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine distance undefined for a zero vector")
    return float(1.0 - float(u @ v) / (nu * nv))
