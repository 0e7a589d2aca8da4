"""Independent brute-force oracles used to pin expected metric values.

These deliberately avoid the library's algorithmic paths: the transport
oracle enumerates basic feasible solutions of the transportation polytope,
the rank oracle counts pairs with nested loops, and the sequence oracles
follow the textbook recursions directly.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np


# ---------------------------------------------------------------------------
# transportation LP: exhaustive vertex enumeration
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _spanning_trees(n: int, m: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """All spanning trees of the complete bipartite graph K_{n,m} as edge lists."""
    edges = [(i, j) for i in range(n) for j in range(m)]
    need = n + m - 1
    trees = []
    for combo in itertools.combinations(range(len(edges)), need):
        parent = list(range(n + m))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for k in combo:
            i, j = edges[k]
            ri, rj = find(i), find(n + j)
            if ri == rj:
                ok = False
                break
            parent[ri] = rj
        if ok:
            trees.append(tuple(edges[k] for k in combo))
    return tuple(trees)


def _tree_flows(tree, a, b) -> np.ndarray | None:
    """Basic solution for one tree via leaf elimination; None when infeasible."""
    n, m = len(a), len(b)
    balance = list(a) + [-x for x in b]
    incident: dict[int, list[int]] = {u: [] for u in range(n + m)}
    for k, (i, j) in enumerate(tree):
        incident[i].append(k)
        incident[n + j].append(k)
    degree = {u: len(v) for u, v in incident.items()}
    used = [False] * len(tree)
    flows = np.zeros((n, m))
    leaves = [u for u, d in degree.items() if d == 1]
    while leaves:
        u = leaves.pop()
        if degree[u] != 1:
            continue
        edge_k = next(k for k in incident[u] if not used[k])
        used[edge_k] = True
        i, j = tree[edge_k]
        other = n + j if u == i else i
        if u == i:
            x = balance[u]        # source leaf ships its whole remaining supply
            balance[other] += x   # sink's negative balance moves toward zero
        else:
            x = -balance[u]       # sink leaf absorbs its whole remaining demand
            balance[other] -= x
        flows[i, j] = x
        balance[u] = 0
        degree[u] -= 1
        degree[other] -= 1
        if degree[other] == 1:
            leaves.append(other)
    if np.any(flows < -1e-12):
        return None
    return flows


def transport_cost_oracle(a, b, costs) -> float:
    """Exact LP optimum by scanning every basic feasible solution."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(costs, dtype=float)
    n, m = C.shape
    best = math.inf
    for tree in _spanning_trees(n, m):
        flows = _tree_flows(tree, a, b)
        if flows is None:
            continue
        best = min(best, float((flows * C).sum()))
    if not math.isfinite(best):
        raise RuntimeError("oracle found no feasible vertex")
    return best


# ---------------------------------------------------------------------------
# Kendall tau-b: nested-loop pair concordance
# ---------------------------------------------------------------------------

def tau_b_oracle(x_ranks: dict, y_ranks: dict) -> float:
    """tau_b over the union support; missing items share one bottom rank."""
    union = sorted(set(x_ranks) | set(y_ranks))
    bx = max(x_ranks.values()) + 1 if x_ranks else 1
    by = max(y_ranks.values()) + 1 if y_ranks else 1
    rx = [x_ranks.get(it, bx) for it in union]
    ry = [y_ranks.get(it, by) for it in union]
    n = len(union)
    if n < 2:
        raise ValueError("need at least two items")
    nc = nd = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = rx[i] - rx[j]
            dy = ry[i] - ry[j]
            if dx == 0:
                tx += 1
            if dy == 0:
                ty += 1
            if dx != 0 and dy != 0:
                if (dx > 0) == (dy > 0):
                    nc += 1
                else:
                    nd += 1
    n0 = n * (n - 1) // 2
    if tx == n0 or ty == n0:
        raise ValueError("undefined")
    return (nc - nd) / math.sqrt((n0 - tx) * (n0 - ty))


# ---------------------------------------------------------------------------
# sequence distances
# ---------------------------------------------------------------------------

def _euclid(p, q) -> float:
    return math.dist(tuple(p), tuple(q))


def frechet_oracle(a, b) -> float:
    """Memoized recursion straight from the coupling definition."""
    a = [tuple(p) for p in np.atleast_2d(a)]
    b = [tuple(p) for p in np.atleast_2d(b)]

    @lru_cache(maxsize=None)
    def c(i: int, j: int) -> float:
        d = _euclid(a[i], b[j])
        if i == 0 and j == 0:
            return d
        if i == 0:
            return max(c(0, j - 1), d)
        if j == 0:
            return max(c(i - 1, 0), d)
        return max(d, min(c(i - 1, j), c(i - 1, j - 1), c(i, j - 1)))

    return c(len(a) - 1, len(b) - 1)


def dtw_oracle(a, b) -> float:
    """Minimum over an explicit enumeration of all monotone warping paths."""
    a = [tuple(p) for p in np.atleast_2d(a)]
    b = [tuple(p) for p in np.atleast_2d(b)]
    n, m = len(a), len(b)
    best = [math.inf]

    def walk(i: int, j: int, acc: float) -> None:
        acc += _euclid(a[i], b[j])
        if acc >= best[0]:
            return
        if i == n - 1 and j == m - 1:
            best[0] = acc
            return
        if i + 1 < n:
            walk(i + 1, j, acc)
        if j + 1 < m:
            walk(i, j + 1, acc)
        if i + 1 < n and j + 1 < m:
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    return best[0]


def hausdorff_oracle(a, b) -> float:
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    d_ab = max(min(_euclid(p, q) for q in b) for p in a)
    d_ba = max(min(_euclid(p, q) for q in a) for p in b)
    return max(d_ab, d_ba)
