"""Reference generation models exercising the utility and privacy pipelines.

Blurring models transform real records at inference time with a positional
1:1 record correspondence; synthetic models only ever sample from what they
learned at fit time. All outputs are fully determined by (params, seed,
input).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .core import Dataset, GeoPoint, TrajPoint, Trajectory
from .grid import CellId, GridSpec, cell_centroid, discretize


@runtime_checkable
class BlurringModel(Protocol):
    def fit(self, d_train: Dataset) -> None: ...

    def blur(self, q: Dataset) -> Dataset: ...


@runtime_checkable
class SyntheticModel(Protocol):
    def fit(self, d_train: Dataset) -> None: ...

    def sample(self, n: int) -> Dataset: ...


def _record_rng(master_seed: int, record_index: int) -> np.random.Generator:
    return np.random.default_rng([master_seed, record_index])


class IdentityBlurrer:
    """Worst-case memorization reference: exact copies under fresh traj ids."""

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed

    def fit(self, d_train: Dataset) -> None:
        pass

    def blur(self, q: Dataset) -> Dataset:
        out = [
            Trajectory(f"blur-{i:05d}", t.user_id, t.points)
            for i, t in enumerate(q)
        ]
        return q.replace_trajectories(out, name=f"{q.name}#identity")


class GaussianJitterBlurrer:
    """Independent zero-mean coordinate noise with optional category flips.

    Timestamps are preserved; per-record noise streams derive from the master
    seed, so output is independent of evaluation order.
    """

    def __init__(self, sigma_m: float, flip_prob: float = 0.0, seed: int = 0) -> None:
        if sigma_m < 0:
            raise ValueError("sigma_m must be >= 0")
        if not 0.0 <= flip_prob <= 1.0:
            raise ValueError("flip_prob must be in [0, 1]")
        self.sigma_m = sigma_m
        self.flip_prob = flip_prob
        self.seed = seed
        self._vocab: tuple[str, ...] | None = None

    def fit(self, d_train: Dataset) -> None:
        self._vocab = d_train.vocabulary

    def blur(self, q: Dataset) -> Dataset:
        vocab = self._vocab or q.vocabulary
        out = []
        for i, t in enumerate(q):
            rng = _record_rng(self.seed, i)
            noise = rng.normal(0.0, self.sigma_m, size=(len(t), 2))
            points = []
            for (dx, dy), p in zip(noise, t.points):
                cat = p.category
                if (
                    cat is not None
                    and self.flip_prob > 0
                    and vocab is not None
                    and len(vocab) > 1
                    and rng.random() < self.flip_prob
                ):
                    others = [c for c in vocab if c != cat]
                    cat = others[int(rng.integers(len(others)))]
                points.append(
                    TrajPoint(GeoPoint(p.point.x + dx, p.point.y + dy), p.timestamp, cat)
                )
            out.append(Trajectory(f"blur-{i:05d}", t.user_id, tuple(points)))
        return q.replace_trajectories(out, name=f"{q.name}#jitter")


class GridSnapBlurrer:
    """Coarsening reference: every point snaps to its cell centroid."""

    def __init__(self, grid: GridSpec, seed: int = 0) -> None:
        self.grid = grid
        self.seed = seed

    def fit(self, d_train: Dataset) -> None:
        pass

    def blur(self, q: Dataset) -> Dataset:
        out = []
        for i, t in enumerate(q):
            points = []
            for p, cell in zip(t.points, discretize_points(t.xy, self.grid)):
                cx, cy = cell_centroid(cell, self.grid)
                points.append(TrajPoint(GeoPoint(cx, cy), p.timestamp, p.category))
            out.append(Trajectory(f"blur-{i:05d}", t.user_id, tuple(points)))
        return q.replace_trajectories(out, name=f"{q.name}#snap")


def discretize_points(xy: np.ndarray, grid: GridSpec) -> list[CellId]:
    from .grid import cell_indices

    return [CellId(int(c), int(r)) for c, r in cell_indices(xy, grid)]


class MarginalResampler:
    """Ideal-privacy reference: ancestral sampling from fitted cell marginals.

    Learns the empirical length distribution, per-step cell marginals, a
    first-order transition kernel, per-cell category distributions and the
    mean sampling interval; samples never read any inference-time input.
    """

    def __init__(self, grid: GridSpec, seed: int = 0) -> None:
        self.grid = grid
        self.seed = seed
        self._lengths: list[int] | None = None
        self._step_marginals: list[dict[CellId, float]] | None = None
        self._kernel: dict[CellId, dict[CellId, float]] | None = None
        self._cell_categories: dict[CellId, dict[str, float]] | None = None
        self._mean_dt_s: float = 60.0

    def fit(self, d_train: Dataset) -> None:
        dts = discretize(d_train, self.grid)
        self._lengths = sorted(len(dt) for dt in dts)
        max_len = max(self._lengths)
        step_counts: list[dict[CellId, int]] = [dict() for _ in range(max_len)]
        kernel_counts: dict[CellId, dict[CellId, int]] = {}
        cat_counts: dict[CellId, dict[str, int]] = {}
        intervals = []
        for dt in dts:
            for pos, cell in enumerate(dt.cells):
                step_counts[pos][cell] = step_counts[pos].get(cell, 0) + 1
            for a, b in zip(dt.cells, dt.cells[1:]):
                kernel_counts.setdefault(a, {})[b] = kernel_counts.setdefault(a, {}).get(b, 0) + 1
            if dt.categories is not None:
                for cell, cat in zip(dt.cells, dt.categories):
                    if cat is not None:
                        cat_counts.setdefault(cell, {})[cat] = cat_counts.setdefault(cell, {}).get(cat, 0) + 1
            if len(dt.timestamps) >= 2:
                intervals.extend(np.diff(dt.timestamps))
        self._step_marginals = [_normalize(c) for c in step_counts]
        self._kernel = {k: _normalize(v) for k, v in kernel_counts.items()}
        self._cell_categories = {k: _normalize(v) for k, v in cat_counts.items()}
        if intervals:
            self._mean_dt_s = float(np.mean(intervals))

    def sample(self, n: int) -> Dataset:
        if self._lengths is None:
            raise RuntimeError("fit() must run before sample()")
        rng = np.random.default_rng(self.seed)
        trajectories = []
        for i in range(n):
            length = self._lengths[int(rng.integers(len(self._lengths)))]
            cells: list[CellId] = []
            for pos in range(length):
                nxt: CellId | None = None
                if cells:
                    row = self._kernel.get(cells[-1])
                    if row:
                        nxt = _draw(row, rng)
                if nxt is None:
                    marg = self._step_marginals[min(pos, len(self._step_marginals) - 1)]
                    if not marg:
                        marg = self._step_marginals[0]
                    nxt = _draw(marg, rng)
                cells.append(nxt)
            points = []
            for pos, cell in enumerate(cells):
                cx, cy = cell_centroid(cell, self.grid)
                cat = None
                cat_dist = self._cell_categories.get(cell)
                if cat_dist:
                    cat = _draw(cat_dist, rng)
                points.append(TrajPoint(GeoPoint(cx, cy), pos * self._mean_dt_s, cat))
            trajectories.append(Trajectory(f"synth-{i:05d}", f"synthuser-{i:05d}", tuple(points)))
        return Dataset(tuple(trajectories), name="resampled", crs="metric")

    def as_blurrer(self) -> "ResamplingBlurrer":
        return ResamplingBlurrer(self)

    # serialization -----------------------------------------------------

    def to_json(self) -> str:
        if self._lengths is None:
            raise RuntimeError("nothing to serialize before fit()")
        doc = {
            "grid": {"cell_edge_m": self.grid.cell_edge_m, "origin_offset": list(self.grid.origin_offset)},
            "seed": self.seed,
            "lengths": self._lengths,
            "mean_dt_s": self._mean_dt_s,
            "step_marginals": [
                [[list(c), p] for c, p in sorted(m.items())] for m in self._step_marginals
            ],
            "kernel": [
                [list(a), [[list(b), p] for b, p in sorted(row.items())]]
                for a, row in sorted(self._kernel.items())
            ],
            "cell_categories": [
                [list(c), sorted(d.items())] for c, d in sorted(self._cell_categories.items())
            ],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MarginalResampler":
        doc = json.loads(text)
        grid = GridSpec(doc["grid"]["cell_edge_m"], tuple(doc["grid"]["origin_offset"]))
        model = cls(grid, seed=doc["seed"])
        model._lengths = list(doc["lengths"])
        model._mean_dt_s = doc["mean_dt_s"]
        model._step_marginals = [
            {CellId(*c): p for c, p in entries} for entries in doc["step_marginals"]
        ]
        model._kernel = {
            CellId(*a): {CellId(*b): p for b, p in row} for a, row in doc["kernel"]
        }
        model._cell_categories = {
            CellId(*c): dict(items) for c, items in doc["cell_categories"]
        }
        return model


class ResamplingBlurrer:
    """Adapter exposing a resampler through the blurring interface.

    Only the record count of the inference set is ever consumed, so scores on
    the output are independent of which records were queried.
    """

    def __init__(self, resampler: MarginalResampler) -> None:
        self.resampler = resampler

    def fit(self, d_train: Dataset) -> None:
        self.resampler.fit(d_train)

    def blur(self, q: Dataset) -> Dataset:
        return self.resampler.sample(len(q))


def _normalize(counts: dict) -> dict:
    total = sum(counts.values())
    if total == 0:
        return {}
    return {k: v / total for k, v in counts.items()}


def _draw(dist: dict, rng: np.random.Generator):
    keys = sorted(dist.keys())
    probs = np.array([dist[k] for k in keys])
    probs = probs / probs.sum()
    return keys[int(rng.choice(len(keys), p=probs))]


GENERATOR_IDS = ("identity", "jitter", "snap", "resampler")


def make_generator(gen_id: str, params: dict | None = None, grid: GridSpec | None = None, seed: int = 0):
    """Factory used by the CLI and the attack harness."""
    params = dict(params or {})
    if gen_id == "identity":
        return IdentityBlurrer(seed=seed)
    if gen_id == "jitter":
        return GaussianJitterBlurrer(
            sigma_m=float(params.get("sigma_m", 50.0)),
            flip_prob=float(params.get("flip_prob", 0.0)),
            seed=seed,
        )
    if gen_id == "snap":
        g = grid or GridSpec(float(params.get("cell_edge_m", 500.0)))
        return GridSnapBlurrer(g, seed=seed)
    if gen_id == "resampler":
        g = grid or GridSpec(float(params.get("cell_edge_m", 500.0)))
        return MarginalResampler(g, seed=seed).as_blurrer()
    raise ValueError(f"unknown generator {gen_id!r}; choices: {GENERATOR_IDS}")
