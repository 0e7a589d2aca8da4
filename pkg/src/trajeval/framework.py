"""Metric selection over the two-level, four-notion taxonomy and report assembly."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import metrics as M
from .core import Dataset
from .grid import GridSpec, discretize, select_cell_size
from .layers import ConstraintLayers
from .metrics import MetricResult

LEVELS = ("trajectory", "point")
NOTIONS = ("marginal_stats", "relational_stats", "realism", "task")
CELLS = tuple(f"{lvl}.{notion}" for lvl in LEVELS for notion in NOTIONS)


@dataclass(frozen=True)
class MetricInfo:
    metric_id: str
    level: str
    notion: str
    statistic: str
    direction: str       # lower|higher is better
    identity_value: str  # zero | one | baseline | open
    needs: frozenset = frozenset()

    @property
    def cell(self) -> str:
        return f"{self.level}.{self.notion}"


def _mi(mid, level, notion, stat, direction, identity, *needs) -> MetricInfo:
    return MetricInfo(mid, level, notion, stat, direction, identity, frozenset(needs))


REGISTRY: dict[str, MetricInfo] = {
    m.metric_id: m
    for m in (
        _mi("i_rank", "trajectory", "marginal_stats", "W1", "lower", "zero", "grid"),
        _mi("average_speed", "trajectory", "marginal_stats", "W1 (km/h)", "lower", "zero"),
        _mi("traveled_distance", "trajectory", "marginal_stats", "W1 (km)", "lower", "zero"),
        _mi("pairwise_hausdorff", "trajectory", "relational_stats", "W1 (km)", "lower", "zero"),
        _mi("pairwise_cosine", "trajectory", "relational_stats", "W1", "lower", "zero", "categories"),
        _mi("trajectory_implausibility", "trajectory", "realism", "ratio", "lower", "baseline", "layers"),
        _mi("map_reconstruction", "trajectory", "realism", "mean (km)", "lower", "baseline", "layers"),
        _mi("trajectory_clustering", "trajectory", "task", "silhouette", "higher", "open"),
        _mi("next_location_prediction", "trajectory", "task", "mean accuracy", "higher", "open", "grid"),
        _mi("g_rank", "point", "marginal_stats", "tau_b", "higher", "one", "grid"),
        _mi("categorical_g_rank", "point", "marginal_stats", "tau_b", "higher", "one", "categories"),
        _mi("transition_probabilities", "point", "relational_stats", "W1", "lower", "zero", "grid"),
        _mi("location_implausibility", "point", "realism", "ratio", "lower", "baseline", "layers"),
        _mi("category_location_match", "point", "realism", "match rate", "higher", "one", "grid", "categories"),
        _mi("global_flow_prediction", "point", "task", "mean W1", "lower", "open", "grid"),
    )
}

#: taxonomy entries acknowledged but not implemented
UNIMPLEMENTED: dict[str, MetricInfo] = {
    m.metric_id: m
    for m in (
        _mi("od_spatial_density", "trajectory", "marginal_stats", "-", "lower", "open"),
        _mi("waiting_time", "trajectory", "marginal_stats", "-", "lower", "open"),
        _mi("pairwise_dtw", "trajectory", "relational_stats", "-", "lower", "open"),
        _mi("reachability", "trajectory", "realism", "-", "higher", "open"),
        _mi("time_reversal_ratio", "trajectory", "realism", "-", "higher", "open"),
        _mi("trajectory_forecasting", "trajectory", "task", "-", "higher", "open"),
        _mi("temporal_activity", "point", "marginal_stats", "-", "lower", "open"),
        _mi("spatial_cooccurrence", "point", "relational_stats", "-", "lower", "open"),
        _mi("traffic_flow_prediction", "point", "task", "-", "lower", "open"),
        _mi("crowd_density_prediction", "point", "task", "-", "lower", "open"),
    )
}

PRESETS: dict[str, dict[str, list[dict]]] = {
    "use-case-a": {
        "trajectory.marginal_stats": [{"metric": "i_rank"}],
        "trajectory.relational_stats": [{"metric": "pairwise_cosine"}],
        "trajectory.realism": [{"metric": "trajectory_implausibility"}],
        "trajectory.task": [{"metric": "trajectory_clustering"}],
        "point.marginal_stats": [{"metric": "categorical_g_rank"}],
        "point.relational_stats": [{"metric": "transition_probabilities"}],
        "point.realism": [{"metric": "category_location_match"}],
        "point.task": [{"metric": "global_flow_prediction"}],
    },
    "use-case-b": {
        "trajectory.marginal_stats": [{"metric": "average_speed"}],
        "trajectory.relational_stats": [{"metric": "pairwise_hausdorff"}],
        "trajectory.realism": [{"metric": "map_reconstruction"}],
        "trajectory.task": [{"metric": "next_location_prediction"}],
        "point.marginal_stats": [{"metric": "g_rank"}],
        "point.relational_stats": [{"metric": "transition_probabilities"}],
        "point.realism": [{"metric": "location_implausibility"}],
        "point.task": [{"metric": "global_flow_prediction"}],
    },
}


@dataclass
class MetricSelection:
    """Ordered metric choices per taxonomy cell (every cell needs at least one)."""

    cells: dict[str, list[dict]]

    def __post_init__(self) -> None:
        for cell in CELLS:
            if cell not in self.cells or not self.cells[cell]:
                raise ValueError(f"selection is missing taxonomy cell {cell!r}")
        for cell, entries in self.cells.items():
            if cell not in CELLS:
                raise ValueError(f"unknown taxonomy cell {cell!r}")
            for entry in entries:
                mid = entry.get("metric")
                if mid in UNIMPLEMENTED:
                    raise ValueError(f"metric {mid!r} is registered but not implemented")
                if mid not in REGISTRY:
                    raise ValueError(f"unknown metric id {mid!r}")
                info = REGISTRY[mid]
                if info.cell != cell:
                    raise ValueError(f"metric {mid!r} belongs to cell {info.cell!r}, not {cell!r}")

    @classmethod
    def preset(cls, name: str) -> "MetricSelection":
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
        return cls({cell: [dict(e) for e in entries] for cell, entries in PRESETS[name].items()})

    @classmethod
    def from_config(cls, doc: Mapping) -> "MetricSelection":
        return cls({cell: [dict(e) for e in entries] for cell, entries in doc.items()})

    def ordered_entries(self) -> list[dict]:
        out = []
        for cell in CELLS:
            out.extend(self.cells[cell])
        return out

    def needs(self) -> frozenset:
        req: set[str] = set()
        for cell in CELLS:
            for entry in self.cells[cell]:
                req |= REGISTRY[entry["metric"]].needs
        return frozenset(req)


@dataclass
class EvalEnvironment:
    """Shared evaluation context: one grid derived from the real dataset, plus
    constraint layers and clustering defaults."""

    grid: GridSpec | None = None
    layers: ConstraintLayers | None = None
    cluster_eps_m: float | None = None
    cluster_min_pts: int = 3
    seed: int = 0


@dataclass
class UtilityVector:
    model: str
    entries: tuple[MetricResult, ...]


@dataclass
class UtilityReport:
    original: UtilityVector
    models: dict[str, UtilityVector]
    best: list[set] = field(default_factory=list)
    best_counts: dict[str, int] = field(default_factory=dict)


class _EvalContext:
    """Caches per-dataset derived structures across metrics."""

    def __init__(self, real: Dataset, syn: Dataset, env: EvalEnvironment):
        self.real = real
        self.syn = syn
        self.env = env
        self._cache: dict = {}

    def grid(self) -> GridSpec:
        if self.env.grid is None:
            self.env.grid = GridSpec(select_cell_size(self.real))
        return self.env.grid

    def real_dt(self):
        if "real_dt" not in self._cache:
            self._cache["real_dt"] = discretize(self.real, self.grid())
        return self._cache["real_dt"]

    def syn_dt(self):
        if "syn_dt" not in self._cache:
            self._cache["syn_dt"] = discretize(self.syn, self.grid())
        return self._cache["syn_dt"]

    def real_tm(self):
        if "real_tm" not in self._cache:
            self._cache["real_tm"] = M.build_transition_matrix(self.real_dt(), self.grid())
        return self._cache["real_tm"]

    def syn_tm(self):
        if "syn_tm" not in self._cache:
            self._cache["syn_tm"] = M.build_transition_matrix(self.syn_dt(), self.grid())
        return self._cache["syn_tm"]

    def cluster_eps(self) -> float:
        if self.env.cluster_eps_m is None:
            # default scale: one grid cell diagonal
            e = self.grid().cell_edge_m
            return e * 2 ** 0.5
        return self.env.cluster_eps_m


def _run_metric(ctx: _EvalContext, mid: str, params: dict) -> MetricResult:
    env = ctx.env
    if mid == "i_rank":
        return M.i_rank_metric(ctx.real_dt(), ctx.syn_dt())
    if mid == "average_speed":
        return M.average_speed_metric(ctx.real, ctx.syn)
    if mid == "traveled_distance":
        return M.traveled_distance_metric(ctx.real, ctx.syn)
    if mid == "pairwise_hausdorff":
        return M.pairwise_similarity_metric(ctx.real, ctx.syn, kind="hausdorff")
    if mid == "pairwise_cosine":
        return M.pairwise_similarity_metric(ctx.real, ctx.syn, kind="cosine")
    if mid == "trajectory_implausibility":
        return M.trajectory_implausibility(ctx.syn, env.layers, params.get("delta_m", M.GPS_TOLERANCE_M))
    if mid == "map_reconstruction":
        return M.map_reconstruction_metric(ctx.real, ctx.syn, env.layers)
    if mid == "trajectory_clustering":
        return M.trajectory_clustering_silhouette(
            ctx.syn, ctx.real,
            eps=params.get("eps_m", ctx.cluster_eps()),
            min_pts=params.get("min_pts", env.cluster_min_pts),
        )
    if mid == "next_location_prediction":
        return M.next_location_prediction(ctx.syn_tm(), ctx.real_dt(), k=params.get("k", 10))
    if mid == "g_rank":
        return M.g_rank_metric(ctx.real_dt(), ctx.syn_dt())
    if mid == "categorical_g_rank":
        return M.categorical_g_rank(ctx.real, ctx.syn)
    if mid == "transition_probabilities":
        return M.transition_probability_metric(ctx.real_tm(), ctx.syn_tm())
    if mid == "location_implausibility":
        return M.location_implausibility(ctx.syn, env.layers, params.get("delta_m", M.GPS_TOLERANCE_M))
    if mid == "category_location_match":
        return M.category_location_match(
            ctx.real_dt(), ctx.syn_dt(),
            k_min=params.get("k_min", 5), dominance=params.get("dominance", 0.5),
        )
    if mid == "global_flow_prediction":
        return M.global_flow_prediction(ctx.syn_tm(), ctx.real_dt())
    raise ValueError(f"unknown metric id {mid!r}")


def assemble_utility_vector(
    real: Dataset,
    syn: Dataset,
    selection: MetricSelection,
    env: EvalEnvironment,
    model_name: str = "model",
) -> UtilityVector:
    """Evaluate every selected metric; runtime failures become N/A entries.

    Environment gaps (layers missing while a realism metric is selected) are
    validation errors, raised before anything runs.
    """
    needs = selection.needs()
    if "layers" in needs and env.layers is None:
        raise ValueError("selection includes realism metrics but no constraint layers were given")

    ctx = _EvalContext(real, syn, env)
    results: list[MetricResult] = []
    for entry in selection.ordered_entries():
        mid = entry["metric"]
        params = {k: v for k, v in entry.items() if k != "metric"}
        info = REGISTRY[mid]
        try:
            results.append(_run_metric(ctx, mid, params))
        except Exception as exc:
            results.append(MetricResult(
                mid, info.level, info.notion, info.statistic, info.direction,
                value=None, error=str(exc),
            ))
    return UtilityVector(model_name, tuple(results))


def compare_models(
    vectors: Mapping[str, UtilityVector], original: UtilityVector
) -> UtilityReport:
    """Mark the per-metric best model(s) by direction; ties mark everyone.

    N/A entries never win. The count summary is informative only; model
    choice stays with the practitioner.
    """
    names = list(vectors.keys())
    if not names:
        raise ValueError("no model vectors to compare")
    n_entries = len(original.entries)
    for v in vectors.values():
        if len(v.entries) != n_entries:
            raise ValueError("all vectors must use the same metric selection")
    best: list[set] = []
    for i in range(n_entries):
        direction = original.entries[i].direction
        values = {
            name: vectors[name].entries[i].value
            for name in names
            if vectors[name].entries[i].value is not None
        }
        if not values:
            best.append(set())
            continue
        opt = min(values.values()) if direction == "lower" else max(values.values())
        best.append({name for name, v in values.items() if v == opt})
    counts = {name: sum(1 for b in best if name in b) for name in names}
    return UtilityReport(original=original, models=dict(vectors), best=best, best_counts=counts)


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def _result_dict(r: MetricResult) -> dict:
    return {
        "metric": r.metric_id,
        "level": r.level,
        "notion": r.notion,
        "statistic": r.statistic,
        "direction": r.direction,
        "value": r.value,
        "error": r.error,
        "detail": r.detail,
    }


def report_to_dict(report: UtilityReport) -> dict:
    return {
        "models": list(report.models.keys()),
        "original": [_result_dict(r) for r in report.original.entries],
        "vectors": {name: [_result_dict(r) for r in v.entries] for name, v in report.models.items()},
        "best": [sorted(b) for b in report.best],
        "best_counts": report.best_counts,
    }


def report_from_dict(doc: Mapping) -> UtilityReport:
    def vec(name: str, entries: Sequence[Mapping]) -> UtilityVector:
        return UtilityVector(name, tuple(
            MetricResult(
                e["metric"], e["level"], e["notion"], e["statistic"], e["direction"],
                e["value"], dict(e.get("detail", {})), e.get("error"),
            )
            for e in entries
        ))

    models = {name: vec(name, doc["vectors"][name]) for name in doc["models"]}
    return UtilityReport(
        original=vec("original", doc["original"]),
        models=models,
        best=[set(b) for b in doc["best"]],
        best_counts=dict(doc["best_counts"]),
    )


def report_json(report: UtilityReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def report_csv(report: UtilityReport) -> str:
    """One row per (model, metric); the original identity row is included."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["model", "metric", "level", "notion", "statistic", "direction", "value", "error", "best"]
    )
    rows_for = [("original", report.original, None)]
    rows_for += [(name, vec, i) for i, (name, vec) in enumerate(report.models.items())]
    for name, vec, _ in rows_for:
        for i, r in enumerate(vec.entries):
            is_best = name != "original" and name in report.best[i]
            writer.writerow([
                name, r.metric_id, r.level, r.notion, r.statistic, r.direction,
                "" if r.value is None else repr(r.value),
                r.error or "",
                int(is_best),
            ])
    return buf.getvalue()


def emit_report(report: UtilityReport, out_dir: str | Path, formats: Sequence[str], stem: str = "report") -> list[Path]:
    """Write the report in the requested formats; returns the created paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for fmt in formats:
        if fmt == "json":
            p = out_dir / f"{stem}.json"
            p.write_text(report_json(report), encoding="utf-8")
        elif fmt == "csv":
            p = out_dir / f"{stem}.csv"
            p.write_text(report_csv(report), encoding="utf-8")
        elif fmt == "svg":
            from .plotting import report_table_figure, save_figure
            p = out_dir / f"{stem}.svg"
            save_figure(report_table_figure(report), p)
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        paths.append(p)
    return paths
