"""Command-line entry point: profiling, grid tools, utility evaluation,
privacy attacks and figure rendering.

Every run honors --seed and emits a manifest recording input/output digests,
so identical invocations can be verified byte-for-byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .core import Dataset, SplitSpec, ingest_csv, profile_dataset, split_dataset
from .framework import (
    EvalEnvironment,
    MetricSelection,
    PRESETS,
    assemble_utility_vector,
    compare_models,
    emit_report,
    report_from_dict,
)
from .generators import make_generator
from .grid import (
    DEFAULT_SWEEP_EDGES,
    GridSpec,
    cell_size_selection,
    stability_sweep,
    sweep_summary,
)
from .layers import load_layers
from .privacy import AttackConfig, run_attack, tul_protocols

DEFAULT_FORMATS = ("json", "csv", "svg")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("TRAJEVAL_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(args) -> dict:
    if getattr(args, "config", None):
        return json.loads(Path(args.config).read_text(encoding="utf-8"))
    return {}


def write_manifest(
    out_dir: Path, command: str, config: dict, inputs: list[Path], outputs: list[Path], seeds: list[int]
) -> Path:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config_hash": hashlib.sha256(
            json.dumps(config, sort_keys=True, default=str).encode()
        ).hexdigest(),
        "seeds": seeds,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs},
        "outputs": {Path(p).name: _sha256(Path(p)) for p in outputs},
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _formats(args) -> tuple[str, ...]:
    if not getattr(args, "format", None):
        return DEFAULT_FORMATS
    fmts = tuple(f.strip() for f in args.format.split(",") if f.strip())
    for f in fmts:
        if f not in DEFAULT_FORMATS:
            raise ValueError(f"unknown format {f!r}; choices: json, csv, svg")
    return fmts


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_profile(args) -> int:
    out_dir = _out_dir(args)
    dataset = ingest_csv(args.dataset)
    prof = profile_dataset(dataset)
    path = out_dir / "profile.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["dataset", *prof.FIELDS])
        writer.writerow([dataset.name] + [repr(getattr(prof, f)) for f in prof.FIELDS])
    write_manifest(out_dir, "profile", {}, [Path(args.dataset)], [path], [args.seed])
    print(f"profile written to {path}")
    return 0


def cmd_grid(args) -> int:
    out_dir = _out_dir(args)
    cfg = _load_config(args)
    dataset = ingest_csv(args.dataset)
    outputs: list[Path] = []
    inputs = [Path(args.dataset)]

    if args.action == "select":
        sel = cell_size_selection(dataset, step_m=cfg.get("step_m", 50.0))
        csv_path = out_dir / "cellsize.csv"
        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["diagnostic", "edge_m", "value"])
            for name in sorted(sel.curves):
                for edge, value in zip(sel.candidates, sel.curves[name]):
                    writer.writerow([name, repr(edge), repr(value)])
        json_path = out_dir / "cellsize.json"
        json_path.write_text(
            json.dumps({"edge_m": sel.edge_m, "elbows": sel.elbows}, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        outputs += [csv_path, json_path]
        if sel.curves:
            from .plotting import cell_size_figure, save_figure
            outputs.append(save_figure(cell_size_figure(sel), out_dir / "cellsize.svg"))
        print(f"selected cell edge: {sel.edge_m:.1f} m")
    else:  # sweep
        if not args.syn:
            raise ValueError("grid sweep requires --syn")
        syn = ingest_csv(args.syn[0])
        inputs.append(Path(args.syn[0]))
        metrics = cfg.get("metrics", ["i_rank", "g_rank", "transition_probabilities"])
        edges = cfg.get("edges", list(DEFAULT_SWEEP_EDGES))
        cells = stability_sweep(
            dataset, syn, metrics, edges=edges, phase_steps=cfg.get("phase_steps", 3)
        )
        summaries = sweep_summary(cells)
        csv_path = out_dir / "sweep.csv"
        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["metric", "edge_m", "mean", "std", "n_offsets"])
            for s in summaries:
                writer.writerow([
                    s.metric, repr(s.edge_m),
                    "" if s.mean is None else repr(s.mean),
                    "" if s.std is None else repr(s.std),
                    s.n_offsets,
                ])
        outputs.append(csv_path)
        from .plotting import save_figure, sweep_curves_figure
        outputs.append(save_figure(sweep_curves_figure(summaries), out_dir / "sweep.svg"))
        print(f"sweep written to {csv_path}")

    write_manifest(out_dir, f"grid {args.action}", cfg, inputs, outputs, [args.seed])
    return 0


def cmd_evaluate(args) -> int:
    out_dir = _out_dir(args)
    cfg = _load_config(args)
    real = ingest_csv(args.dataset)
    inputs = [Path(args.dataset)]

    if args.preset:
        selection = MetricSelection.preset(args.preset)
    elif "selection" in cfg:
        selection = MetricSelection.from_config(cfg["selection"])
    else:
        raise ValueError(f"need --preset or a config selection; presets: {sorted(PRESETS)}")

    layers = None
    if args.layers:
        layers = load_layers(args.layers, crs=real.crs)
    grid = GridSpec(cfg["grid_edge_m"]) if "grid_edge_m" in cfg else None
    env = EvalEnvironment(
        grid=grid,
        layers=layers,
        cluster_eps_m=cfg.get("cluster_eps_m"),
        cluster_min_pts=cfg.get("cluster_min_pts", 3),
        seed=args.seed,
    )

    original = assemble_utility_vector(real, real, selection, env, model_name="original")
    vectors = {}
    for syn_path in args.syn or []:
        syn = ingest_csv(syn_path)
        inputs.append(Path(syn_path))
        name = Path(syn_path).stem
        vectors[name] = assemble_utility_vector(real, syn, selection, env, model_name=name)
    if not vectors:
        vectors = {"original": original}

    report = compare_models(vectors, original)
    outputs = emit_report(report, out_dir, _formats(args))
    write_manifest(out_dir, "evaluate", cfg, inputs, outputs, [args.seed])

    failures = [
        (name, r.metric_id, r.error)
        for name, vec in [("original", original), *vectors.items()]
        for r in vec.entries
        if r.error
    ]
    for name, mid, err in failures:
        print(f"N/A [{name}/{mid}]: {err}", file=sys.stderr)
    if failures and not args.allow_partial:
        print(f"{len(failures)} metric(s) failed; rerun with --allow-partial to accept", file=sys.stderr)
        return 1
    print(f"report written to {out_dir}")
    return 0


def _attack_outputs(out_dir: Path, result) -> list[Path]:
    json_path = out_dir / "attack.json"
    doc = {
        "scenario": result.scenario,
        "metric": result.metric,
        "n_targets": len(result.outcomes) // len(result.per_seed_accuracy),
        "per_seed_accuracy": result.per_seed_accuracy,
        "mean_accuracy": result.mean_accuracy,
        "std_accuracy": result.std_accuracy,
        "summary": result.summary(),
        "thresholds": [
            {
                "tau": t.tau,
                "member_mean": t.member_mean,
                "non_member_mean": t.non_member_mean,
                "degenerate": t.degenerate,
            }
            for t in result.thresholds
        ],
    }
    json_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")

    decisions_path = out_dir / "decisions.csv"
    with decisions_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["seed", "target_id", "truth", "alpha", "decision", "correct"])
        for o in result.outcomes:
            writer.writerow([o.seed, o.target_id, o.truth, repr(o.alpha), o.decision, int(o.correct)])

    scores_path = out_dir / "scores.csv"
    with scores_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["group", "value"])
        for o in result.outcomes:
            group = "member" if o.truth == "IN" else "non_member"
            writer.writerow([group, repr(o.alpha)])
        for t in result.thresholds:
            writer.writerow(["tau", repr(t.tau)])

    from .plotting import save_figure, threshold_histogram_figure
    members = [o.alpha for o in result.outcomes if o.truth == "IN"]
    non_members = [o.alpha for o in result.outcomes if o.truth == "OUT"]
    tau = sum(t.tau for t in result.thresholds) / len(result.thresholds)
    svg_path = save_figure(
        threshold_histogram_figure(members, non_members, tau), out_dir / "threshold.svg"
    )
    return [json_path, decisions_path, scores_path, svg_path]


def cmd_attack(args) -> int:
    out_dir = _out_dir(args)
    cfg = _load_config(args)
    dataset = ingest_csv(args.dataset)
    inputs = [Path(args.dataset)]
    gen_cfg = dict(cfg.get("generator", {}))
    gen_id = args.generator or gen_cfg.pop("id", "identity")
    grid = GridSpec(gen_cfg["cell_edge_m"]) if "cell_edge_m" in gen_cfg else None

    def factory(seed: int):
        return make_generator(gen_id, gen_cfg, grid=grid, seed=seed)

    if args.kind == "mia":
        scenario = cfg.get("scenario", "main")
        if scenario == "released_only" and args.aux:
            raise ValueError("released_only scenario forbids an --aux dataset")
        attack_cfg = AttackConfig(
            scenario=scenario,
            metric=cfg.get("metric", "frechet"),
            keep_fraction=cfg.get("keep_fraction"),
            aux_fractions=tuple(cfg.get("aux_fractions", (0.5, 0.25, 0.25))),
            n_targets=cfg.get("n_targets", 200),
            n_seeds=args.seeds or cfg.get("seeds", 4),
            seed=args.seed,
            length_filter=cfg.get("length_filter", True),
            category_weight=cfg.get("category_weight", 1.0),
        )
        fractions = tuple(cfg.get("target_fractions", (0.5, 0.25, 0.25)))
        d_train, q_target, holdout = split_dataset(dataset, SplitSpec(fractions), args.seed)
        d_aux = None
        if args.aux:
            d_aux = ingest_csv(args.aux)
            inputs.append(Path(args.aux))
        elif scenario in ("main", "masked"):
            raise ValueError(f"scenario {scenario!r} requires --aux")
        result = run_attack(d_train, q_target, holdout, factory, attack_cfg, d_aux=d_aux)
        outputs = _attack_outputs(out_dir, result)
        seeds = list(range(args.seed, args.seed + attack_cfg.n_seeds))
        write_manifest(out_dir, "attack mia", cfg, inputs, outputs, seeds)
        print(f"attack accuracy: {result.summary()}")
        return 0

    # tul
    fractions = tuple(cfg.get("fractions", (2 / 3, 1 / 3)))
    d_train, q_target = split_dataset(
        dataset, SplitSpec(fractions, ensure_user_coverage=True), args.seed
    )
    model = factory(args.seed)
    model.fit(d_train)
    s_train = model.blur(d_train)
    s_target = model.blur(q_target)
    legacy, fixed = tul_protocols(d_train, q_target, s_train, s_target)
    json_path = out_dir / "tul.json"
    json_path.write_text(json.dumps({
        "legacy": {"accuracy_real": legacy.accuracy_real, "accuracy_syn": legacy.accuracy_syn,
                   "gap_pp": legacy.gap_pp},
        "fixed": {"accuracy_real": fixed.accuracy_real, "accuracy_syn": fixed.accuracy_syn,
                  "gap_pp": fixed.gap_pp},
    }, indent=2) + "\n", encoding="utf-8")
    csv_path = out_dir / "tul.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["protocol", "accuracy_real", "accuracy_syn", "gap_pp"])
        for r in (legacy, fixed):
            writer.writerow([r.protocol, repr(r.accuracy_real), repr(r.accuracy_syn), repr(r.gap_pp)])
    write_manifest(out_dir, "attack tul", cfg, inputs, [json_path, csv_path], [args.seed])
    print(f"TUL gaps: legacy {legacy.gap_pp:.1f} pp, fixed {fixed.gap_pp:.1f} pp")
    return 0


def cmd_plot(args) -> int:
    out_dir = _out_dir(args)
    from .plotting import save_figure, threshold_histogram_figure, report_table_figure

    if args.histogram:
        members, non_members, taus = [], [], []
        with Path(args.histogram).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["group", "value"]:
                raise ValueError(f"{args.histogram}:1: expected header 'group,value'")
            for row_no, row in enumerate(reader, start=2):
                try:
                    group, value = row[0], float(row[1])
                except (IndexError, ValueError) as exc:
                    raise ValueError(f"{args.histogram}:{row_no}: malformed row {row!r}") from exc
                if group == "member":
                    members.append(value)
                elif group == "non_member":
                    non_members.append(value)
                elif group == "tau":
                    taus.append(value)
                else:
                    raise ValueError(f"{args.histogram}:{row_no}: unknown group {group!r}")
        if not members or not non_members or not taus:
            raise ValueError("histogram needs member, non_member and tau rows")
        fig = threshold_histogram_figure(members, non_members, sum(taus) / len(taus))
        out = save_figure(fig, out_dir / "plot.svg")
        inputs = [Path(args.histogram)]
    elif args.report:
        doc = json.loads(Path(args.report).read_text(encoding="utf-8"))
        report = report_from_dict(doc)
        out = save_figure(report_table_figure(report), out_dir / "plot.svg")
        inputs = [Path(args.report)]
    else:
        raise ValueError("plot needs --histogram or --report")
    write_manifest(out_dir, "plot", {}, inputs, [out], [args.seed])
    print(f"figure written to {out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--out", help="output directory (default: $TRAJEVAL_OUT or .)")
    p.add_argument("--config", help="JSON config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajeval",
        description="Utility evaluation and privacy auditing for synthetic mobility data",
    )
    parser.add_argument("--version", action="version", version=f"trajeval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="dataset statistical profile")
    p.add_argument("--dataset", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("grid", help="cell-size selection and stability sweeps")
    p.add_argument("action", choices=("select", "sweep"))
    p.add_argument("--dataset", required=True)
    p.add_argument("--syn", action="append", help="synthetic dataset (sweep)")
    _add_common(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("evaluate", help="utility-vector evaluation and report")
    p.add_argument("--dataset", required=True, help="real dataset CSV")
    p.add_argument("--syn", action="append", help="synthetic dataset CSV (repeatable)")
    p.add_argument("--preset", help=f"metric selection preset: {', '.join(sorted(PRESETS))}")
    p.add_argument("--layers", help="constraint-layers directory")
    p.add_argument("--format", help="comma-separated: json,csv,svg (default all)")
    p.add_argument("--allow-partial", action="store_true", help="exit 0 despite N/A cells")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("attack", help="membership inference / user linking audits")
    p.add_argument("kind", choices=("mia", "tul"))
    p.add_argument("--dataset", required=True)
    p.add_argument("--aux", help="auxiliary dataset CSV (main/masked MIA)")
    p.add_argument("--generator", help="generator id: identity, jitter, snap, resampler")
    p.add_argument("--seeds", type=int, help="number of attack seeds")
    _add_common(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("plot", help="render figures from emitted CSV/JSON")
    p.add_argument("--histogram", help="score histogram CSV")
    p.add_argument("--report", help="utility report JSON")
    _add_common(p)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
