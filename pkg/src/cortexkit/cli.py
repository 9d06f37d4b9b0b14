"""Batch command-line interface.

Subcommands mirror the four-stage workflow — augment, construct,
features, ml, fed — plus viz for SVG rendering and pipeline for running
a staged config end to end. Every stage is bit-reproducible under
--seed: per-subject work draws from subject-labelled RNG streams, so
--jobs parallelism cannot change results. Output files are written
atomically.

Exit codes: 0 ok, 1 input/config error, 2 internal error. Set
CORTEXKIT_LOG=DEBUG|INFO|... for progress logging on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import features as feat
from .errors import ConfigError, CortexkitError
from .fed import FedConfig, SiteShard, run_federation
from .graphaug import GraphAugmentSpec, apply_graph_augment
from .io import (
    SubjectRecord,
    atomic_write_text,
    load_graph_csv,
    load_manifest,
    load_timeseries_csv,
    save_graph_csv,
    save_timeseries_csv,
    write_json,
)
from .ml import LabeledDataset, cross_validate, evaluate, format_mean_std
from .network import ConstructSpec, construct, pearson, sparsify
from .rng import SeededRng
from .svg import adjacency_heatmap_svg, confusion_svg, roc_svg, topology_svg
from .timeseries import AugmentSpec, apply_augment, simulate_timeseries

log = logging.getLogger("cortexkit")


def _read_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _map_subjects(records, worker, jobs: int):
    if jobs <= 1:
        return [worker(rec) for rec in records]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, records))


def _need_manifest(args) -> str:
    if not getattr(args, "manifest", None):
        raise ConfigError("this command needs --manifest")
    return args.manifest


def _write_manifest(records: list[dict], out_dir: Path):
    write_json(records, out_dir / "manifest.json")


# ---------------------------------------------------------------------------
# augment

def cmd_augment(args) -> int:
    cfg = _read_config(args.config)
    spec = AugmentSpec(
        method=cfg.get("method", "jitter"),
        ratio=cfg.get("ratio", 0.9),
        noise_mean=cfg.get("noise_mean", 0.0),
        noise_std=cfg.get("noise_std", 0.0),
        rng_stream=cfg.get("rng_stream", "bold-augment"),
    )
    records = load_manifest(_need_manifest(args))
    out_dir = Path(args.out)
    root = SeededRng(args.seed, spec.rng_stream)

    def worker(rec: SubjectRecord) -> dict:
        ts = load_timeseries_csv(rec.series_path)
        augmented = apply_augment(ts, spec, root.stream(rec.subject_id))
        dest = out_dir / f"{rec.subject_id}.csv"
        save_timeseries_csv(augmented, dest)
        log.info("augmented %s: %s -> %s", rec.subject_id,
                 ts.values.shape, augmented.values.shape)
        return {
            "subject_id": rec.subject_id,
            "method": spec.method,
            "ratio": spec.ratio,
            "noise_mean": spec.noise_mean,
            "noise_std": spec.noise_std,
            "input_timepoints": ts.n_timepoints,
            "output_timepoints": augmented.n_timepoints,
            "regions": ts.n_regions,
            "series_path": dest.name,
            "label": rec.label,
            "site_id": rec.site_id,
        }

    report = _map_subjects(records, worker, args.jobs)
    write_json({"stage": "augment", "seed": args.seed, "subjects": report},
               out_dir / "report.json")
    _write_manifest(
        [{"subject_id": r["subject_id"], "series_path": r["series_path"],
          "label": r["label"], "site_id": r["site_id"]} for r in report],
        out_dir,
    )
    return 0


# ---------------------------------------------------------------------------
# construct

def cmd_construct(args) -> int:
    cfg = _read_config(args.config)
    spars = cfg.get("sparsify", {"top_percent": 30.0})
    spec = ConstructSpec(
        method=cfg.get("method", "pearson"),
        lam=cfg.get("lambda", 0.1),
        n_bins=cfg.get("n_bins"),
        ridge=cfg.get("ridge"),
        solver_tol=cfg.get("solver_tol", 1e-6),
        solver_max_iters=cfg.get("solver_max_iters", 5000),
        sparsify_percent=None if spars is None else spars.get("top_percent", 30.0),
        binarize=False if spars is None else spars.get("binarize", False),
        by_magnitude=False if spars is None else spars.get("by_magnitude", False),
    )
    records = load_manifest(_need_manifest(args))
    out_dir = Path(args.out)

    def worker(rec: SubjectRecord) -> dict:
        ts = load_timeseries_csv(rec.series_path)
        g = construct(ts, spec)
        dest = out_dir / f"{rec.subject_id}.csv"
        save_graph_csv(g, dest)
        entry = {
            "subject_id": rec.subject_id,
            "graph_path": dest.name,
            "method": spec.method,
            "n_nodes": g.n_nodes,
            "label": rec.label,
            "site_id": rec.site_id,
        }
        for key in ("converged", "iterations", "warning"):
            if key in g.meta:
                entry[key] = g.meta[key]
        if "objective_trace" in g.meta:
            entry["final_objective"] = g.meta["objective_trace"][-1]
        return entry

    report = _map_subjects(records, worker, args.jobs)
    write_json({"stage": "construct", "method": spec.method, "subjects": report},
               out_dir / "report.json")
    _write_manifest(
        [{"subject_id": r["subject_id"], "series_path": r["graph_path"],
          "label": r["label"], "site_id": r["site_id"]} for r in report],
        out_dir,
    )
    return 0



# ---------------------------------------------------------------------------
# graph augment

def cmd_graph_augment(args) -> int:
    cfg = _read_config(args.config)
    spec = GraphAugmentSpec(
        method=cfg.get("method", "node_drop"),
        ratio=cfg.get("ratio", 0.1),
        rng_stream=cfg.get("rng_stream", "graph-augment"),
    )
    records = load_manifest(_need_manifest(args))
    out_dir = Path(args.out)
    root = SeededRng(args.seed, spec.rng_stream)

    def worker(rec: SubjectRecord) -> dict:
        g = load_graph_csv(rec.series_path)
        augmented = apply_graph_augment(g, spec, root.stream(rec.subject_id))
        dest = out_dir / f"{rec.subject_id}.csv"
        save_graph_csv(augmented, dest)
        return {
            "subject_id": rec.subject_id,
            "method": spec.method,
            "ratio": spec.ratio,
            "nodes_before": g.n_nodes,
            "nodes_after": augmented.n_nodes,
            "series_path": dest.name,
            "label": rec.label,
            "site_id": rec.site_id,
        }

    report = _map_subjects(records, worker, args.jobs)
    write_json({"stage": "graph_augment", "seed": args.seed, "subjects": report},
               out_dir / "report.json")
    _write_manifest(
        [{"subject_id": r["subject_id"], "series_path": r["series_path"],
          "label": r["label"], "site_id": r["site_id"]} for r in report],
        out_dir,
    )
    return 0


# ---------------------------------------------------------------------------
# features

NODE_METRIC_FNS = {
    "degree": feat.node_degree,
    "strength": feat.node_strength,
    "local_efficiency": feat.local_efficiency,
    "betweenness": feat.betweenness,
    "eigenvector_centrality": feat.eigenvector_centrality,
    "clustering_coeff": feat.clustering_coeff,
}
GRAPH_METRIC_FNS = {
    "density": feat.density,
    "modularity": lambda g: feat.modularity(g)[0],
    "char_path_length": feat.char_path_length,
    "global_efficiency": feat.global_efficiency,
    "assortativity": feat.assortativity,
    "transitivity": feat.transitivity,
}


def _select_metrics(cfg: dict) -> tuple[list[str], list[str]]:
    selection = cfg.get("select", "all")
    if selection == "all":
        return list(NODE_METRIC_FNS), list(GRAPH_METRIC_FNS)
    node = [m for m in selection if m in NODE_METRIC_FNS]
    graph = [m for m in selection if m in GRAPH_METRIC_FNS]
    unknown = [m for m in selection if m not in NODE_METRIC_FNS and m not in GRAPH_METRIC_FNS]
    if unknown:
        raise ConfigError(f"unknown metrics in selection: {unknown}")
    return node, graph


def cmd_features(args) -> int:
    cfg = _read_config(args.config)
    node_sel, graph_sel = _select_metrics(cfg)
    records = load_manifest(_need_manifest(args))
    out_dir = Path(args.out)

    def worker(rec: SubjectRecord) -> dict:
        g = load_graph_csv(rec.series_path)
        node_cols = {m: NODE_METRIC_FNS[m](g) for m in node_sel}
        graph_vals = {m: GRAPH_METRIC_FNS[m](g) for m in graph_sel}
        lines = ["node," + ",".join(node_sel)]
        for i in range(g.n_nodes):
            lines.append(
                str(i) + "," + ",".join(format(node_cols[m][i], ".17g") for m in node_sel)
            )
        atomic_write_text(out_dir / f"{rec.subject_id}.nodes.csv", "\n".join(lines) + "\n")
        glines = [",".join(graph_sel),
                  ",".join(format(graph_vals[m], ".17g") for m in graph_sel)]
        atomic_write_text(out_dir / f"{rec.subject_id}.graph.csv", "\n".join(glines) + "\n")
        flat: list[float] = []
        for m in node_sel:
            flat.extend(float(v) for v in node_cols[m])
        flat.extend(float(graph_vals[m]) for m in graph_sel)
        return {"subject_id": rec.subject_id, "label": rec.label,
                "site_id": rec.site_id, "vector": flat}

    rows = _map_subjects(records, worker, args.jobs)
    write_json({"stage": "features", "node_metrics": node_sel,
                "graph_metrics": graph_sel,
                "subjects": [{k: r[k] for k in ("subject_id", "label", "site_id")}
                             for r in rows]},
               out_dir / "report.json")
    # combined design matrix for the ml stage
    matrix = "\n".join(",".join(format(v, ".17g") for v in r["vector"]) for r in rows) + "\n"
    atomic_write_text(out_dir / "features.csv", matrix)
    dataset = {
        "features_csv": "features.csv",
        "targets": [r["label"] for r in rows],
        "task": "classification",
        "site_ids": [r["site_id"] for r in rows],
        "subject_ids": [r["subject_id"] for r in rows],
    }
    write_json(dataset, out_dir / "dataset.json")
    return 0


# ---------------------------------------------------------------------------
# ml

def _load_dataset(path: str | Path) -> LabeledDataset:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read dataset {path}: {exc}") from exc
    fpath = Path(cfg["features_csv"])
    if not fpath.is_absolute():
        fpath = path.parent / fpath
    features = np.array([
        [float(cell) for cell in line.split(",")]
        for line in fpath.read_text().strip().splitlines()
    ])
    targets = cfg["targets"]
    if any(t is None for t in targets):
        raise ConfigError("dataset has missing targets; cannot train")
    sites = cfg.get("site_ids")
    sites = None if sites is None or all(s is None for s in sites) else [str(s) for s in sites]
    return LabeledDataset(features, np.array(targets), cfg.get("task", "classification"),
                          sites)


def cmd_ml(args) -> int:
    cfg = _read_config(args.config)
    ds = _load_dataset(args.dataset)
    model = cfg.get("model", "svm")
    result = cross_validate(
        ds, model, cfg.get("spec", {}),
        k_folds=cfg.get("k_folds", 5),
        pca_dims=cfg.get("pca_dims"),
        seed=args.seed,
    )
    out_dir = Path(args.out)
    summary = result["summary"]
    report = {
        "model": model,
        "k_folds": cfg.get("k_folds", 5),
        "pca_dims": cfg.get("pca_dims"),
        "seed": args.seed,
        "summary": summary,
        "formatted": {k: format_mean_std(v["mean"], v["std"]) for k, v in summary.items()},
        "fold_reports": [r.to_dict() for r in result["fold_reports"]],
    }
    if ds.task == "classification":
        oof = result["out_of_fold"]
        pooled = evaluate(np.array(oof["y_true"]), np.array(oof["y_score"]),
                          np.array(oof["y_pred"]), "classification")
        report["pooled"] = pooled.to_dict()
        atomic_write_text(out_dir / "confusion.svg", confusion_svg(pooled.confusion))
        atomic_write_text(out_dir / "roc.svg", roc_svg(pooled.roc_points, pooled.auc))
    write_json(report, out_dir / "report.json")
    return 0


# ---------------------------------------------------------------------------
# fed

def cmd_fed(args) -> int:
    cfg = _read_config(args.config)
    shard_entries = cfg.get("shards")
    if args.manifest:
        shard_entries = json.loads(Path(args.manifest).read_text())
    if not shard_entries:
        raise ConfigError("no shards given (config 'shards' or --manifest)")
    base = Path(args.manifest).parent if args.manifest else Path(args.config).parent
    shards = []
    for entry in shard_entries:
        dpath = Path(entry["dataset"])
        if not dpath.is_absolute():
            dpath = base / dpath
        shards.append(SiteShard(
            site_id=str(entry["site_id"]),
            dataset=_load_dataset(dpath),
            local_epochs=entry.get("local_epochs", 1),
            lr=entry.get("lr", 0.1),
            batch=entry.get("batch", 16),
        ))
    config = FedConfig(
        strategy=cfg.get("strategy", "fedavg"),
        rounds=cfg.get("rounds", 10),
        mu=cfg.get("mu", 0.0),
        moon_weight=cfg.get("moon_weight", 1.0),
        moon_temp=cfg.get("moon_temp", 0.5),
        seed=cfg.get("seed", args.seed),
        arch=cfg.get("arch", "mlp1"),
        hidden=cfg.get("hidden", 8),
        pfedme_inner_iters=cfg.get("pfedme_inner_iters", 5),
        pfedme_inner_lr=cfg.get("pfedme_inner_lr", 0.05),
    )
    result = run_federation(config, shards, k_folds=cfg.get("k_folds", 5))
    out_dir = Path(args.out)
    lines = ["round,site,loss,bytes"]
    for rnd, site, loss, total in result["trace"].rows():
        lines.append(f"{rnd},{site},{format(loss, '.17g')},{total}")
    atomic_write_text(out_dir / "trace.csv", "\n".join(lines) + "\n")
    for sid, rep in result["site_reports"].items():
        write_json({
            "site": sid,
            "strategy": config.strategy,
            "summary": rep["summary"],
            "formatted": {k: format_mean_std(v["mean"], v["std"])
                          for k, v in rep["summary"].items()},
            "fold_reports": [r.to_dict() for r in rep["fold_reports"]],
        }, out_dir / f"site_{sid}.json")
    avg = result["average"]
    write_json({
        "strategy": config.strategy,
        "summary": avg["summary"],
        "formatted": {k: format_mean_std(v["mean"], v["std"])
                      for k, v in avg["summary"].items()},
        "fold_reports": [r.to_dict() for r in avg["fold_reports"]],
    }, out_dir / "average.json")
    return 0


# ---------------------------------------------------------------------------
# viz

def cmd_viz(args) -> int:
    out_dir = Path(args.out)
    meta: dict = {"seed": args.seed}
    if args.simulate:
        n, t = (int(v) for v in args.simulate.split(","))
        rng = SeededRng(args.seed, "viz-simulate")
        ts = simulate_timeseries(n, t, rng)
        g = pearson(ts)
        if args.sparsify:
            g = sparsify(g, args.sparsify)
        meta.update({"simulated": {"regions": n, "timepoints": t},
                     "method": "pearson", "sparsify": args.sparsify})
    elif args.graph:
        g = load_graph_csv(args.graph)
        meta["graph"] = str(args.graph)
    else:
        raise ConfigError("viz needs --graph or --simulate N,T")
    heat = adjacency_heatmap_svg(g)
    topo = topology_svg(g)
    atomic_write_text(out_dir / "adjacency.svg", heat)
    atomic_write_text(out_dir / "topology.svg", topo)
    vmax = float(np.abs(g.adjacency).max()) or 1.0
    meta["color_scale"] = {"type": "diverging", "min": -vmax, "zero": "white", "max": vmax}
    write_json(meta, out_dir / "viz.json")
    return 0


# ---------------------------------------------------------------------------
# pipeline

def cmd_pipeline(args) -> int:
    cfg = _read_config(args.config)
    stages = cfg.get("stages")
    if not stages:
        raise ConfigError("pipeline config needs a 'stages' list")
    out_root = Path(args.out)
    manifest = args.manifest
    dataset_path: str | None = None
    have_graphs = False
    for i, stage_cfg in enumerate(stages):
        stage = stage_cfg.get("stage")
        if stage in ("graph_augment", "features") and not have_graphs:
            raise ConfigError(f"{stage} stage needs a preceding construct stage")
        stage_out = out_root / f"{i:02d}_{stage}"
        stage_out.mkdir(parents=True, exist_ok=True)
        cfg_path = stage_out / "_config.json"
        write_json({k: v for k, v in stage_cfg.items() if k != "stage"}, cfg_path)
        ns = argparse.Namespace(config=str(cfg_path), manifest=manifest,
                                out=str(stage_out), seed=args.seed, jobs=args.jobs,
                                dataset=dataset_path)
        if stage == "augment":
            cmd_augment(ns)
            manifest = str(stage_out / "manifest.json")
        elif stage == "construct":
            cmd_construct(ns)
            manifest = str(stage_out / "manifest.json")
            have_graphs = True
        elif stage == "graph_augment":
            cmd_graph_augment(ns)
            manifest = str(stage_out / "manifest.json")
        elif stage == "features":
            cmd_features(ns)
            dataset_path = str(stage_out / "dataset.json")
        elif stage == "ml":
            if dataset_path is None:
                raise ConfigError("ml stage needs a preceding features stage")
            ns.dataset = dataset_path
            cmd_ml(ns)
        else:
            raise ConfigError(f"unknown pipeline stage {stage!r}")
        log.info("pipeline stage %d (%s) done", i, stage)
    return 0


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cortexkit",
        description="Deterministic connectome analytics: augmentation, network "
                    "construction, graph features, ML, and federated simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest=True, dataset=False):
        if manifest:
            p.add_argument("--manifest", required=False, help="subject manifest JSON")
        if dataset:
            p.add_argument("--dataset", required=True, help="dataset JSON")
        p.add_argument("--config", help="stage config JSON")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="global seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel subject workers")

    p = sub.add_parser("augment", help="BOLD signal augmentation")
    common(p)
    p.set_defaults(fn=cmd_augment)

    p = sub.add_parser("construct", help="functional network construction")
    common(p)
    p.set_defaults(fn=cmd_construct)

    p = sub.add_parser("graph-augment", help="graph augmentation on constructed networks")
    common(p)
    p.set_defaults(fn=cmd_graph_augment)

    p = sub.add_parser("features", help="network feature extraction")
    common(p)
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("ml", help="cross-validated classification/regression")
    common(p, manifest=False, dataset=True)
    p.set_defaults(fn=cmd_ml)

    p = sub.add_parser("fed", help="multi-site federated simulation")
    common(p)
    p.set_defaults(fn=cmd_fed)

    p = sub.add_parser("viz", help="graph SVG rendering")
    common(p, manifest=False)
    p.add_argument("--graph", help="adjacency CSV to render")
    p.add_argument("--simulate", help="simulate an N,T series instead (e.g. 10,30)")
    p.add_argument("--sparsify", type=float, help="top-K%% sparsification before render")
    p.set_defaults(fn=cmd_viz)

    p = sub.add_parser("pipeline", help="run a staged pipeline config")
    common(p)
    p.set_defaults(fn=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("CORTEXKIT_LOG", "WARNING").upper()
    logging.basicConfig(stream=sys.stderr,
                        level=getattr(logging, level, logging.WARNING),
                        format="%(name)s %(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CortexkitError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - internal faults
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
