import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from cortexkit.cli import main
from cortexkit.io import load_graph_csv, load_timeseries_csv, save_timeseries_csv
from cortexkit.network import pearson, sparsify
from cortexkit.rng import SeededRng
from cortexkit.timeseries import TimeSeries, simulate_timeseries


def write_subject_manifest(tmp_path: Path, n_subjects: int = 4, t: int = 60,
                           regions: int = 6, seed: int = 0) -> Path:
    root = SeededRng(seed, "fixtures")
    entries = []
    for i in range(n_subjects):
        ts = simulate_timeseries(regions, t, root.stream(f"subject{i}"))
        path = tmp_path / f"sub{i}.csv"
        save_timeseries_csv(ts, path)
        entries.append({"subject_id": f"sub{i}", "series_path": path.name,
                        "label": i % 2, "site_id": "siteA"})
    mpath = tmp_path / "manifest.json"
    mpath.write_text(json.dumps(entries))
    return mpath


def write_dataset(tmp_path: Path, n: int = 30, dim: int = 5, gap: float = 6.0,
                  seed: int = 0) -> Path:
    rng = np.random.default_rng(seed)
    y = np.array([0, 1] * (n // 2))
    x = rng.normal(size=(n, dim)) * 0.5 + np.where(y[:, None] == 1, gap / 2, -gap / 2)
    fpath = tmp_path / "features.csv"
    fpath.write_text("\n".join(",".join(format(v, ".17g") for v in row) for row in x) + "\n")
    dpath = tmp_path / "dataset.json"
    dpath.write_text(json.dumps({"features_csv": "features.csv",
                                 "targets": y.tolist(), "task": "classification"}))
    return dpath


def run(args: list[str]) -> int:
    return main(args)


class TestAugmentCommand:
    def test_jitter_sigma_zero_outputs_match_inputs(self, tmp_path):
        manifest = write_subject_manifest(tmp_path)
        cfg = tmp_path / "aug.json"
        cfg.write_text(json.dumps({"method": "jitter", "noise_std": 0.0}))
        out = tmp_path / "out"
        assert run(["augment", "--manifest", str(manifest), "--config", str(cfg),
                    "--out", str(out), "--seed", "1"]) == 0
        for i in range(4):
            assert (out / f"sub{i}.csv").read_bytes() == (tmp_path / f"sub{i}.csv").read_bytes()

    def test_slice_lengths(self, tmp_path):
        manifest = write_subject_manifest(tmp_path, t=100)
        cfg = tmp_path / "aug.json"
        cfg.write_text(json.dumps({"method": "slice", "ratio": 0.9}))
        out = tmp_path / "out"
        assert run(["augment", "--manifest", str(manifest), "--config", str(cfg),
                    "--out", str(out), "--seed", "2"]) == 0
        for i in range(4):
            assert load_timeseries_csv(out / f"sub{i}.csv").n_timepoints == 90
        report = json.loads((out / "report.json").read_text())
        assert all(s["output_timepoints"] == 90 for s in report["subjects"])

    def test_rerun_same_seed_byte_identical(self, tmp_path):
        manifest = write_subject_manifest(tmp_path)
        cfg = tmp_path / "aug.json"
        cfg.write_text(json.dumps({"method": "jitter", "noise_std": 0.5}))
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        for out in (out1, out2):
            assert run(["augment", "--manifest", str(manifest), "--config", str(cfg),
                        "--out", str(out), "--seed", "3"]) == 0
        for i in range(4):
            assert (out1 / f"sub{i}.csv").read_bytes() == (out2 / f"sub{i}.csv").read_bytes()

    def test_jobs_parallel_matches_serial(self, tmp_path):
        manifest = write_subject_manifest(tmp_path)
        cfg = tmp_path / "aug.json"
        cfg.write_text(json.dumps({"method": "jitter", "noise_std": 0.3}))
        serial, parallel = tmp_path / "s", tmp_path / "p"
        run(["augment", "--manifest", str(manifest), "--config", str(cfg),
             "--out", str(serial), "--seed", "4"])
        run(["augment", "--manifest", str(manifest), "--config", str(cfg),
             "--out", str(parallel), "--seed", "4", "--jobs", "4"])
        for i in range(4):
            assert (serial / f"sub{i}.csv").read_bytes() == (parallel / f"sub{i}.csv").read_bytes()


class TestConstructCommand:
    def test_pearson_duplicated_region(self, tmp_path):
        x = np.random.default_rng(0).normal(size=60)
        vals = np.stack([x, x, np.random.default_rng(1).normal(size=60)], axis=1)
        save_timeseries_csv(TimeSeries(vals), tmp_path / "dup.csv")
        (tmp_path / "manifest.json").write_text(json.dumps(
            [{"subject_id": "dup", "series_path": "dup.csv"}]))
        cfg = tmp_path / "con.json"
        cfg.write_text(json.dumps({"method": "pearson", "sparsify": None}))
        out = tmp_path / "out"
        assert run(["construct", "--manifest", str(tmp_path / "manifest.json"),
                    "--config", str(cfg), "--out", str(out)]) == 0
        g = load_graph_csv(out / "dup.csv")
        assert g.adjacency[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_default_sparsify_is_30_percent(self, tmp_path):
        manifest = write_subject_manifest(tmp_path, n_subjects=1, regions=8)
        out = tmp_path / "out"
        assert run(["construct", "--manifest", str(manifest), "--out", str(out)]) == 0
        g = load_graph_csv(out / "sub0.csv")
        expected_edges = int(np.ceil(0.30 * 8 * 7 / 2))
        assert np.count_nonzero(g.adjacency) // 2 == expected_edges

    def test_solver_metadata_emitted(self, tmp_path):
        manifest = write_subject_manifest(tmp_path, n_subjects=2, regions=4, t=30)
        cfg = tmp_path / "con.json"
        cfg.write_text(json.dumps({"method": "sparse_rep", "lambda": 0.2,
                                   "sparsify": None}))
        out = tmp_path / "out"
        assert run(["construct", "--manifest", str(manifest), "--config", str(cfg),
                    "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        for entry in report["subjects"]:
            assert "converged" in entry and "iterations" in entry
            assert "final_objective" in entry


class TestFeaturesCommand:
    def build_graph_manifest(self, tmp_path) -> Path:
        manifest = write_subject_manifest(tmp_path, n_subjects=3, regions=8)
        out = tmp_path / "graphs"
        run(["construct", "--manifest", str(manifest), "--out", str(out)])
        return out / "manifest.json"

    def test_all_metrics_schema(self, tmp_path):
        gm = self.build_graph_manifest(tmp_path)
        out = tmp_path / "feat"
        assert run(["features", "--manifest", str(gm), "--out", str(out)]) == 0
        nodes = (out / "sub0.nodes.csv").read_text().splitlines()
        header = nodes[0].split(",")
        assert header == ["node", "degree", "strength", "local_efficiency",
                          "betweenness", "eigenvector_centrality", "clustering_coeff"]
        assert len(nodes) == 9  # header + 8 nodes
        graph = (out / "sub0.graph.csv").read_text().splitlines()
        assert graph[0].split(",") == ["density", "modularity", "char_path_length",
                                       "global_efficiency", "assortativity", "transitivity"]
        assert len(graph) == 2

    def test_k5_canonical_values(self, tmp_path):
        a = np.ones((5, 5)) - np.eye(5)
        from cortexkit.io import save_graph_csv
        from cortexkit.network import BrainGraph
        save_graph_csv(BrainGraph(a), tmp_path / "k5.csv")
        (tmp_path / "gm.json").write_text(json.dumps(
            [{"subject_id": "k5", "series_path": "k5.csv"}]))
        cfg = tmp_path / "sel.json"
        cfg.write_text(json.dumps({"select": ["degree", "clustering_coeff", "density",
                                              "global_efficiency"]}))
        out = tmp_path / "feat"
        assert run(["features", "--manifest", str(tmp_path / "gm.json"),
                    "--config", str(cfg), "--out", str(out)]) == 0
        rows = (out / "k5.nodes.csv").read_text().splitlines()
        for row in rows[1:]:
            _, deg, cc = row.split(",")
            assert float(deg) == 4.0 and float(cc) == 1.0
        graph_vals = (out / "k5.graph.csv").read_text().splitlines()[1].split(",")
        assert [float(v) for v in graph_vals] == [1.0, 1.0]

    def test_cli_matches_library(self, tmp_path):
        gm = self.build_graph_manifest(tmp_path)
        out = tmp_path / "feat"
        run(["features", "--manifest", str(gm), "--out", str(out)])
        from cortexkit.features import node_degree
        g = load_graph_csv(tmp_path / "graphs" / "sub1.csv")
        rows = (out / "sub1.nodes.csv").read_text().splitlines()[1:]
        cli_deg = np.array([float(r.split(",")[1]) for r in rows])
        assert np.array_equal(cli_deg, node_degree(g))


class TestMlCommand:
    def test_perfect_separable(self, tmp_path):
        dataset = write_dataset(tmp_path)
        cfg = tmp_path / "ml.json"
        cfg.write_text(json.dumps({"model": "svm", "spec": {"C": 10.0, "epochs": 40},
                                   "k_folds": 5}))
        out = tmp_path / "out"
        assert run(["ml", "--dataset", str(dataset), "--config", str(cfg),
                    "--out", str(out), "--seed", "5"]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["summary"]["accuracy"]["mean"] == pytest.approx(1.0)
        pooled = report["pooled"]
        assert pooled["confusion"][0][1] == 0 and pooled["confusion"][1][0] == 0
        assert "±" in report["formatted"]["accuracy"]

    def test_svgs_are_xml(self, tmp_path):
        dataset = write_dataset(tmp_path)
        cfg = tmp_path / "ml.json"
        cfg.write_text(json.dumps({"model": "logistic", "k_folds": 3}))
        out = tmp_path / "out"
        assert run(["ml", "--dataset", str(dataset), "--config", str(cfg),
                    "--out", str(out)]) == 0
        ET.fromstring((out / "confusion.svg").read_text())
        ET.fromstring((out / "roc.svg").read_text())

    def test_mean_std_fields(self, tmp_path):
        dataset = write_dataset(tmp_path, gap=1.0)
        cfg = tmp_path / "ml.json"
        cfg.write_text(json.dumps({"model": "knn", "spec": {"k_neighbors": 3},
                                   "k_folds": 5}))
        out = tmp_path / "out"
        run(["ml", "--dataset", str(dataset), "--config", str(cfg), "--out", str(out)])
        report = json.loads((out / "report.json").read_text())
        for metric in ("auc", "accuracy", "balanced_accuracy", "f1"):
            assert set(report["summary"][metric]) == {"mean", "std"}


class TestFedCommand:
    def write_shards(self, tmp_path, n_sites: int = 2) -> Path:
        entries = []
        for s in range(n_sites):
            write_dataset(tmp_path, n=24, gap=2.0, seed=s)
            (tmp_path / f"site{s}.json").write_text(json.dumps({
                "features_csv": "features.csv", "targets": ([0, 1] * 12),
                "task": "classification"}))
            entries.append({"site_id": f"site{s}", "dataset": f"site{s}.json",
                            "local_epochs": 2, "lr": 0.1, "batch": 8})
        mpath = tmp_path / "shards.json"
        mpath.write_text(json.dumps(entries))
        return mpath

    def test_trace_rows_and_reports(self, tmp_path):
        shards = self.write_shards(tmp_path)
        cfg = tmp_path / "fed.json"
        cfg.write_text(json.dumps({"strategy": "fedavg", "rounds": 3, "k_folds": 3,
                                   "seed": 1, "hidden": 4}))
        out = tmp_path / "out"
        assert run(["fed", "--manifest", str(shards), "--config", str(cfg),
                    "--out", str(out)]) == 0
        trace = (out / "trace.csv").read_text().splitlines()
        assert trace[0] == "round,site,loss,bytes"
        assert len(trace) - 1 == 3 * 2
        assert (out / "site_site0.json").exists()
        assert (out / "average.json").exists()

    def test_lgfedavg_bytes_less_than_fedavg(self, tmp_path):
        shards = self.write_shards(tmp_path)
        totals = {}
        for strategy in ("fedavg", "lgfedavg"):
            cfg = tmp_path / f"{strategy}.json"
            cfg.write_text(json.dumps({"strategy": strategy, "rounds": 3,
                                       "k_folds": 3, "seed": 1, "hidden": 4}))
            out = tmp_path / strategy
            run(["fed", "--manifest", str(shards), "--config", str(cfg),
                 "--out", str(out)])
            rows = (out / "trace.csv").read_text().splitlines()[1:]
            totals[strategy] = sum(int(r.split(",")[3]) for r in rows
                                   if r.startswith("2,"))
        assert totals["lgfedavg"] < totals["fedavg"]

    def test_single_one_shard_equals_cmd_ml_mlp(self, tmp_path):
        self.write_shards(tmp_path, n_sites=1)
        cfg = tmp_path / "fed.json"
        cfg.write_text(json.dumps({"strategy": "single", "rounds": 3, "k_folds": 3,
                                   "seed": 7, "hidden": 4}))
        fed_out = tmp_path / "fed_out"
        run(["fed", "--manifest", str(tmp_path / "shards.json"),
             "--config", str(cfg), "--out", str(fed_out)])
        ml_cfg = tmp_path / "ml.json"
        ml_cfg.write_text(json.dumps({"model": "mlp", "k_folds": 3,
                                      "spec": {"rounds": 3, "local_epochs": 2,
                                               "lr": 0.1, "batch": 8, "hidden": 4}}))
        ml_out = tmp_path / "ml_out"
        run(["ml", "--dataset", str(tmp_path / "site0.json"), "--config", str(ml_cfg),
             "--out", str(ml_out), "--seed", "7"])
        fed_report = json.loads((fed_out / "site_site0.json").read_text())
        ml_report = json.loads((ml_out / "report.json").read_text())
        assert fed_report["summary"] == ml_report["summary"]


class TestVizCommand:
    def test_simulated_fig_reproduction(self, tmp_path):
        out1, out2 = tmp_path / "v1", tmp_path / "v2"
        for out in (out1, out2):
            assert run(["viz", "--simulate", "10,30", "--sparsify", "50",
                        "--seed", "7", "--out", str(out)]) == 0
        for name in ("adjacency.svg", "topology.svg"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
            ET.fromstring((out1 / name).read_text())

    def test_simulation_matches_library(self, tmp_path):
        out = tmp_path / "v"
        run(["viz", "--simulate", "10,30", "--sparsify", "50", "--seed", "7",
             "--out", str(out)])
        ts = simulate_timeseries(10, 30, SeededRng(7, "viz-simulate"))
        g = sparsify(pearson(ts), 50)
        from cortexkit.svg import adjacency_heatmap_svg
        assert (out / "adjacency.svg").read_text() == adjacency_heatmap_svg(g)

    def test_edgeless_graph_topology(self, tmp_path):
        (tmp_path / "g.csv").write_text("0,0\n0,0\n")
        out = tmp_path / "v"
        assert run(["viz", "--graph", str(tmp_path / "g.csv"), "--out", str(out)]) == 0
        svg = (out / "topology.svg").read_text()
        assert "circle" in svg and "<line" not in svg


class TestExitCodes:
    def test_missing_manifest_is_input_error(self, tmp_path):
        assert run(["augment", "--manifest", str(tmp_path / "none.json"),
                    "--out", str(tmp_path / "o")]) == 1

    def test_bad_config_is_input_error(self, tmp_path):
        manifest = write_subject_manifest(tmp_path)
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"method": "warp"}))
        assert run(["augment", "--manifest", str(manifest), "--config", str(cfg),
                    "--out", str(tmp_path / "o")]) == 1

    def test_viz_without_inputs(self, tmp_path):
        assert run(["viz", "--out", str(tmp_path / "o")]) == 1


class TestGraphAugmentCommand:
    def test_node_drop_chain(self, tmp_path):
        manifest = write_subject_manifest(tmp_path, n_subjects=2, regions=10)
        graphs = tmp_path / "graphs"
        run(["construct", "--manifest", str(manifest), "--out", str(graphs)])
        cfg = tmp_path / "ga.json"
        cfg.write_text(json.dumps({"method": "node_drop", "ratio": 0.2}))
        out = tmp_path / "aug"
        assert run(["graph-augment", "--manifest", str(graphs / "manifest.json"),
                    "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
        g = load_graph_csv(out / "sub0.csv")
        assert g.n_nodes == 8


class TestPipelineCommand:
    def test_four_stage_pipeline(self, tmp_path):
        manifest = write_subject_manifest(tmp_path, n_subjects=8, regions=6, t=50)
        cfg = tmp_path / "pipe.json"
        cfg.write_text(json.dumps({"stages": [
            {"stage": "augment", "method": "jitter", "noise_std": 0.05},
            {"stage": "construct", "method": "pearson"},
            {"stage": "features",
             "select": ["degree", "strength", "clustering_coeff", "density",
                        "global_efficiency", "transitivity"]},
            {"stage": "ml", "model": "logistic", "k_folds": 4},
        ]}))
        out = tmp_path / "pipe_out"
        assert run(["pipeline", "--manifest", str(manifest), "--config", str(cfg),
                    "--out", str(out), "--seed", "11"]) == 0
        report = json.loads((out / "03_ml" / "report.json").read_text())
        assert "summary" in report

    def test_features_before_construct_rejected(self, tmp_path):
        manifest = write_subject_manifest(tmp_path, n_subjects=2)
        cfg = tmp_path / "pipe.json"
        cfg.write_text(json.dumps({"stages": [
            {"stage": "features", "select": ["degree"]},
            {"stage": "construct", "method": "pearson"},
        ]}))
        assert run(["pipeline", "--manifest", str(manifest), "--config", str(cfg),
                    "--out", str(tmp_path / "o")]) == 1
