import json

import numpy as np
import pandas as pd
import pytest

from config import Config
from conftest import clique_edges, graph
from dataset_manager import DatasetManager
from main_app import main
from views import MvagDataset


@pytest.fixture
def manifest(tmp_path, triangles):
    bridged = graph(6, clique_edges([0, 1, 2]) + clique_edges([3, 4, 5]) + [(2, 3)])
    path = graph(6, [(i, i + 1) for i in range(5)])
    ds = MvagDataset("tiny", 2, graph_views=[bridged, triangles, path], labels=np.array([0, 0, 0, 1, 1, 1]))
    return DatasetManager(Config).save_dataset(ds, tmp_path / "tiny")


def integrate(manifest, out, *extra):
    return main(["integrate", "--dataset", str(manifest), "--k", "2", "--out", str(out), "--serial", *extra])


class TestIntegrate:
    def test_equal_weights(self, manifest, tmp_path):
        assert integrate(manifest, tmp_path / "run", "--method", "equal") == 0
        payload = json.loads((tmp_path / "run" / "weights.json").read_text())
        assert payload["method"] == "equal"
        assert payload["weights"] == pytest.approx([1 / 3] * 3)
        assert (tmp_path / "run" / "laplacian.mtx").read_text().startswith("%%MatrixMarket")

    def test_sgla_plus_trace_has_r_plus_one_rows(self, manifest, tmp_path):
        assert integrate(manifest, tmp_path / "run", "--method", "sgla+") == 0
        trace = pd.read_csv(tmp_path / "run" / "trace.csv")
        assert len(trace) == 4
        assert trace["evals"].tolist() == [1, 2, 3, 4]

    def test_single_view(self, manifest, tmp_path):
        assert integrate(manifest, tmp_path / "run", "--method", "single=2") == 0
        payload = json.loads((tmp_path / "run" / "weights.json").read_text())
        assert payload["weights"] == [0.0, 1.0, 0.0]

    @pytest.mark.parametrize("method, label", [("sgla", "sgla"), ("eigengap", "eigengap-only"),
                                               ("connectivity", "connectivity-only"), ("graph-agg", "graph-agg")])
    def test_methods(self, manifest, tmp_path, method, label):
        assert integrate(manifest, tmp_path / "run", "--method", method) == 0
        payload = json.loads((tmp_path / "run" / "weights.json").read_text())
        assert payload["method"] == label
        assert min(payload["weights"]) >= 0
        assert sum(payload["weights"]) == pytest.approx(1.0, abs=1e-12)
        assert DatasetManager(Config).load_laplacian(tmp_path / "run" / "laplacian.mtx").shape == (6, 6)

    def test_restart_flag(self, manifest, tmp_path):
        assert integrate(manifest, tmp_path / "run", "--method", "sgla", "--restart", "--tmax", "3") == 0
        trace = pd.read_csv(tmp_path / "run" / "trace.csv")
        assert set(trace["iter"]) <= {1, 2, 3}
        assert trace["evals"].tolist() == list(range(1, len(trace) + 1))

    def test_safeguard_adds_one_evaluation(self, manifest, tmp_path):
        assert integrate(manifest, tmp_path / "run", "--method", "sgla+", "--safeguard") == 0
        trace = pd.read_csv(tmp_path / "run" / "trace.csv")
        assert trace["evals"].tolist() == [1, 2, 3, 4, 5]
        chosen = json.loads((tmp_path / "run" / "weights.json").read_text())["weights"]
        best = trace.loc[trace["h"].idxmin(), ["w1", "w2", "w3"]].tolist()
        assert chosen == pytest.approx(best)

    def test_missing_k(self, manifest, tmp_path, capsys):
        code = main(["integrate", "--dataset", str(manifest), "--out", str(tmp_path / "run")])
        assert code == 1
        assert "missing required --k" in capsys.readouterr().err

    def test_unknown_method(self, manifest, tmp_path, capsys):
        assert integrate(manifest, tmp_path / "run", "--method", "median") == 1
        assert "unknown --method" in capsys.readouterr().err

    def test_missing_dataset_file(self, tmp_path):
        assert integrate(tmp_path / "nowhere.json", tmp_path / "run") == 1


class TestDownstreamCommands:
    @pytest.fixture
    def laplacian(self, manifest, tmp_path):
        integrate(manifest, tmp_path / "run", "--method", "equal")
        return tmp_path / "run" / "laplacian.mtx"

    def test_cluster(self, laplacian, tmp_path):
        out = tmp_path / "pred.txt"
        assert main(["cluster", "--laplacian", str(laplacian), "--k", "2", "--out", str(out)]) == 0
        labels = DatasetManager(Config).load_labels(out)
        assert len(labels) == 6
        assert set(labels.tolist()) == {0, 1}

    def test_embed(self, laplacian, tmp_path):
        out = tmp_path / "embedding.csv"
        assert main(["embed", "--laplacian", str(laplacian), "--dim", "2", "--out", str(out)]) == 0
        assert pd.read_csv(out, header=None).shape == (6, 2)

    def test_embed_dimension_too_large(self, laplacian, tmp_path, capsys):
        code = main(["embed", "--laplacian", str(laplacian), "--dim", "6", "--out", str(tmp_path / "e.csv")])
        assert code == 1
        assert "embedding dimension" in capsys.readouterr().err

    def test_eval_identical_labels(self, tmp_path, capsys):
        labels = tmp_path / "labels.txt"
        DatasetManager(Config).save_labels([0, 0, 1, 1, 2], labels)
        out = tmp_path / "metrics.json"
        assert main(["eval", "--pred", str(labels), "--truth", str(labels), "--out", str(out)]) == 0
        assert json.loads(out.read_text()) == pytest.approx(
            {"acc": 1.0, "f1": 1.0, "nmi": 1.0, "ari": 1.0, "purity": 1.0})
        assert "acc=1.0000" in capsys.readouterr().out


class TestSynthAndSurface:
    def test_synth_writes_a_loadable_manifest(self, tmp_path):
        spec = {"n": 30, "k": 2, "seed": 3,
                "graph_views": [{"p_in": 0.6, "p_out": 0.05, "informative": [0, 1]}],
                "attribute_views": [{"informative": [0, 1], "noise": 0.5, "dim": 4}]}
        (tmp_path / "spec.json").write_text(json.dumps(spec))
        assert main(["synth", "--spec", str(tmp_path / "spec.json"), "--out", str(tmp_path / "data")]) == 0
        ds = DatasetManager(Config).load_dataset(tmp_path / "data" / "manifest.json")
        assert (ds.n, ds.k, ds.r) == (30, 2, 2)

    def test_surface(self, manifest, tmp_path):
        out = tmp_path / "surface"
        code = main(["surface", "--dataset", str(manifest), "--k", "2", "--out", str(out),
                     "--step", "0.5", "--with-surrogate", "--serial"])
        assert code == 0
        frame = pd.read_csv(out / "surface.csv")
        assert len(frame) == 6
        assert {"h", "h_theta"} <= set(frame.columns)
        assert (out / "surface.html").exists()
