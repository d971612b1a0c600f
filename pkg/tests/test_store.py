import json

import numpy as np
import pytest

from callsift.cluster import KMeansModel
from callsift.embed import EmbeddingMatrix
from callsift.errors import DependencyError
from callsift.store import (
    STAGE_DEPS,
    STAGES,
    Project,
    ProjectConfig,
    init_project,
    open_project,
)
from callsift.triage import ClusterLabelMap, MetricsReport, RecordingVerdict


@pytest.fixture
def project(tmp_path):
    return init_project(tmp_path / "proj")


def mk_matrix(n=4, dim=3, prefix="w", tag="baseline-flatten"):
    gen = np.random.default_rng(0)
    return EmbeddingMatrix(
        gen.random((n, dim)).astype(np.float32),
        [f"{prefix}{i}" for i in range(n)],
        tag,
    )


class TestInitOpen:
    def test_layout_created(self, project):
        assert (project.root / "config.json").exists()
        assert (project.root / "corpus" / "reference").is_dir()
        assert (project.root / "corpus" / "field").is_dir()
        assert project.status() == {s: False for s in STAGES}

    def test_refuses_nonempty_dir(self, tmp_path):
        (tmp_path / "junk.txt").write_text("x")
        with pytest.raises(FileExistsError):
            init_project(tmp_path)

    def test_open_round_trips_config(self, tmp_path):
        cfg = ProjectConfig(k=7, backend="baseline-flatten", seed=3)
        init_project(tmp_path / "p", cfg)
        reopened = open_project(tmp_path / "p")
        assert reopened.config == cfg

    def test_open_missing_project(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            open_project(tmp_path / "nope")


class TestStageDag:
    def test_dag_covers_all_stages(self):
        assert set(STAGE_DEPS) == set(STAGES)

    def test_load_before_save_rejected(self, project):
        with pytest.raises(DependencyError):
            project.load_stage("ingested")

    def test_save_out_of_order_rejected(self, project):
        with pytest.raises(DependencyError):
            project.save_stage("embedded", {"reference": mk_matrix(), "field": mk_matrix()})

    def test_unknown_stage_rejected(self, project):
        with pytest.raises(ValueError):
            project.save_stage("mystery", None)
        with pytest.raises(ValueError):
            project.load_stage("mystery")

    def test_propagated_needs_labels(self, project):
        project.save_stage("ingested", [])
        project.save_stage(
            "spectrogrammed",
            {"manifest": [], "values": np.empty((0, 100, 100)), "window_ids": []},
        )
        project.save_stage(
            "embedded", {"reference": mk_matrix(), "field": mk_matrix(prefix="f")}
        )
        with pytest.raises(DependencyError):
            project.save_stage("propagated", {})


class TestPayloadRoundTrips:
    def seed_through_embedded(self, project):
        manifest = [
            {
                "window_id": "a#0000",
                "recording_id": "a",
                "start_s": 0.0,
                "corpus_role": "reference",
                "padded": False,
            }
        ]
        project.save_stage("ingested", manifest)
        values = np.random.default_rng(1).random((2, 100, 100)).astype(np.float32)
        project.save_stage(
            "spectrogrammed",
            {"manifest": manifest, "values": values, "window_ids": ["a#0000", "a#0001"]},
        )
        project.save_stage(
            "embedded",
            {"reference": mk_matrix(prefix="r"), "field": mk_matrix(prefix="f")},
        )
        return values

    def test_ingested(self, project):
        manifest = [{"window_id": "x#0000", "recording_id": "x", "start_s": 0.0}]
        project.save_stage("ingested", manifest)
        assert project.load_stage("ingested") == manifest
        assert project.status()["ingested"]

    def test_spectrogrammed_bitwise(self, project):
        values = self.seed_through_embedded(project)
        back = project.load_stage("spectrogrammed")
        assert back["values"].tobytes() == values.tobytes()
        assert back["window_ids"] == ["a#0000", "a#0001"]

    def test_embedded(self, project):
        self.seed_through_embedded(project)
        back = project.load_stage("embedded")
        assert back["reference"].window_ids == ["r0", "r1", "r2", "r3"]
        assert back["field"].backend_tag == "baseline-flatten"

    def test_clustered(self, project):
        self.seed_through_embedded(project)
        model = KMeansModel(np.array([[0.0, 1.0], [2.0, 3.0]]), inertia=1.5, seed=4)
        project.save_stage(
            "clustered", {"model": model, "assignment": {"r0": 0, "r1": 1}}
        )
        back = project.load_stage("clustered")
        assert back["model"].k == 2
        assert back["model"].inertia == 1.5
        assert back["assignment"] == {"r0": 0, "r1": 1}

    def test_labeled(self, project):
        self.seed_through_embedded(project)
        model = KMeansModel(np.zeros((2, 2)), inertia=0.0, seed=0)
        project.save_stage("clustered", {"model": model, "assignment": {}})
        labels = ClusterLabelMap(k=2)
        labels.set_label(0, "call", annotator="x")
        project.save_stage("labeled", labels)
        assert project.load_stage("labeled").label_of(0) == "call"

    def test_propagated_and_evaluated(self, project):
        self.seed_through_embedded(project)
        model = KMeansModel(np.zeros((2, 2)), inertia=0.0, seed=0)
        project.save_stage("clustered", {"model": model, "assignment": {}})
        labels = ClusterLabelMap(k=2)
        labels.set_label(0, "call")
        project.save_stage("labeled", labels)
        project.save_stage("propagated", {"f0": 0, "f1": -1})
        assert project.load_stage("propagated") == {"f0": 0, "f1": -1}
        verdicts = [RecordingVerdict("rec0", 2, "positive")]
        metrics = MetricsReport(1, 0, 0, 0, 1.0, 1.0, 1.0, 0.5, 0.5)
        project.save_stage("evaluated", {"verdicts": verdicts, "metrics": metrics})
        back = project.load_stage("evaluated")
        assert back["verdicts"] == verdicts
        assert back["metrics"] == metrics

    def test_verdicts_without_truth(self, project):
        self.seed_through_embedded(project)
        model = KMeansModel(np.zeros((2, 2)), inertia=0.0, seed=0)
        project.save_stage("clustered", {"model": model, "assignment": {}})
        labels = ClusterLabelMap(k=2)
        labels.set_label(0, "call")
        project.save_stage("labeled", labels)
        project.save_stage("propagated", {})
        with pytest.raises(DependencyError):
            project.load_verdicts()
        project.save_verdicts([RecordingVerdict("r", 0, "negative")])
        assert project.load_verdicts()[0].verdict == "negative"


class TestAtomicity:
    def test_interrupted_write_preserves_previous(self, project, monkeypatch):
        manifest_v1 = [{"window_id": "old"}]
        project.save_stage("ingested", manifest_v1)

        import callsift.store as store_mod

        real_replace = store_mod.os.replace

        def exploding_replace(src, dst):
            raise OSError("disk full")

        monkeypatch.setattr(store_mod.os, "replace", exploding_replace)
        with pytest.raises(OSError):
            project.save_stage("ingested", [{"window_id": "new"}])
        monkeypatch.setattr(store_mod.os, "replace", real_replace)
        assert project.load_stage("ingested") == manifest_v1
        # no stray temp files left behind
        leftovers = [p for p in project.root.iterdir() if ".tmp" in p.name]
        assert leftovers == []

    def test_status_file_is_valid_json_after_updates(self, project):
        project.save_stage("ingested", [])
        st = json.loads(project.status_path.read_text())
        assert st["ingested"] is True
        assert st["evaluated"] is False
