import numpy as np
import pytest

from callsift import pipeline
from callsift.store import ProjectConfig, init_project
from callsift.synthlab import SynthSpec, gen_corpus, load_truth
from callsift.triage import UNASSIGNED, ClusterLabelMap


@pytest.fixture(scope="module")
def project(tmp_path_factory):
    """Small corpus (4 ref, 4 pos, 4 neg) run through ingest/spectrogram/embed."""
    root = tmp_path_factory.mktemp("proj")
    proj = init_project(root / "p", ProjectConfig(k=2))
    gen_corpus(
        SynthSpec(seed=1, n_reference=4, n_positive=4, n_negative=4),
        proj.root,
    )
    pipeline.run_ingest(proj)
    pipeline.run_spectrogram(proj)
    pipeline.run_embed(proj)
    return proj


class TestIngestAndSpectrogram:
    def test_manifest_covers_both_roles(self, project):
        manifest = project.load_stage("ingested")
        roles = {m["corpus_role"] for m in manifest}
        assert roles == {"reference", "field"}
        # 3 s recordings at 1 s / 0.5 s hop -> 5 windows each, 12 recordings
        assert len(manifest) == 12 * 5

    def test_scores_recorded_and_thresholds_applied(self, project):
        data = project.load_stage("spectrogrammed")
        kept = set(data["window_ids"])
        for m in data["manifest"]:
            assert 0.0 <= m["score"] <= 1.0
            if m["corpus_role"] == "field":
                assert m["kept"] == (m["score"] >= 0.1)
            else:
                assert m["kept"] == (m["score"] > 0.3)
            assert (m["window_id"] in kept) == m["kept"]

    def test_load_single_spectrogram(self, project):
        data = project.load_stage("spectrogrammed")
        wid = data["window_ids"][0]
        spec = pipeline.load_spectrogram(project, wid)
        assert spec.values.shape == (100, 100)
        assert spec.window_id == wid

    def test_negative_recordings_contribute_no_field_windows(self, project):
        data = project.load_stage("spectrogrammed")
        truth = load_truth(project.root / "truth.csv")
        for m in data["manifest"]:
            if m["corpus_role"] == "field" and not truth[m["recording_id"]]:
                assert not m["kept"]


class TestEmbedClusterPropagate:
    def test_embeddings_cover_kept_windows(self, project):
        data = project.load_stage("spectrogrammed")
        emb = project.load_stage("embedded")
        all_ids = set(emb["reference"].window_ids) | set(emb["field"].window_ids)
        assert all_ids == set(data["window_ids"])
        assert emb["reference"].dim == 10000

    def test_full_run_to_metrics(self, project):
        pipeline.run_cluster(project, k=2, seed=0)
        clustered = project.load_stage("clustered")
        emb = project.load_stage("embedded")
        assert set(clustered["assignment"]) == set(emb["reference"].window_ids)

        # label every cluster "call": reference corpus is all clean calls
        labels = ClusterLabelMap(k=2)
        labels.set_label(0, "call")
        labels.set_label(1, "call")
        project.save_stage("labeled", labels)

        # data-driven radius: median nearest field-to-reference distance, padded
        F = emb["field"].values.astype(np.float64)
        R = emb["reference"].values.astype(np.float64)
        d = np.sqrt(
            ((F[:, None, :] - R[None, :, :]) ** 2).sum(-1)
        )
        radius = float(np.median(d.min(axis=1)) * 1.2)
        summary = pipeline.run_propagate(project, radius=radius)
        assert summary["assigned"] + summary["unassigned"] == len(F)
        assert summary["assigned"] > 0

        verdicts = pipeline.run_verdict(project)
        # every field recording gets a verdict, even windowless negatives
        assert {v.recording_id for v in verdicts} == {
            f"field{i:03d}" for i in range(8)
        }

        metrics = pipeline.run_evaluate(project, project.root / "truth.csv")
        assert metrics.tp + metrics.fp + metrics.fn + metrics.tn == 8
        assert metrics.baseline_precision == pytest.approx(0.5)
        # noise-only recordings keep no windows, so no false positives here
        assert metrics.fp == 0
        assert metrics.precision_improvement > 0

    def test_projection_rows_align(self, project):
        rows = pipeline.run_project2d(project, method="pca")
        emb = project.load_stage("embedded")
        assert len(rows) == len(emb["reference"]) + len(emb["field"])
        assert all(np.isfinite([r["x"], r["y"]]).all() for r in rows)
        assert {r["method"] for r in rows} == {"pca"}

    def test_unknown_projection_method(self, project):
        with pytest.raises(ValueError):
            pipeline.run_project2d(project, method="tsne")
