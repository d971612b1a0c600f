import io

import numpy as np
import pytest
from fastapi.testclient import TestClient

from callsift import pipeline
from callsift.ingest import decode_wav
from callsift.service import create_app
from callsift.store import ProjectConfig, init_project
from callsift.synthlab import SynthSpec, gen_corpus


@pytest.fixture(scope="module")
def project(tmp_path_factory):
    """Synthetic project clustered at k=12, ready for the review loop."""
    root = tmp_path_factory.mktemp("svc")
    proj = init_project(root / "p", ProjectConfig(k=12))
    gen_corpus(
        SynthSpec(seed=2, n_reference=12, n_positive=6, n_negative=6), proj.root
    )
    pipeline.run_ingest(proj)
    pipeline.run_spectrogram(proj)
    pipeline.run_embed(proj)
    pipeline.run_cluster(proj)
    return proj


@pytest.fixture(scope="module")
def client(project):
    return TestClient(create_app(project, frontend_dir=None))


def propagation_radius(project):
    emb = project.load_stage("embedded")
    F = emb["field"].values.astype(np.float64)
    R = emb["reference"].values.astype(np.float64)
    d = np.sqrt(((F[:, None, :] - R[None, :, :]) ** 2).sum(-1))
    return float(np.median(d.min(axis=1)) * 1.2)


class TestProjectAndClusters:
    def test_project_status(self, client):
        body = client.get("/api/project").json()
        assert body["stages"]["clustered"] is True
        assert body["config"]["k"] == 12

    def test_cluster_listing_has_k_entries(self, client, project):
        clusters = client.get("/api/clusters").json()
        assert len(clusters) == 12
        assert [c["id"] for c in clusters] == list(range(12))
        sizes = sum(c["size"] for c in clusters)
        assert sizes == len(project.load_stage("embedded")["reference"])

    def test_samples_belong_to_cluster_and_resolve(self, client, project):
        clusters = [c for c in client.get("/api/clusters").json() if c["size"] > 0]
        cid = clusters[0]["id"]
        samples = client.get(f"/api/clusters/{cid}/samples?n=9&seed=0").json()
        assert 1 <= len(samples) <= 9
        assignment = project.load_stage("clustered")["assignment"]
        for s in samples:
            assert assignment[s["window_id"]] == cid
            png = client.get(s["spectrogram_url"])
            assert png.status_code == 200
            assert png.headers["content-type"] == "image/png"
            wav = client.get(s["audio_url"])
            assert wav.status_code == 200
            clip = decode_wav(wav.content)
            assert len(clip.samples) == clip.sample_rate  # one 1 s window

    def test_sample_seed_controls_selection(self, client):
        big = max(client.get("/api/clusters").json(), key=lambda c: c["size"])
        if big["size"] <= 4:
            pytest.skip("no cluster large enough to resample")
        a = client.get(f"/api/clusters/{big['id']}/samples?n=4&seed=1").json()
        b = client.get(f"/api/clusters/{big['id']}/samples?n=4&seed=1").json()
        assert a == b

    def test_unknown_cluster_404(self, client):
        r = client.get("/api/clusters/99/samples")
        assert r.status_code == 404
        assert r.json()["code"] == "not-found"


class TestLabeling:
    def test_label_and_read_your_writes(self, client):
        r = client.post("/api/clusters/3/label", json={"label": "call"})
        assert r.status_code == 200
        clusters = client.get("/api/clusters").json()
        assert clusters[3]["label"] == "call"

    def test_label_idempotent(self, client):
        first = client.post("/api/clusters/4/label", json={"label": "noise"}).json()
        second = client.post("/api/clusters/4/label", json={"label": "noise"}).json()
        assert first["entries"]["4"]["label"] == second["entries"]["4"]["label"] == "noise"
        assert client.get("/api/clusters").json()[4]["label"] == "noise"

    def test_bad_label_422(self, client):
        r = client.post("/api/clusters/0/label", json={"label": "maybe"})
        assert r.status_code == 422
        assert r.json()["code"] == "bad-label"

    def test_label_unknown_cluster_404(self, client):
        r = client.post("/api/clusters/99/label", json={"label": "call"})
        assert r.status_code == 404


class TestPropagateAndResults:
    def test_propagate_before_any_labels_409(self, tmp_path_factory):
        # fresh project with clustering but no labels
        root = tmp_path_factory.mktemp("nolabel")
        proj = init_project(root / "p", ProjectConfig(k=2))
        gen_corpus(
            SynthSpec(seed=3, n_reference=3, n_positive=2, n_negative=2), proj.root
        )
        pipeline.run_ingest(proj)
        pipeline.run_spectrogram(proj)
        pipeline.run_embed(proj)
        pipeline.run_cluster(proj, k=2)
        c = TestClient(create_app(proj, frontend_dir=None))
        r = c.post("/api/propagate", json={"radius": None})
        assert r.status_code == 409
        assert r.json()["code"] == "no-labels"

    def test_propagate_summary_and_recordings(self, client, project):
        # label every cluster call (reference corpus is clean calls)
        for cid in range(12):
            client.post(f"/api/clusters/{cid}/label", json={"label": "call"})
        r = client.post(
            "/api/propagate", json={"radius": propagation_radius(project)}
        )
        assert r.status_code == 200
        summary = r.json()
        n_field = len(project.load_stage("embedded")["field"])
        assert summary["assigned"] + summary["unassigned"] == n_field
        assert summary["assigned"] > 0

        recs = client.get("/api/recordings").json()
        assert {v["recording_id"] for v in recs} == {
            f"field{i:03d}" for i in range(12)
        }
        for v in recs:
            assert v["verdict"] == (
                "positive" if v["positive_window_count"] >= 2 else "negative"
            )

    def test_metrics_404_before_truth_then_payload(self, client, project):
        r = client.get("/api/metrics")
        assert r.status_code == 404
        assert r.json()["code"] == "no-truth"

        pipeline.run_evaluate(project, project.root / "truth.csv")
        m = client.get("/api/metrics").json()
        for key in (
            "tp",
            "fp",
            "fn",
            "tn",
            "accuracy",
            "precision",
            "recall",
            "baseline_precision",
            "precision_improvement",
        ):
            assert key in m
        assert m["tp"] + m["fp"] + m["fn"] + m["tn"] == 12
        assert m["precision_improvement"] == pytest.approx(
            m["precision"] - m["baseline_precision"]
        )

    def test_projection_rows(self, client, project):
        rows = client.get("/api/projection?method=pca").json()
        emb = project.load_stage("embedded")
        assert len(rows) == len(emb["reference"]) + len(emb["field"])
        roles = {r["corpus_role"] for r in rows}
        assert roles == {"reference", "field"}
        for r in rows:
            assert isinstance(r["cluster"], int)

    def test_media_unknown_window_404(self, client):
        assert client.get("/media/audio/nope%230000.wav").status_code == 404
        assert client.get("/media/spectrogram/nope%230000.png").status_code == 404
