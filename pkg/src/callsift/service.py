"""HTTP service exposing project state, review material, labels, and results.

All mutations (labels, propagation) are serialized through one lock; reads are
served from the on-disk project, so reloading the UI always reflects truth.
"""
from __future__ import annotations

import threading
from pathlib import Path
from urllib.parse import quote

import numpy as np
from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import dsp, pipeline
from .cluster import sample_for_review
from .errors import CallsiftError, DependencyError, NotFoundError
from .ingest import AudioClip, decode_wav, encode_wav, resample, window
from .store import Project
from .triage import UNASSIGNED, ClusterLabelMap


class LabelBody(BaseModel):
    label: str


class PropagateBody(BaseModel):
    radius: float | None = None


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def create_app(project: Project, frontend_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="callsift review service")
    write_lock = threading.Lock()

    def load_labels() -> ClusterLabelMap:
        status = project.status()
        if status.get("labeled"):
            return project.load_stage("labeled")
        return ClusterLabelMap(k=project.config.k)

    def cluster_state():
        clustered = project.load_stage("clustered")
        labels = load_labels()
        sizes: dict[int, int] = {}
        for c in clustered["assignment"].values():
            sizes[c] = sizes.get(c, 0) + 1
        return clustered, labels, sizes

    @app.exception_handler(DependencyError)
    async def _dep_handler(request, exc):
        return _error(409, "missing-stage", str(exc))

    @app.exception_handler(NotFoundError)
    async def _notfound_handler(request, exc):
        return _error(404, "not-found", str(exc))

    @app.exception_handler(CallsiftError)
    async def _generic_handler(request, exc):
        return _error(400, "bad-request", str(exc))

    @app.get("/api/project")
    def get_project():
        return {"stages": project.status(), "config": project.config.to_json()}

    @app.get("/api/clusters")
    def get_clusters():
        clustered, labels, sizes = cluster_state()
        k = clustered["model"].k
        return [
            {"id": c, "size": sizes.get(c, 0), "label": labels.label_of(c)}
            for c in range(k)
        ]

    @app.get("/api/clusters/{cluster_id}/samples")
    def get_samples(cluster_id: int, n: int = 9, seed: int = 0):
        clustered, _, _ = cluster_state()
        if not (0 <= cluster_id < clustered["model"].k):
            return _error(404, "not-found", f"no cluster {cluster_id}")
        wids = sample_for_review(clustered["assignment"], cluster_id, n=n, seed=seed)
        manifest = {m["window_id"]: m for m in project.load_stage("ingested")}
        return [
            {
                "window_id": wid,
                # window ids contain '#', which must be percent-encoded in URLs
                "spectrogram_url": f"/media/spectrogram/{quote(wid, safe='')}.png",
                "audio_url": f"/media/audio/{quote(wid, safe='')}.wav",
                "recording_id": manifest[wid]["recording_id"],
                "start_s": manifest[wid]["start_s"],
            }
            for wid in wids
        ]

    @app.post("/api/clusters/{cluster_id}/label")
    def post_label(cluster_id: int, body: LabelBody):
        if body.label not in ("call", "noise"):
            return _error(422, "bad-label", "label must be 'call' or 'noise'")
        with write_lock:
            clustered, labels, _ = cluster_state()
            if not (0 <= cluster_id < clustered["model"].k):
                return _error(404, "not-found", f"no cluster {cluster_id}")
            labels.set_label(cluster_id, body.label, annotator="webui")
            project.save_stage("labeled", labels)
        return labels.to_json()

    @app.post("/api/propagate")
    def post_propagate(body: PropagateBody):
        with write_lock:
            labels = load_labels()
            if labels.n_labeled() == 0:
                return _error(409, "no-labels", "label at least one cluster first")
            summary = pipeline.run_propagate(project, radius=body.radius)
            pipeline.run_verdict(project)
        return summary

    @app.get("/api/recordings")
    def get_recordings():
        verdicts = project.load_verdicts()
        return [
            {
                "recording_id": v.recording_id,
                "positive_window_count": v.positive_window_count,
                "verdict": v.verdict,
            }
            for v in verdicts
        ]

    @app.get("/api/metrics")
    def get_metrics():
        if not project.status().get("evaluated") or not project.metrics_path.exists():
            return _error(404, "no-truth", "no ground truth has been evaluated")
        return project.load_stage("evaluated")["metrics"].to_json()

    @app.get("/api/projection")
    def get_projection(method: str = "pca"):
        status = project.status()
        rows = None
        if status.get("projected"):
            rows = project.load_stage("projected")
            if rows and rows[0].get("method") != method:
                rows = None
        if rows is None:
            rows = pipeline.run_project2d(project, method=method)
        clustered, _, _ = cluster_state()
        prop = project.load_stage("propagated") if status.get("propagated") else {}
        out = []
        for r in rows:
            wid = r["window_id"]
            c = clustered["assignment"].get(wid, prop.get(wid, UNASSIGNED))
            out.append(
                {
                    "window_id": wid,
                    "x": r["x"],
                    "y": r["y"],
                    "cluster": c,
                    "corpus_role": r["corpus_role"],
                }
            )
        return out

    @app.get("/media/spectrogram/{window_id}.png")
    def get_spectrogram(window_id: str):
        spec = pipeline.load_spectrogram(project, window_id)
        return Response(content=dsp.render_png(spec), media_type="image/png")

    @app.get("/media/audio/{window_id}.wav")
    def get_audio(window_id: str):
        manifest = {m["window_id"]: m for m in project.load_stage("ingested")}
        if window_id not in manifest:
            return _error(404, "not-found", f"no window {window_id}")
        m = manifest[window_id]
        cfg = project.config
        path = project.corpus_dir(m["corpus_role"]) / f"{m['recording_id']}.wav"
        clip = resample(decode_wav(path.read_bytes(), m["recording_id"]), cfg.sample_rate)
        wins = {
            w.window_id: w for w in window(clip, cfg.window, corpus_role=m["corpus_role"])
        }
        w = wins[window_id]
        audio = encode_wav(AudioClip(w.samples, cfg.sample_rate, m["recording_id"]))
        return Response(content=audio, media_type="audio/wav")

    if frontend_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        frontend_dir = candidate if candidate.is_dir() else None
    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")
    return app
