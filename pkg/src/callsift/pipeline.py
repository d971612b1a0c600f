"""Stage drivers tying the library modules to the on-disk project layout."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from . import cluster as cluster_mod
from . import dsp, project2d, triage
from .embed import BackendSpec, EmbeddingMatrix, embed_batch
from .dsp import MelSpectrogram
from .errors import NotFoundError
from .ingest import WindowConfig, decode_wav, resample, window
from .store import Project
from .synthlab import load_truth


def run_ingest(project: Project) -> list[dict]:
    """Decode, resample, and window every WAV in the corpus directories."""
    cfg = project.config
    manifest = []
    for role in ("reference", "field"):
        for path in sorted(project.corpus_dir(role).glob("*.wav")):
            clip = resample(decode_wav(path.read_bytes(), path.stem), cfg.sample_rate)
            for w in window(clip, cfg.window, corpus_role=role):
                manifest.append(
                    {
                        "window_id": w.window_id,
                        "recording_id": w.recording_id,
                        "start_s": w.start_s,
                        "corpus_role": role,
                        "padded": w.padded,
                    }
                )
    project.save_stage("ingested", manifest)
    return manifest


def _iter_windows(project: Project, wanted: set[str] | None = None):
    """Re-cut windows from the corpus WAVs per the stored manifest."""
    cfg = project.config
    manifest = project.load_stage("ingested")
    by_recording: dict[str, list[dict]] = {}
    for m in manifest:
        if wanted is None or m["window_id"] in wanted:
            by_recording.setdefault(m["recording_id"], []).append(m)
    for rid, entries in by_recording.items():
        role = entries[0]["corpus_role"]
        path = project.corpus_dir(role) / f"{rid}.wav"
        clip = resample(decode_wav(path.read_bytes(), rid), cfg.sample_rate)
        windows = {w.window_id: w for w in window(clip, cfg.window, corpus_role=role)}
        for m in entries:
            yield m, windows[m["window_id"]]


def run_spectrogram(project: Project) -> dict:
    """Compute log-mel spectrograms, score them, and keep detector-passing windows."""
    cfg = project.config
    fb = dsp.mel_filterbank(cfg.mel, cfg.stft.taper_len, cfg.sample_rate)
    manifest = []
    kept_ids, kept_values = [], []
    for m, w in _iter_windows(project):
        spec = dsp.log_mel(w, cfg.sample_rate, cfg.stft, cfg.mel, filterbank=fb)
        score = dsp.detector_score(spec.values, cfg.detector.row_factor)
        if m["corpus_role"] == "field":
            kept = score >= cfg.detector.field_min_score
        else:
            kept = score > cfg.detector.reference_min_score
        m = dict(m, score=score, kept=bool(kept))
        manifest.append(m)
        if kept:
            kept_ids.append(m["window_id"])
            kept_values.append(spec.values)
    payload = {
        "manifest": manifest,
        "values": np.array(kept_values, dtype=np.float32),
        "window_ids": kept_ids,
    }
    project.save_stage("spectrogrammed", payload)
    return payload


def load_spectrogram(project: Project, window_id: str) -> MelSpectrogram:
    data = project.load_stage("spectrogrammed")
    try:
        row = data["window_ids"].index(window_id)
    except ValueError:
        raise NotFoundError(f"no spectrogram for window {window_id!r}") from None
    return MelSpectrogram(data["values"][row].astype(np.float64), window_id)


def run_embed(project: Project, backend: BackendSpec | None = None) -> dict:
    cfg = project.config
    if backend is None:
        backend = BackendSpec(
            cfg.backend,
            checkpoint=cfg.checkpoint,
            external_path=cfg.external_embeddings,
        )
    data = project.load_stage("spectrogrammed")
    role_of = {m["window_id"]: m["corpus_role"] for m in data["manifest"]}
    payload = {}
    for role in ("reference", "field"):
        specs = [
            MelSpectrogram(data["values"][i].astype(np.float64), wid)
            for i, wid in enumerate(data["window_ids"])
            if role_of[wid] == role
        ]
        payload[role] = embed_batch(backend, specs)
    project.save_stage("embedded", payload)
    return payload


def run_cluster(project: Project, k: int | None = None, seed: int | None = None) -> dict:
    cfg = project.config
    emb = project.load_stage("embedded")
    model, labels = cluster_mod.kmeans_fit(
        emb["reference"],
        k=k if k is not None else cfg.k,
        seed=seed if seed is not None else cfg.seed,
    )
    assignment = dict(zip(emb["reference"].window_ids, (int(c) for c in labels)))
    payload = {"model": model, "assignment": assignment}
    project.save_stage("clustered", payload)
    return payload


def run_project2d(project: Project, method: str = "pca", seed: int | None = None) -> list[dict]:
    emb = project.load_stage("embedded")
    ids, roles, rows = [], [], []
    for role in ("reference", "field"):
        m = emb[role]
        ids.extend(m.window_ids)
        roles.extend([role] * len(m))
        if len(m):
            rows.append(m.values.astype(np.float64))
    X = np.vstack(rows)
    if method == "pca":
        Y = project2d.pca2(X)
    elif method == "umap":
        cfg = project2d.UmapConfig(seed=seed if seed is not None else project.config.seed)
        Y = project2d.umap2(X, cfg)
    else:
        raise ValueError(f"unknown projection method {method!r}")
    out = [
        {"window_id": wid, "x": float(x), "y": float(y), "corpus_role": role, "method": method}
        for wid, role, (x, y) in zip(ids, roles, Y)
    ]
    project.save_stage("projected", out)
    return out


def run_propagate(project: Project, radius: float | None = None) -> dict:
    emb = project.load_stage("embedded")
    clustered = project.load_stage("clustered")
    ref = emb["reference"]
    ref_clusters = np.array([clustered["assignment"][wid] for wid in ref.window_ids])
    if radius is None:
        radius = project.config.propagation_radius
    cfg = triage.PropagationConfig(radius=radius)
    assignment = triage.propagate(emb["field"], ref, ref_clusters, cfg)
    project.save_stage("propagated", assignment)
    assigned = sum(1 for c in assignment.values() if c != triage.UNASSIGNED)
    return {"assigned": assigned, "unassigned": len(assignment) - assigned}


def run_verdict(project: Project) -> list[triage.RecordingVerdict]:
    labels = project.load_stage("labeled")
    assignment = project.load_stage("propagated")
    manifest = project.load_stage("ingested")
    rec_of = {m["window_id"]: m["recording_id"] for m in manifest}
    per_rec: dict[str, list[triage.WindowVerdict]] = {
        m["recording_id"]: [] for m in manifest if m["corpus_role"] == "field"
    }
    for wid, c in assignment.items():
        per_rec[rec_of[wid]].append(triage.window_verdict(wid, c, labels))
    verdicts = [
        triage.recording_verdict(ws, rid) for rid, ws in sorted(per_rec.items())
    ]
    project.save_verdicts(verdicts)
    return verdicts


def run_evaluate(project: Project, truth_path: str | Path) -> triage.MetricsReport:
    verdicts = project.load_verdicts()
    truth = load_truth(truth_path)
    metrics = triage.evaluate(verdicts, truth)
    project.save_stage("evaluated", {"verdicts": verdicts, "metrics": metrics})
    return metrics
