"""On-disk project directory: the single source of truth for CLI, service, UI.

Metadata lives in JSON/JSONL (human-inspectable), matrices in the AEMB1
binary format. All writes are atomic (temp file + rename) and stage
dependencies form a DAG enforced on save and load.
"""
from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp
from .cluster import DEFAULT_K, KMeansModel
from .dsp import DetectorConfig, MelConfig, StftConfig
from .embed import EmbeddingMatrix, export_embeddings, import_embeddings
from .errors import DependencyError
from .ingest import PIPELINE_SAMPLE_RATE, WindowConfig
from .triage import ClusterLabelMap, MetricsReport, RecordingVerdict

STAGES = (
    "ingested",
    "spectrogrammed",
    "embedded",
    "clustered",
    "projected",
    "labeled",
    "propagated",
    "evaluated",
)

STAGE_DEPS = {
    "ingested": (),
    "spectrogrammed": ("ingested",),
    "embedded": ("spectrogrammed",),
    "clustered": ("embedded",),
    "projected": ("embedded",),
    "labeled": ("clustered",),
    "propagated": ("embedded", "clustered", "labeled"),
    "evaluated": ("propagated",),
}


@dataclass
class ProjectConfig:
    sample_rate: int = PIPELINE_SAMPLE_RATE
    window: WindowConfig = field(default_factory=WindowConfig)
    stft: StftConfig = field(default_factory=StftConfig)
    mel: MelConfig = field(default_factory=MelConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    k: int = DEFAULT_K
    backend: str = "baseline-flatten"
    checkpoint: str | None = None
    external_embeddings: str | None = None
    propagation_radius: float | None = None
    seed: int = 0

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "ProjectConfig":
        return cls(
            sample_rate=data["sample_rate"],
            window=WindowConfig(**data["window"]),
            stft=StftConfig(**data["stft"]),
            mel=MelConfig(**data["mel"]),
            detector=DetectorConfig(**data["detector"]),
            k=data["k"],
            backend=data["backend"],
            checkpoint=data.get("checkpoint"),
            external_embeddings=data.get("external_embeddings"),
            propagation_radius=data.get("propagation_radius"),
            seed=data.get("seed", 0),
        )


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_json(path: Path, obj) -> None:
    _atomic_write_bytes(path, (json.dumps(obj, indent=2) + "\n").encode())


class Project:
    """A pipeline project rooted at a directory; see init_project / open_project."""

    def __init__(self, root: str | Path, config: ProjectConfig):
        self.root = Path(root)
        self.config = config

    # paths ---------------------------------------------------------------
    @property
    def config_path(self):
        return self.root / "config.json"

    @property
    def windows_path(self):
        return self.root / "windows.jsonl"

    @property
    def specs_path(self):
        return self.root / "specs.bin"

    @property
    def embeddings_dir(self):
        return self.root / "embeddings"

    @property
    def clusters_dir(self):
        return self.root / "clusters"

    @property
    def labels_path(self):
        return self.root / "labels.json"

    @property
    def projection_path(self):
        return self.root / "projection.jsonl"

    @property
    def propagation_path(self):
        return self.root / "field_assignments.jsonl"

    @property
    def verdicts_path(self):
        return self.root / "verdicts.json"

    @property
    def metrics_path(self):
        return self.root / "metrics.json"

    @property
    def status_path(self):
        return self.root / "status.json"

    def corpus_dir(self, role: str) -> Path:
        return self.root / "corpus" / role

    # stage status --------------------------------------------------------
    def status(self) -> dict[str, bool]:
        base = {s: False for s in STAGES}
        if self.status_path.exists():
            base.update(json.loads(self.status_path.read_text()))
        return base

    def _set_status(self, stage: str, value: bool = True) -> None:
        st = self.status()
        st[stage] = value
        _atomic_write_json(self.status_path, st)

    def require(self, *stages: str) -> None:
        st = self.status()
        for s in stages:
            if not st.get(s):
                raise DependencyError(f"stage '{s}' has not been produced yet")

    # generic stage I/O ---------------------------------------------------
    def save_stage(self, stage: str, payload) -> None:
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        self.require(*STAGE_DEPS[stage])
        saver = getattr(self, f"_save_{stage}")
        saver(payload)
        self._set_status(stage)

    def load_stage(self, stage: str):
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        self.require(stage)
        return getattr(self, f"_load_{stage}")()

    # per-stage payloads --------------------------------------------------
    def _save_ingested(self, manifest: list[dict]) -> None:
        lines = "".join(json.dumps(m) + "\n" for m in manifest)
        _atomic_write_bytes(self.windows_path, lines.encode())

    def _load_ingested(self) -> list[dict]:
        with open(self.windows_path) as f:
            return [json.loads(line) for line in f]

    def _save_spectrogrammed(self, payload: dict) -> None:
        # payload: {"manifest": [...], "values": (N,100,100), "window_ids": [...]}
        self._save_ingested(payload["manifest"])
        values = np.asarray(payload["values"], dtype=np.float32)
        flat = values.reshape(len(values), -1) if len(values) else np.empty((0, 10000))
        m = EmbeddingMatrix(flat, payload["window_ids"], backend_tag="spectrograms")
        tmp = Path(str(self.specs_path) + ".tmp")
        export_embeddings(m, tmp)
        os.replace(str(tmp) + ".manifest.jsonl", str(self.specs_path) + ".manifest.jsonl")
        os.replace(tmp, self.specs_path)

    def _load_spectrogrammed(self) -> dict:
        m = import_embeddings(self.specs_path, backend_tag="spectrograms")
        values = m.values.reshape(-1, dsp.SPEC_SIZE, dsp.SPEC_SIZE)
        return {
            "manifest": self._load_ingested(),
            "values": values,
            "window_ids": m.window_ids,
        }

    def _save_embedded(self, payload: dict[str, EmbeddingMatrix]) -> None:
        self.embeddings_dir.mkdir(exist_ok=True)
        for role, matrix in payload.items():
            tmp = self.embeddings_dir / f".{role}.aemb.tmp"
            final = self.embeddings_dir / f"{role}.aemb"
            export_embeddings(matrix, tmp)
            os.replace(str(tmp) + ".manifest.jsonl", str(final) + ".manifest.jsonl")
            os.replace(tmp, final)
            _atomic_write_json(
                self.embeddings_dir / f"{role}.json", {"backend": matrix.backend_tag}
            )

    def _load_embedded(self) -> dict[str, EmbeddingMatrix]:
        out = {}
        for role in ("reference", "field"):
            path = self.embeddings_dir / f"{role}.aemb"
            meta = json.loads((self.embeddings_dir / f"{role}.json").read_text())
            out[role] = import_embeddings(path, backend_tag=meta["backend"])
        return out

    def _save_clustered(self, payload: dict) -> None:
        # payload: {"model": KMeansModel, "assignment": {wid: cluster}}
        self.clusters_dir.mkdir(exist_ok=True)
        model: KMeansModel = payload["model"]
        cm = EmbeddingMatrix(
            model.centroids.astype(np.float32),
            [f"centroid{i}" for i in range(model.k)],
            backend_tag="centroids",
        )
        tmp = self.clusters_dir / ".centroids.aemb.tmp"
        final = self.clusters_dir / "centroids.aemb"
        export_embeddings(cm, tmp)
        os.replace(str(tmp) + ".manifest.jsonl", str(final) + ".manifest.jsonl")
        os.replace(tmp, final)
        _atomic_write_json(
            self.clusters_dir / "model.json",
            {
                "k": model.k,
                "dim": model.centroids.shape[1],
                "inertia": model.inertia,
                "seed": model.seed,
            },
        )
        lines = "".join(
            json.dumps({"window_id": wid, "cluster": int(c)}) + "\n"
            for wid, c in payload["assignment"].items()
        )
        _atomic_write_bytes(self.clusters_dir / "assignments.jsonl", lines.encode())

    def _load_clustered(self) -> dict:
        meta = json.loads((self.clusters_dir / "model.json").read_text())
        cm = import_embeddings(self.clusters_dir / "centroids.aemb")
        model = KMeansModel(
            centroids=cm.values.astype(np.float64),
            inertia=meta["inertia"],
            seed=meta["seed"],
        )
        assignment = {}
        with open(self.clusters_dir / "assignments.jsonl") as f:
            for line in f:
                rec = json.loads(line)
                assignment[rec["window_id"]] = rec["cluster"]
        return {"model": model, "assignment": assignment}

    def _save_projected(self, rows: list[dict]) -> None:
        lines = "".join(json.dumps(r) + "\n" for r in rows)
        _atomic_write_bytes(self.projection_path, lines.encode())

    def _load_projected(self) -> list[dict]:
        with open(self.projection_path) as f:
            return [json.loads(line) for line in f]

    def _save_labeled(self, labels: ClusterLabelMap) -> None:
        _atomic_write_json(self.labels_path, labels.to_json())

    def _load_labeled(self) -> ClusterLabelMap:
        return ClusterLabelMap.from_json(json.loads(self.labels_path.read_text()))

    def _save_propagated(self, assignment: dict[str, int]) -> None:
        lines = "".join(
            json.dumps({"window_id": wid, "cluster": int(c)}) + "\n"
            for wid, c in assignment.items()
        )
        _atomic_write_bytes(self.propagation_path, lines.encode())

    def _load_propagated(self) -> dict[str, int]:
        out = {}
        with open(self.propagation_path) as f:
            for line in f:
                rec = json.loads(line)
                out[rec["window_id"]] = rec["cluster"]
        return out

    def _save_evaluated(self, payload: dict) -> None:
        # payload: {"verdicts": [RecordingVerdict], "metrics": MetricsReport | None}
        _atomic_write_json(
            self.verdicts_path,
            [dataclasses.asdict(v) for v in payload["verdicts"]],
        )
        metrics = payload.get("metrics")
        if metrics is not None:
            _atomic_write_json(self.metrics_path, metrics.to_json())

    def _load_evaluated(self) -> dict:
        verdicts = [
            RecordingVerdict(**v) for v in json.loads(self.verdicts_path.read_text())
        ]
        metrics = None
        if self.metrics_path.exists():
            metrics = MetricsReport(**json.loads(self.metrics_path.read_text()))
        return {"verdicts": verdicts, "metrics": metrics}

    # verdicts may exist without ground truth; expose them directly
    def save_verdicts(self, verdicts: list[RecordingVerdict]) -> None:
        self.require("propagated")
        _atomic_write_json(
            self.verdicts_path, [dataclasses.asdict(v) for v in verdicts]
        )

    def load_verdicts(self) -> list[RecordingVerdict]:
        if not self.verdicts_path.exists():
            raise DependencyError("verdicts have not been computed yet")
        return [RecordingVerdict(**v) for v in json.loads(self.verdicts_path.read_text())]


def init_project(root: str | Path, config: ProjectConfig | None = None) -> Project:
    """Create the project layout; refuses to clobber a non-empty directory."""
    root = Path(root)
    if root.exists() and any(root.iterdir()):
        raise FileExistsError(f"refusing to initialize non-empty directory {root}")
    config = config or ProjectConfig()
    root.mkdir(parents=True, exist_ok=True)
    (root / "corpus" / "reference").mkdir(parents=True)
    (root / "corpus" / "field").mkdir(parents=True)
    (root / "embeddings").mkdir()
    (root / "clusters").mkdir()
    project = Project(root, config)
    _atomic_write_json(project.config_path, config.to_json())
    _atomic_write_json(project.status_path, {s: False for s in STAGES})
    return project


def open_project(root: str | Path) -> Project:
    root = Path(root)
    if not (root / "config.json").exists():
        raise FileNotFoundError(f"{root} is not a project (no config.json)")
    config = ProjectConfig.from_json(json.loads((root / "config.json").read_text()))
    return Project(root, config)
