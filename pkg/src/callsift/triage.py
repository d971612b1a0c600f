"""Expert cluster labels, threshold-radius label propagation, verdicts, metrics."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .embed import EmbeddingMatrix
from .errors import ConfigurationError

UNASSIGNED = -1

LABELS = ("call", "noise", "unlabeled")

# a recording is positive when at least this many of its windows are positive
MIN_POSITIVE_WINDOWS = 2


@dataclass
class ClusterLabelMap:
    """cluster id -> {"label", "annotator", "timestamp"}."""

    k: int
    entries: dict[int, dict] = field(default_factory=dict)

    def label_of(self, cluster_id: int) -> str:
        entry = self.entries.get(cluster_id)
        return entry["label"] if entry else "unlabeled"

    def set_label(self, cluster_id: int, label: str, annotator: str = "") -> None:
        if not (0 <= cluster_id < self.k):
            raise ValueError(f"cluster id {cluster_id} outside [0, {self.k})")
        if label not in ("call", "noise"):
            raise ValueError(f"label must be 'call' or 'noise', got {label!r}")
        self.entries[cluster_id] = {
            "label": label,
            "annotator": annotator,
            "timestamp": time.time(),
        }

    def n_labeled(self) -> int:
        return len(self.entries)

    def to_json(self) -> dict:
        return {"k": self.k, "entries": {str(c): e for c, e in self.entries.items()}}

    @classmethod
    def from_json(cls, data: dict) -> "ClusterLabelMap":
        return cls(k=data["k"], entries={int(c): e for c, e in data["entries"].items()})


@dataclass(frozen=True)
class PropagationConfig:
    radius: float | None = None  # None => auto-calibrate
    auto_calibrate: bool = True

    def __post_init__(self):
        if self.radius is not None and self.radius <= 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class WindowVerdict:
    window_id: str
    cluster: int  # UNASSIGNED when no reference neighbor was in range
    verdict: str  # "positive" | "negative"


@dataclass(frozen=True)
class RecordingVerdict:
    recording_id: str
    positive_window_count: int
    verdict: str


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision: float
    recall: float
    baseline_precision: float
    precision_improvement: float
    precision_defined: bool = True

    def to_json(self) -> dict:
        return dict(self.__dict__)


def calibrate_radius(reference: EmbeddingMatrix | np.ndarray, nth: int = 5) -> float:
    """Median over reference points of the distance to their nth nearest neighbor."""
    X = reference.values if isinstance(reference, EmbeddingMatrix) else np.asarray(reference)
    X = X.astype(np.float64)
    if len(X) < nth + 1:
        raise ValueError(f"need at least {nth + 1} reference points, got {len(X)}")
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] - 2.0 * X @ X.T + sq[None, :]
    np.fill_diagonal(d2, np.inf)
    nth_dist = np.sqrt(np.maximum(np.sort(d2, axis=1)[:, nth - 1], 0.0))
    tau = float(np.median(nth_dist))
    if tau <= 0:
        raise ValueError("degenerate reference set: calibrated radius is 0")
    return tau


def propagate(
    field_m: EmbeddingMatrix,
    reference: EmbeddingMatrix,
    ref_clusters: np.ndarray,
    cfg: PropagationConfig = PropagationConfig(),
) -> dict[str, int]:
    """Assign each field window the modal cluster among reference points within
    radius tau; ties go to the cluster of the single nearest neighbor; windows
    with no neighbor in range stay UNASSIGNED.
    """
    if field_m.dim != reference.dim:
        raise ConfigurationError(
            f"embedding dim mismatch: field {field_m.dim} vs reference {reference.dim}"
        )
    if field_m.backend_tag != reference.backend_tag:
        raise ConfigurationError(
            f"backend mismatch: field {field_m.backend_tag!r} vs "
            f"reference {reference.backend_tag!r}"
        )
    tau = cfg.radius if cfg.radius is not None else calibrate_radius(reference)
    F = field_m.values.astype(np.float64)
    R = reference.values.astype(np.float64)
    ref_clusters = np.asarray(ref_clusters)
    ref_ids = reference.window_ids

    out: dict[str, int] = {}
    sq_r = np.einsum("ij,ij->i", R, R)
    chunk = max(1, 2_000_000 // max(len(R), 1))
    for lo in range(0, len(F), chunk):
        block = F[lo : lo + chunk]
        d2 = (
            np.einsum("ij,ij->i", block, block)[:, None]
            - 2.0 * block @ R.T
            + sq_r[None, :]
        )
        d = np.sqrt(np.maximum(d2, 0.0))
        for bi in range(len(block)):
            wid = field_m.window_ids[lo + bi]
            in_range = np.flatnonzero(d[bi] <= tau)
            if len(in_range) == 0:
                out[wid] = UNASSIGNED
                continue
            votes = np.bincount(ref_clusters[in_range])
            top = votes.max()
            winners = np.flatnonzero(votes == top)
            if len(winners) == 1:
                out[wid] = int(winners[0])
                continue
            # tie: take the cluster of the nearest neighbor among tied clusters;
            # equal distances break by lowest reference window id
            tied = in_range[np.isin(ref_clusters[in_range], winners)]
            best = min(tied, key=lambda j: (d[bi, j], ref_ids[j]))
            out[wid] = int(ref_clusters[best])
    return out


def window_verdict(
    window_id: str, cluster: int, labels: ClusterLabelMap
) -> WindowVerdict:
    """Positive iff the assigned cluster is labeled 'call'."""
    if cluster != UNASSIGNED and labels.label_of(cluster) == "call":
        return WindowVerdict(window_id, cluster, "positive")
    return WindowVerdict(window_id, cluster, "negative")


def recording_verdict(
    windows: list[WindowVerdict], recording_id: str
) -> RecordingVerdict:
    """Positive iff the recording has at least MIN_POSITIVE_WINDOWS positives."""
    n_pos = sum(1 for w in windows if w.verdict == "positive")
    verdict = "positive" if n_pos >= MIN_POSITIVE_WINDOWS else "negative"
    return RecordingVerdict(recording_id, n_pos, verdict)


def evaluate(
    verdicts: list[RecordingVerdict], truth: dict[str, bool]
) -> MetricsReport:
    """Confusion counts and precision improvement over the upstream detector.

    Every evaluated recording was upstream-positive, so the detector's
    precision is just the fraction of recordings that are truly positive.
    """
    missing = [v.recording_id for v in verdicts if v.recording_id not in truth]
    if missing:
        raise ValueError(
            f"{len(missing)} recordings missing from ground truth: "
            + ", ".join(missing[:10])
        )
    tp = fp = fn = tn = 0
    for v in verdicts:
        actual = truth[v.recording_id]
        predicted = v.verdict == "positive"
        if predicted and actual:
            tp += 1
        elif predicted:
            fp += 1
        elif actual:
            fn += 1
        else:
            tn += 1
    n = len(verdicts)
    accuracy = (tp + tn) / n if n else 0.0
    precision_defined = (tp + fp) > 0
    precision = tp / (tp + fp) if precision_defined else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    baseline = sum(1 for v in verdicts if truth[v.recording_id]) / n if n else 0.0
    return MetricsReport(
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        baseline_precision=baseline,
        precision_improvement=precision - baseline,
        precision_defined=precision_defined,
    )
