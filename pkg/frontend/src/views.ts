/** Pure HTML renderers: state in, markup out. No fetches, no globals, so the
 * whole view layer is testable without a browser. */

import type {
  ClusterSample,
  ClusterSummary,
  Metrics,
  ProjectionPoint,
  PropagateSummary,
  RecordingRow,
} from "./api.js";

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function formatPct(v: number): string {
  return `${(100 * v).toFixed(1)}%`;
}

export function formatSigned(v: number): string {
  const pct = (100 * v).toFixed(1);
  return v >= 0 ? `+${pct}%` : `${pct}%`;
}

export function labelBadge(label: ClusterSummary["label"]): string {
  return `<span class="badge badge-${label}" data-label="${label}">${label}</span>`;
}

export function renderClusterCard(
  cluster: ClusterSummary,
  samples: ClusterSample[],
): string {
  const cells = samples
    .slice(0, 9)
    .map(
      (s) => `
      <figure class="sample" title="${escapeHtml(s.recording_id)} @ ${s.start_s}s">
        <img src="${escapeHtml(s.spectrogram_url)}" alt="spectrogram ${escapeHtml(s.window_id)}" loading="lazy">
        <audio controls preload="none" src="${escapeHtml(s.audio_url)}"></audio>
      </figure>`,
    )
    .join("");
  return `
  <section class="cluster-card" data-cluster="${cluster.id}">
    <header>
      <h3>Cluster ${cluster.id}</h3>
      <span class="size">${cluster.size} windows</span>
      ${labelBadge(cluster.label)}
    </header>
    <div class="grid3x3">${cells}</div>
    <footer>
      <button data-action="label" data-cluster="${cluster.id}" data-value="call">call</button>
      <button data-action="label" data-cluster="${cluster.id}" data-value="noise">noise</button>
      <button data-action="resample" data-cluster="${cluster.id}">resample</button>
    </footer>
  </section>`;
}

export function renderPropagateBar(summary: PropagateSummary | null): string {
  const status = summary
    ? `<span class="summary">${summary.assigned} assigned, ${summary.unassigned} unassigned</span>`
    : `<span class="summary">not propagated yet</span>`;
  return `
  <div class="propagate-bar">
    <label>radius <input id="radius" type="number" step="any" placeholder="auto"></label>
    <button data-action="propagate">propagate labels</button>
    ${status}
  </div>`;
}

export function renderMetrics(metrics: Metrics | null): string {
  if (metrics === null) {
    return `<div class="metrics metrics-empty">No ground truth loaded; verdict counts only.</div>`;
  }
  return `
  <dl class="metrics">
    <div><dt>precision</dt><dd data-metric="precision">${formatPct(metrics.precision)}</dd></div>
    <div><dt>baseline</dt><dd data-metric="baseline">${formatPct(metrics.baseline_precision)}</dd></div>
    <div><dt>improvement</dt><dd data-metric="improvement">${formatSigned(metrics.precision_improvement)}</dd></div>
    <div><dt>recall</dt><dd data-metric="recall">${formatPct(metrics.recall)}</dd></div>
    <div><dt>tp/fp/fn/tn</dt><dd data-metric="counts">${metrics.tp}/${metrics.fp}/${metrics.fn}/${metrics.tn}</dd></div>
  </dl>`;
}

export function renderRecordingTable(rows: RecordingRow[]): string {
  const sorted = [...rows].sort(
    (a, b) =>
      Number(b.verdict === "positive") - Number(a.verdict === "positive") ||
      a.recording_id.localeCompare(b.recording_id),
  );
  const body = sorted
    .map(
      (r) => `
      <tr class="verdict-${r.verdict}">
        <td>${escapeHtml(r.recording_id)}</td>
        <td>${r.positive_window_count}</td>
        <td>${r.verdict}</td>
      </tr>`,
    )
    .join("");
  return `
  <table class="recordings">
    <thead><tr><th>recording</th><th>positive windows</th><th>verdict</th></tr></thead>
    <tbody>${body}</tbody>
  </table>`;
}

/** Map projection points to canvas pixel positions with a small margin. */
export function layoutProjection(
  points: ProjectionPoint[],
  width: number,
  height: number,
  margin = 12,
): { x: number; y: number; point: ProjectionPoint }[] {
  if (points.length === 0) return [];
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const xSpan = xMax - xMin || 1;
  const ySpan = yMax - yMin || 1;
  return points.map((p) => ({
    x: margin + ((p.x - xMin) / xSpan) * (width - 2 * margin),
    y: margin + ((p.y - yMin) / ySpan) * (height - 2 * margin),
    point: p,
  }));
}

const PALETTE = [
  "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
  "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295",
];

export function clusterColor(cluster: number): string {
  if (cluster < 0) return "#cccccc";
  return PALETTE[cluster % PALETTE.length] ?? "#cccccc";
}

export function renderToast(message: string, kind: "error" | "info"): string {
  return `<div class="toast toast-${kind}">${escapeHtml(message)}</div>`;
}
