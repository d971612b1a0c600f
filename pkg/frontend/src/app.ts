/** Review app wiring: fetch server truth, render, handle clicks.
 *
 * The app is stateless beyond view state: every render pulls from the API, so
 * reloading the page always reproduces server truth.
 */

import { ApiError, ReviewApi } from "./api.js";
import type { ProjectionPoint, PropagateSummary } from "./api.js";
import {
  clusterColor,
  layoutProjection,
  renderClusterCard,
  renderMetrics,
  renderPropagateBar,
  renderRecordingTable,
  renderToast,
} from "./views.js";

const api = new ReviewApi();
const sampleSeeds = new Map<number, number>();
let lastPropagate: PropagateSummary | null = null;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function toast(message: string, kind: "error" | "info" = "info"): void {
  const host = el("toasts");
  host.insertAdjacentHTML("beforeend", renderToast(message, kind));
  const node = host.lastElementChild;
  setTimeout(() => node?.remove(), 4000);
}

async function renderClusters(): Promise<void> {
  const clusters = await api.clusters();
  const cards = await Promise.all(
    clusters.map(async (c) => {
      if (c.size === 0) return renderClusterCard(c, []);
      const seed = sampleSeeds.get(c.id) ?? 0;
      return renderClusterCard(c, await api.samples(c.id, 9, seed));
    }),
  );
  el("clusters").innerHTML = cards.join("");
  const unlabeled = clusters.filter((c) => c.label === "unlabeled" && c.size > 0);
  el("label-progress").textContent =
    unlabeled.length === 0
      ? "all clusters labeled"
      : `${unlabeled.length} clusters still unlabeled`;
}

async function renderResults(): Promise<void> {
  el("propagate").innerHTML = renderPropagateBar(lastPropagate);
  try {
    const rows = await api.recordings();
    el("recordings").innerHTML = renderRecordingTable(rows);
  } catch (err) {
    if (err instanceof ApiError) {
      el("recordings").innerHTML = "<p>No verdicts yet; propagate first.</p>";
    } else {
      throw err;
    }
  }
  el("metrics").innerHTML = renderMetrics(await api.metrics());
}

function drawProjection(points: ProjectionPoint[]): void {
  const canvas = el("projection") as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const role = (el("role-filter") as HTMLSelectElement).value;
  const shown = role === "all" ? points : points.filter((p) => p.corpus_role === role);
  for (const { x, y, point } of layoutProjection(shown, canvas.width, canvas.height)) {
    ctx.beginPath();
    ctx.fillStyle = clusterColor(point.cluster);
    ctx.globalAlpha = point.corpus_role === "reference" ? 1.0 : 0.55;
    ctx.arc(x, y, point.corpus_role === "reference" ? 4 : 3, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.globalAlpha = 1.0;
}

async function renderProjection(): Promise<void> {
  const method = (el("method") as HTMLSelectElement).value as "pca" | "umap";
  try {
    drawProjection(await api.projection(method));
  } catch (err) {
    toast(err instanceof Error ? err.message : String(err), "error");
  }
}

async function refreshAll(): Promise<void> {
  await renderClusters();
  await renderResults();
  await renderProjection();
}

async function handleClick(event: Event): Promise<void> {
  const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
  if (!target) return;
  const action = target.dataset.action;
  try {
    if (action === "label") {
      const id = Number(target.dataset.cluster);
      await api.setLabel(id, target.dataset.value as "call" | "noise");
      await renderClusters();
    } else if (action === "resample") {
      const id = Number(target.dataset.cluster);
      sampleSeeds.set(id, (sampleSeeds.get(id) ?? 0) + 1);
      await renderClusters();
    } else if (action === "propagate") {
      const raw = (el("radius") as HTMLInputElement).value.trim();
      const radius = raw === "" ? null : Number(raw);
      target.setAttribute("disabled", "");
      lastPropagate = await api.propagate(radius);
      toast(
        `propagated: ${lastPropagate.assigned} assigned, ${lastPropagate.unassigned} unassigned`,
      );
      await renderResults();
      await renderProjection();
    }
  } catch (err) {
    if (err instanceof ApiError) {
      toast(`${err.code}: ${err.message}`, "error");
    } else {
      toast(String(err), "error");
    }
  } finally {
    target.removeAttribute("disabled");
  }
}

export function start(): void {
  document.body.addEventListener("click", (e) => {
    void handleClick(e);
  });
  el("method").addEventListener("change", () => void renderProjection());
  el("role-filter").addEventListener("change", () => void renderProjection());
  void refreshAll();
}

if (typeof document !== "undefined" && document.getElementById("clusters")) {
  start();
}
