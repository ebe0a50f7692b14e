/**
 * DOM wiring for the editing UI. All session logic lives in session.ts /
 * controller.ts / probe.ts; this file only reads inputs, drives the
 * controller, and re-renders the view from its state.
 */

import { ModelInfo, pngDataUrl, ServiceClient, ServiceError } from "./api.js";
import { SessionController } from "./controller.js";
import { loadProbePreviews, probeAvailability, ProbePreview } from "./probe.js";
import { comparison, currentImage } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let client: ServiceClient | null = null;
let models: ModelInfo[] = [];
let controller: SessionController | null = null;
let previews: ProbePreview[] = [];

function selectedModel(): ModelInfo | null {
  const id = el<HTMLSelectElement>("model-select").value;
  return models.find((m) => m.id === id) ?? null;
}

function showBanner(message: string): void {
  const banner = el<HTMLDivElement>("error-banner");
  banner.textContent = message;
  banner.hidden = false;
}

function clearBanner(): void {
  el<HTMLDivElement>("error-banner").hidden = true;
}

function describeError(err: unknown): string {
  if (err instanceof ServiceError) {
    return `service error ${err.status} (${err.code}): ${err.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}

async function fileToBase64(file: File): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => {
      const result = reader.result as string;
      resolve(result.split(",")[1] ?? "");
    };
    reader.onerror = () => reject(reader.error);
    reader.readAsDataURL(file);
  });
}

async function connect(): Promise<void> {
  const url = el<HTMLInputElement>("service-url").value.trim().replace(/\/$/, "");
  client = new ServiceClient(url);
  try {
    models = await client.listModels();
  } catch (err) {
    showBanner(describeError(err));
    return;
  }
  clearBanner();
  const select = el<HTMLSelectElement>("model-select");
  select.innerHTML = "";
  for (const model of models) {
    const option = document.createElement("option");
    option.value = model.id;
    option.textContent = `${model.id} (${model.kind}, K=${model.K})`;
    select.appendChild(option);
  }
  render();
}

function renderHistory(): void {
  if (!controller) return;
  const strip = el<HTMLDivElement>("history-strip");
  strip.innerHTML = "";
  controller.session.steps.forEach((step, index) => {
    const cell = document.createElement("button");
    cell.className = "history-cell" + (index === controller!.session.currentIndex ? " active" : "");
    const img = document.createElement("img");
    img.src = pngDataUrl(step.image);
    img.alt = index === 0 ? "upload" : step.instruction;
    const label = document.createElement("span");
    label.textContent = index === 0 ? "upload" : `${index}: ${step.instruction}`;
    cell.append(img, label);
    cell.addEventListener("click", () => {
      controller!.jumpTo(index);
      previews = [];
      render();
    });
    strip.appendChild(cell);
  });
  el<HTMLButtonElement>("undo-btn").disabled = !controller.canUndo;
  el<HTMLButtonElement>("redo-btn").disabled = !controller.canRedo;
}

function renderComparison(): void {
  if (!controller) return;
  const { before, after } = comparison(controller.session);
  el<HTMLImageElement>("before-img").src = pngDataUrl(before);
  el<HTMLImageElement>("after-img").src = pngDataUrl(after);
  applySlider();
}

function applySlider(): void {
  const pct = Number(el<HTMLInputElement>("compare-slider").value);
  // reveal the left pct% of the after image over the before image
  el<HTMLDivElement>("after-clip").style.width = `${pct}%`;
}

function renderWeights(): void {
  if (!controller) return;
  const chart = el<HTMLDivElement>("weights-chart");
  chart.innerHTML = "";
  const step = controller.session.steps[controller.session.currentIndex];
  if (!step || !step.weights) {
    chart.textContent = "no branch weights for this step";
    return;
  }
  step.weights.forEach((w, k) => {
    const col = document.createElement("div");
    col.className = "weight-col";
    const bar = document.createElement("div");
    bar.className = "weight-bar";
    bar.style.height = `${Math.round(w * 100)}%`;
    bar.title = w.toFixed(3);
    const label = document.createElement("span");
    label.textContent = `α${k}`;
    col.append(bar, label);
    chart.appendChild(col);
  });
}

function renderProbePanel(): void {
  const panel = el<HTMLDivElement>("probe-panel");
  const note = el<HTMLDivElement>("probe-note");
  const grid = el<HTMLDivElement>("probe-grid");
  const button = el<HTMLButtonElement>("probe-btn");
  const availability = probeAvailability(selectedModel());
  button.disabled = !availability.enabled || !controller;
  panel.classList.toggle("disabled", !availability.enabled);
  note.textContent = availability.reason ?? "";
  note.hidden = availability.enabled;
  grid.innerHTML = "";
  for (const preview of previews) {
    const cell = document.createElement("button");
    cell.className = "probe-cell";
    const img = document.createElement("img");
    img.src = pngDataUrl(preview.image);
    img.alt = `filter ${preview.k}`;
    const label = document.createElement("span");
    label.textContent = `filter ${preview.k}`;
    cell.append(img, label);
    cell.addEventListener("click", () => {
      const model = selectedModel();
      if (!controller || !model) return;
      controller.applyProbePreview(model.id, preview.k, model.K, preview.image);
      previews = [];
      render();
    });
    grid.appendChild(cell);
  }
}

function render(): void {
  const hasSession = controller !== null;
  el<HTMLButtonElement>("submit-btn").disabled =
    !hasSession || !client || (controller?.session.pending ?? false);
  el<HTMLDivElement>("workspace").hidden = !hasSession;
  if (!hasSession) return;
  renderHistory();
  renderComparison();
  renderWeights();
  renderProbePanel();
}

async function onUpload(event: Event): Promise<void> {
  const input = event.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file || !client) return;
  const image = await fileToBase64(file);
  controller = new SessionController(client, image);
  previews = [];
  clearBanner();
  render();
}

async function onSubmit(): Promise<void> {
  if (!controller) return;
  const model = selectedModel();
  const instruction = el<HTMLInputElement>("instruction-input").value;
  const mode = el<HTMLSelectElement>("mode-select").value as "fusion" | "argmax";
  clearBanner();
  render();
  try {
    await controller.submitEdit(model?.id ?? "", instruction, mode);
    el<HTMLInputElement>("instruction-input").value = "";
    previews = [];
  } catch (err) {
    showBanner(describeError(err));
  }
  render();
}

async function onProbe(): Promise<void> {
  const model = selectedModel();
  if (!controller || !client || !model) return;
  clearBanner();
  try {
    previews = await loadProbePreviews(client, model, currentImage(controller.session));
  } catch (err) {
    showBanner(describeError(err));
  }
  render();
}

export function main(): void {
  el<HTMLButtonElement>("connect-btn").addEventListener("click", () => void connect());
  el<HTMLInputElement>("file-input").addEventListener("change", (e) => void onUpload(e));
  el<HTMLButtonElement>("submit-btn").addEventListener("click", () => void onSubmit());
  el<HTMLButtonElement>("probe-btn").addEventListener("click", () => void onProbe());
  el<HTMLButtonElement>("undo-btn").addEventListener("click", () => {
    controller?.undo();
    previews = [];
    render();
  });
  el<HTMLButtonElement>("redo-btn").addEventListener("click", () => {
    controller?.redo();
    previews = [];
    render();
  });
  el<HTMLInputElement>("compare-slider").addEventListener("input", applySlider);
  render();
}

main();
