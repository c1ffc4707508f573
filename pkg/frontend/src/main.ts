// DOM wiring for the operator console. All engine mutation goes through
// ServiceClient.resolveHoc / setThresholds; everything else is view state.

import { ServiceClient } from "./client.js";
import { b64ToFloat32, pngDataUrl } from "./decode.js";
import {
  DEFAULT_OVERLAY,
  OverlayOptions,
  composeOverlay,
  roiBounds,
} from "./overlay.js";
import { Action, ConsoleState, initialState, reduce } from "./state.js";
import {
  TauRow,
  addRow,
  changedRows,
  removeAddedRow,
  rowsFromPrefs,
  setWeight,
  validateRows,
} from "./tau.js";
import type { HocPendingData, Preview, StateSnapshot } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

let state: ConsoleState = initialState();
let overlayOptions: OverlayOptions = { ...DEFAULT_OVERLAY };
let showRoi = true;
let tauRows: TauRow[] = [];
let tauRowsForRequest: number | null = null;
let roiPolygon: [number, number][] = [];

const client = new ServiceClient(
  window.location.origin,
  (action) => {
    state = reduce(state, action);
    if (action.type === "snapshot") {
      roiPolygon = (action as { snapshot: StateSnapshot }).snapshot.roi.polygon;
    }
    render(action);
  },
  () => state.lastEventId,
);

function render(action: Action): void {
  renderHeader();
  if (action.type === "event" && action.event.type === "frame_outcome") {
    void renderCanvas(action.event.data.preview);
    renderPrefs();
    renderTimeline();
  }
  if (action.type === "snapshot") {
    renderPrefs();
    renderThresholdInputs();
  }
  renderModal();
}

function renderHeader(): void {
  const badge = el<HTMLSpanElement>("connection");
  badge.textContent = state.connection;
  badge.className = `badge ${state.connection}`;
  el<HTMLSpanElement>("frame-label").textContent = state.latestFrame
    ? `frame ${state.latestFrame.frame_id}` +
      (state.episodeDone ? " (episode done)" : "")
    : state.episodeDone
      ? "episode done"
      : "waiting for frames";
  if (state.latestFrame) {
    el<HTMLSpanElement>("similarity").textContent =
      state.latestFrame.scene_similarity.toFixed(3);
    el<HTMLSpanElement>("u-roi").textContent = state.latestFrame.u_roi.toFixed(3);
  }
  const error = el<HTMLDivElement>("service-error");
  error.textContent = state.serviceError ?? "";
  error.hidden = state.serviceError === null;
}

async function renderCanvas(preview: Preview): Promise<void> {
  const canvas = el<HTMLCanvasElement>("view");
  canvas.width = preview.width;
  canvas.height = preview.height;
  const context = canvas.getContext("2d");
  if (!context) {
    return;
  }
  const image = new Image();
  image.src = pngDataUrl(preview.image_png_b64);
  await image.decode();
  context.drawImage(image, 0, 0);
  const frame = context.getImageData(0, 0, preview.width, preview.height);
  const composed = composeOverlay(
    frame.data,
    preview.width,
    preview.height,
    overlayOptions.showPooled ? b64ToFloat32(preview.pooled_f32_b64) : null,
    overlayOptions.showUncertainty ? b64ToFloat32(preview.unc_f32_b64) : null,
    overlayOptions,
  );
  context.putImageData(new ImageData(composed, preview.width, preview.height), 0, 0);
  if (showRoi && roiPolygon.length >= 3) {
    context.strokeStyle = "#00e5ff";
    context.lineWidth = 1.5;
    context.beginPath();
    roiPolygon.forEach(([x, y], index) => {
      const px = x * preview.width;
      const py = y * preview.height;
      if (index === 0) {
        context.moveTo(px, py);
      } else {
        context.lineTo(px, py);
      }
    });
    context.closePath();
    context.stroke();
  }
}

function renderPrefs(): void {
  const list = el<HTMLUListElement>("prefs");
  list.replaceChildren(
    ...state.prefs.map(([prompt, weight]) => {
      const item = document.createElement("li");
      const sign = weight > 0 ? "positive" : weight < 0 ? "negative" : "neutral";
      item.innerHTML = `<span class="prompt">${escapeHtml(prompt)}</span>` +
        `<span class="weight ${sign}">${weight.toFixed(2)}</span>`;
      return item;
    }),
  );
}

function renderTimeline(): void {
  const list = el<HTMLUListElement>("timeline");
  list.replaceChildren(
    ...state.timeline
      .slice()
      .reverse()
      .map((entry) => {
        const item = document.createElement("li");
        item.textContent = `frame ${entry.frameId}: ${entry.label}`;
        item.className = entry.label.toLowerCase();
        return item;
      }),
  );
}

function renderThresholdInputs(): void {
  if (!state.thresholds) {
    return;
  }
  el<HTMLInputElement>("theta-scene").value = String(state.thresholds.theta_scene);
  el<HTMLInputElement>("theta-roi").value = String(state.thresholds.theta_roi);
  el<HTMLInputElement>("theta-trav").value = String(state.thresholds.theta_trav);
}

function renderModal(): void {
  const modal = el<HTMLDivElement>("hoc-modal");
  const pending = state.pendingHoc;
  if (pending === null) {
    modal.hidden = true;
    tauRowsForRequest = null;
    return;
  }
  if (tauRowsForRequest !== pending.request_id) {
    tauRows = rowsFromPrefs(pending.prefs);
    tauRowsForRequest = pending.request_id;
    void renderModalPreview(pending);
  }
  modal.hidden = false;
  el<HTMLSpanElement>("hoc-reason").textContent =
    pending.reason === "UNKNOWN_OBJECT" ? "unknown object in ROI" : "scene change";
  el<HTMLSpanElement>("hoc-frame").textContent = `frame ${pending.frame_id}`;
  el<HTMLSpanElement>("hoc-uroi").textContent = `u_ROI = ${pending.u_roi.toFixed(3)}`;
  el<HTMLSpanElement>("hoc-similarity").textContent =
    `similarity = ${pending.scene_similarity.toFixed(3)}`;
  renderTauEditor();
  const error = el<HTMLDivElement>("hoc-error");
  error.textContent = state.resolveError ?? "";
  error.hidden = state.resolveError === null;
  const offline = state.connection !== "open";
  el<HTMLButtonElement>("hoc-submit").disabled = state.resolveInFlight || offline;
  el<HTMLDivElement>("hoc-offline").hidden = !offline;
}

async function renderModalPreview(pending: HocPendingData): Promise<void> {
  const canvas = el<HTMLCanvasElement>("hoc-preview");
  const preview = pending.preview;
  const image = new Image();
  image.src = pngDataUrl(preview.image_png_b64);
  await image.decode();
  const context = canvas.getContext("2d");
  if (!context) {
    return;
  }
  if (pending.reason === "UNKNOWN_OBJECT" && roiPolygon.length >= 3) {
    // Crop to the ROI so the operator sees what tripped the gate.
    const box = roiBounds(roiPolygon, preview.width, preview.height);
    canvas.width = box.w;
    canvas.height = box.h;
    context.drawImage(image, box.x, box.y, box.w, box.h, 0, 0, box.w, box.h);
  } else {
    canvas.width = preview.width;
    canvas.height = preview.height;
    context.drawImage(image, 0, 0);
  }
}

function renderTauEditor(): void {
  const container = el<HTMLDivElement>("tau-editor");
  container.replaceChildren(
    ...tauRows.map((row, index) => {
      const line = document.createElement("div");
      line.className = "tau-row";
      const label = document.createElement("span");
      label.className = "prompt";
      label.textContent = row.prompt + (row.original === null ? " (new)" : "");
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = "-1";
      slider.max = "1";
      slider.step = "0.05";
      slider.value = String(row.weight);
      const value = document.createElement("span");
      value.className = "weight";
      value.textContent = row.weight.toFixed(2);
      slider.oninput = () => {
        tauRows = setWeight(tauRows, index, Number(slider.value));
        value.textContent = Number(slider.value).toFixed(2);
      };
      line.append(label, slider, value);
      if (row.original === null) {
        const remove = document.createElement("button");
        remove.textContent = "x";
        remove.className = "remove";
        remove.onclick = () => {
          tauRows = removeAddedRow(tauRows, index);
          renderTauEditor();
        };
        line.append(remove);
      }
      return line;
    }),
  );
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;");
}

function wireControls(): void {
  const toggle = (id: string, apply: (checked: boolean) => void) => {
    const box = el<HTMLInputElement>(id);
    box.onchange = () => {
      apply(box.checked);
      if (state.latestFrame) {
        void renderCanvas(state.latestFrame.preview);
      }
    };
  };
  toggle("layer-pooled", (checked) => {
    overlayOptions = { ...overlayOptions, showPooled: checked };
  });
  toggle("layer-unc", (checked) => {
    overlayOptions = { ...overlayOptions, showUncertainty: checked };
  });
  toggle("layer-roi", (checked) => {
    showRoi = checked;
  });

  el<HTMLButtonElement>("apply-thresholds").onclick = async () => {
    const status = el<HTMLSpanElement>("threshold-status");
    const result = await client.setThresholds({
      theta_scene: Number(el<HTMLInputElement>("theta-scene").value),
      theta_roi: Number(el<HTMLInputElement>("theta-roi").value),
      theta_trav: Number(el<HTMLInputElement>("theta-trav").value),
    });
    status.textContent = result.ok
      ? "applied at next frame"
      : `rejected: ${result.error}`;
  };

  el<HTMLButtonElement>("tau-add").onclick = () => {
    const input = el<HTMLInputElement>("tau-new-prompt");
    const prompt = input.value.trim();
    if (!prompt) {
      return;
    }
    tauRows = addRow(tauRows, prompt, 0);
    input.value = "";
    renderTauEditor();
  };

  el<HTMLButtonElement>("hoc-submit").onclick = async () => {
    const pending = state.pendingHoc;
    if (pending === null || state.resolveInFlight) {
      return;
    }
    const problem = validateRows(tauRows);
    if (problem !== null) {
      state = reduce(state, { type: "resolve_failed", message: problem });
      renderModal();
      return;
    }
    // Empty submission is legal: the engine proceeds with unchanged prefs.
    await client.resolveHoc(changedRows(tauRows), pending.request_id);
    renderModal();
  };
}

wireControls();
client.connect();
