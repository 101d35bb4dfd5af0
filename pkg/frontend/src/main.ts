import { loadArtifacts, type Artifacts } from "./artifacts.js";
import { renderPanel } from "./panel.js";
import { draw, fitViewport, hitTest, type RenderInputs } from "./render.js";
import {
  initialState,
  select,
  setLayer,
  setViewport,
  setWeights,
  type MapState,
} from "./state.js";
import type { LayerKind } from "./types.js";
import { adjustWeight, recomputeWeighted } from "./weights.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("data") ?? "./data";

const canvas = document.getElementById("map") as HTMLCanvasElement;
const panelEl = document.getElementById("panel") as HTMLElement;
const slidersEl = document.getElementById("sliders") as HTMLElement;
const layersEl = document.getElementById("layers") as HTMLElement;
const bannerEl = document.getElementById("banner") as HTMLElement;

let artifacts: Artifacts | null = null;
let state: MapState | null = null;
let weightedValues: (number | null)[] = [];
let frameQueued = false;

function scheduleDraw(): void {
  if (frameQueued) return;
  frameQueued = true;
  requestAnimationFrame(() => {
    frameQueued = false;
    if (!artifacts || !state) return;
    const inputs: RenderInputs = {
      buildings: artifacts.buildings,
      services: artifacts.services,
      layer: state.layer,
      weightedValues,
      selection: state.selection,
      viewport: state.viewport,
    };
    draw(canvas, inputs);
  });
}

function refreshWeighted(): void {
  if (!artifacts || !state) return;
  weightedValues = recomputeWeighted(artifacts.buildings.features, state.weights);
}

function buildSliders(): void {
  if (!artifacts || !state) return;
  slidersEl.innerHTML = "";
  for (const cat of artifacts.buildings.categories) {
    const row = document.createElement("label");
    row.className = "slider-row";
    const name = document.createElement("span");
    name.textContent = cat.replace(/_/g, " ");
    const input = document.createElement("input");
    input.type = "range";
    input.min = "0";
    input.max = "1";
    input.step = "0.01";
    input.value = String(state.weights[cat]);
    const value = document.createElement("em");
    value.textContent = state.weights[cat].toFixed(2);
    input.addEventListener("input", () => {
      if (!state) return;
      state = setWeights(state, adjustWeight(state.weights, cat, Number(input.value)));
      refreshWeighted();
      syncSliderLabels();
      renderPanel(panelEl, artifacts!.buildings, state.weights, state.selection);
      scheduleDraw();
    });
    row.append(name, input, value);
    slidersEl.append(row);
  }
}

function syncSliderLabels(): void {
  if (!artifacts || !state) return;
  const rows = slidersEl.querySelectorAll(".slider-row");
  artifacts.buildings.categories.forEach((cat, i) => {
    const row = rows[i];
    const input = row.querySelector("input") as HTMLInputElement;
    const em = row.querySelector("em") as HTMLElement;
    input.value = String(state!.weights[cat]);
    em.textContent = state!.weights[cat].toFixed(2);
  });
}

function buildLayerPicker(): void {
  if (!artifacts || !state) return;
  const options: { label: string; layer: LayerKind; enabled: boolean }[] = [
    { label: "weighted index", layer: { kind: "weighted" }, enabled: true },
    ...artifacts.buildings.categories.map((name) => ({
      label: name.replace(/_/g, " "),
      layer: { kind: "category", name } as LayerKind,
      enabled: true,
    })),
    {
      label: "community",
      layer: { kind: "community" },
      enabled: artifacts.buildings.hasCommunities,
    },
    {
      label: "redundancy",
      layer: { kind: "redundancy" },
      enabled: artifacts.buildings.hasRedundancy,
    },
  ];
  layersEl.innerHTML = "";
  options.forEach((opt, i) => {
    const row = document.createElement("label");
    row.className = "layer-row";
    const input = document.createElement("input");
    input.type = "radio";
    input.name = "layer";
    input.checked = i === 0;
    input.disabled = !opt.enabled;
    input.addEventListener("change", () => {
      if (!state) return;
      state = setLayer(state, opt.layer); // viewport untouched
      scheduleDraw();
    });
    const name = document.createElement("span");
    name.textContent = opt.label + (opt.enabled ? "" : " (unavailable)");
    row.append(input, name);
    layersEl.append(row);
  });
}

function wireCanvas(): void {
  let dragging = false;
  let moved = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("mousedown", (ev) => {
    dragging = true;
    moved = false;
    lastX = ev.offsetX;
    lastY = ev.offsetY;
  });
  canvas.addEventListener("mousemove", (ev) => {
    if (!dragging || !state) return;
    const dx = ev.offsetX - lastX;
    const dy = ev.offsetY - lastY;
    if (Math.abs(dx) + Math.abs(dy) > 2) moved = true;
    lastX = ev.offsetX;
    lastY = ev.offsetY;
    const v = state.viewport;
    const k = 1 / Math.cos((v.centerLat * Math.PI) / 180);
    state = setViewport(state, {
      centerLon: v.centerLon - dx / v.scale,
      centerLat: v.centerLat + dy / (v.scale * k),
      scale: v.scale,
    });
    scheduleDraw();
  });
  window.addEventListener("mouseup", (ev) => {
    if (!dragging) return;
    dragging = false;
    if (moved || !artifacts || !state) return;
    const rect = canvas.getBoundingClientRect();
    const id = hitTest(
      {
        buildings: artifacts.buildings,
        services: artifacts.services,
        layer: state.layer,
        weightedValues,
        selection: state.selection,
        viewport: state.viewport,
      },
      canvas,
      ev.clientX - rect.left,
      ev.clientY - rect.top,
    );
    state = select(state, id);
    renderPanel(panelEl, artifacts.buildings, state.weights, state.selection);
    scheduleDraw();
  });
  canvas.addEventListener("wheel", (ev) => {
    if (!state) return;
    ev.preventDefault();
    const factor = ev.deltaY < 0 ? 1.2 : 1 / 1.2;
    const v = state.viewport;
    state = setViewport(state, { ...v, scale: v.scale * factor });
    scheduleDraw();
  });
}

async function start(): Promise<void> {
  try {
    artifacts = await loadArtifacts(`${base}/buildings.geojson`, `${base}/services.geojson`);
  } catch (err) {
    bannerEl.textContent = String(err instanceof Error ? err.message : err);
    bannerEl.style.display = "block";
    return;
  }
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  state = initialState(
    artifacts.buildings,
    fitViewport(artifacts.buildings, canvas.width, canvas.height),
  );
  refreshWeighted();
  buildSliders();
  buildLayerPicker();
  wireCanvas();
  renderPanel(panelEl, artifacts.buildings, state.weights, null);
  scheduleDraw();
}

void start();
