import { communityColor, valueColor } from "./color.js";
import type { Viewport } from "./state.js";
import type { BuildingLayer, LayerKind, ServiceLayer } from "./types.js";

export interface RenderInputs {
  buildings: BuildingLayer;
  services: ServiceLayer;
  layer: LayerKind;
  weightedValues: (number | null)[]; // aligned with buildings.features
  selection: string | null;
  viewport: Viewport;
}

export function fitViewport(buildings: BuildingLayer, width: number, height: number): Viewport {
  let minLon = Infinity,
    minLat = Infinity,
    maxLon = -Infinity,
    maxLat = -Infinity;
  for (const f of buildings.features) {
    for (const [lon, lat] of f.ring) {
      minLon = Math.min(minLon, lon);
      minLat = Math.min(minLat, lat);
      maxLon = Math.max(maxLon, lon);
      maxLat = Math.max(maxLat, lat);
    }
  }
  if (!Number.isFinite(minLon)) return { centerLon: 0, centerLat: 0, scale: 1 };
  const centerLat = (minLat + maxLat) / 2;
  const kLat = 1 / Math.cos((centerLat * Math.PI) / 180); // degrees lat per degree lon
  const spanLon = Math.max(maxLon - minLon, 1e-6);
  const spanLat = Math.max(maxLat - minLat, 1e-6) * kLat;
  const scale = 0.9 * Math.min(width / spanLon, height / spanLat);
  return { centerLon: (minLon + maxLon) / 2, centerLat, scale };
}

function projector(viewport: Viewport, width: number, height: number) {
  const k = 1 / Math.cos((viewport.centerLat * Math.PI) / 180);
  return (lon: number, lat: number): [number, number] => [
    width / 2 + (lon - viewport.centerLon) * viewport.scale,
    height / 2 - (lat - viewport.centerLat) * viewport.scale * k,
  ];
}

function featureValue(inputs: RenderInputs, i: number): { value: number | null; color: string } {
  const f = inputs.buildings.features[i];
  const layer = inputs.layer;
  if (layer.kind === "community") {
    return { value: f.props.community, color: communityColor(f.props.community) };
  }
  let value: number | null;
  if (layer.kind === "weighted") value = inputs.weightedValues[i];
  else if (layer.kind === "redundancy") value = f.props.redundancy;
  else value = f.props.scores ? (f.props.scores[layer.name] ?? null) : null;
  return { value, color: valueColor(value) };
}

export function draw(canvas: HTMLCanvasElement, inputs: RenderInputs): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#f7f7f4";
  ctx.fillRect(0, 0, width, height);
  const project = projector(inputs.viewport, width, height);

  for (let i = 0; i < inputs.buildings.features.length; i++) {
    const f = inputs.buildings.features[i];
    const { color } = featureValue(inputs, i);
    ctx.beginPath();
    for (let k = 0; k < f.ring.length; k++) {
      const [x, y] = project(f.ring[k][0], f.ring[k][1]);
      if (k === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.closePath();
    ctx.fillStyle = color;
    ctx.fill();
    if (inputs.selection === f.id) {
      ctx.strokeStyle = "#e4572e";
      ctx.lineWidth = 2.5;
      ctx.stroke();
    } else {
      ctx.strokeStyle = "rgba(40,40,40,0.35)";
      ctx.lineWidth = 0.5;
      ctx.stroke();
    }
  }

  for (const s of inputs.services.features) {
    const [x, y] = project(s.lon, s.lat);
    ctx.beginPath();
    ctx.arc(x, y, 3, 0, 2 * Math.PI);
    ctx.fillStyle = communityColor(s.props.community);
    ctx.fill();
    ctx.strokeStyle = "#333";
    ctx.lineWidth = 0.6;
    ctx.stroke();
  }
}

/** Even-odd point-in-ring test in data coordinates. */
export function ringContains(ring: [number, number][], lon: number, lat: number): boolean {
  let inside = false;
  for (let i = 0, j = ring.length - 1; i < ring.length; j = i++) {
    const [xi, yi] = ring[i];
    const [xj, yj] = ring[j];
    if (yi > lat !== yj > lat && lon < ((xj - xi) * (lat - yi)) / (yj - yi) + xi) {
      inside = !inside;
    }
  }
  return inside;
}

/** Building under a canvas pixel, or null for empty ground. */
export function hitTest(
  inputs: RenderInputs,
  canvas: HTMLCanvasElement,
  px: number,
  py: number,
): string | null {
  const { width, height } = canvas;
  const v = inputs.viewport;
  const k = 1 / Math.cos((v.centerLat * Math.PI) / 180);
  const lon = v.centerLon + (px - width / 2) / v.scale;
  const lat = v.centerLat - (py - height / 2) / (v.scale * k);
  for (const f of inputs.buildings.features) {
    if (ringContains(f.ring, lon, lat)) return f.id;
  }
  return null;
}
