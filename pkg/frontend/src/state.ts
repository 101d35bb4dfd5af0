import type { BuildingLayer, LayerKind } from "./types.js";
import { normalizeWeights, uniformWeights, type Weights } from "./weights.js";

export interface Viewport {
  centerLon: number;
  centerLat: number;
  scale: number; // pixels per degree of longitude
}

export interface MapState {
  weights: Weights; // always normalized to sum 1
  layer: LayerKind;
  selection: string | null;
  viewport: Viewport;
}

export function initialState(layer: BuildingLayer, viewport: Viewport): MapState {
  return {
    weights: uniformWeights(layer.categories),
    layer: { kind: "weighted" },
    selection: null,
    viewport,
  };
}

export function setWeights(state: MapState, raw: Weights): MapState {
  return { ...state, weights: normalizeWeights(raw) };
}

/** Layer switches never touch the viewport. */
export function setLayer(state: MapState, layer: LayerKind): MapState {
  return { ...state, layer };
}

export function select(state: MapState, buildingId: string | null): MapState {
  return { ...state, selection: buildingId };
}

export function setViewport(state: MapState, viewport: Viewport): MapState {
  return { ...state, viewport };
}
