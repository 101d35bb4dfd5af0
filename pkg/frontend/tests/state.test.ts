import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { parseBuildings } from "../src/artifacts.js";
import { ringContains } from "../src/render.js";
import { initialState, select, setLayer, setWeights } from "../src/state.js";

const buildingsDoc = JSON.parse(
  readFileSync(new URL("./fixtures/buildings.geojson", import.meta.url), "utf-8"),
);
const layer = parseBuildings(buildingsDoc);
const viewport = { centerLon: 11.25, centerLat: 43.77, scale: 1000 };

describe("map state", () => {
  it("starts with normalized uniform weights", () => {
    const state = initialState(layer, viewport);
    const sum = Object.values(state.weights).reduce((a, b) => a + b, 0);
    expect(sum).toBeCloseTo(1, 12);
    expect(state.layer).toEqual({ kind: "weighted" });
    expect(state.selection).toBeNull();
  });

  it("renormalizes on every weight change", () => {
    let state = initialState(layer, viewport);
    state = setWeights(state, Object.fromEntries(layer.categories.map((c) => [c, 3])));
    const sum = Object.values(state.weights).reduce((a, b) => a + b, 0);
    expect(sum).toBeCloseTo(1, 12);
  });

  it("layer switches preserve the viewport", () => {
    let state = initialState(layer, viewport);
    const before = state.viewport;
    state = setLayer(state, { kind: "redundancy" });
    state = setLayer(state, { kind: "category", name: layer.categories[0] });
    expect(state.viewport).toBe(before);
  });

  it("selection set and cleared", () => {
    let state = initialState(layer, viewport);
    state = select(state, layer.features[0].id);
    expect(state.selection).toBe(layer.features[0].id);
    state = select(state, null);
    expect(state.selection).toBeNull();
  });
});

describe("hit testing", () => {
  it("every fixture building contains its own ring centroid", () => {
    for (const f of layer.features) {
      const lon = f.ring.reduce((a, c) => a + c[0], 0) / f.ring.length;
      const lat = f.ring.reduce((a, c) => a + c[1], 0) / f.ring.length;
      expect(ringContains(f.ring, lon, lat)).toBe(true);
    }
  });

  it("points far away hit nothing", () => {
    for (const f of layer.features) {
      expect(ringContains(f.ring, 0, 0)).toBe(false);
    }
  });
});
