import { readFileSync } from "node:fs";
import { describe, expect, it, vi } from "vitest";

import { loadArtifacts, parseBuildings, parseServices } from "../src/artifacts.js";

const buildingsDoc = JSON.parse(
  readFileSync(new URL("./fixtures/buildings.geojson", import.meta.url), "utf-8"),
);
const servicesDoc = JSON.parse(
  readFileSync(new URL("./fixtures/services.geojson", import.meta.url), "utf-8"),
);

describe("parseBuildings", () => {
  it("loads every fixture feature", () => {
    const layer = parseBuildings(buildingsDoc);
    expect(layer.features.length).toBe(buildingsDoc.features.length);
    expect(layer.skipped).toBe(0);
    expect(layer.categories.length).toBe(6);
    expect(layer.hasRedundancy).toBe(true);
    expect(layer.hasCommunities).toBe(true);
  });

  it("skips malformed features with a count", () => {
    const doc = {
      type: "FeatureCollection",
      features: [
        ...buildingsDoc.features.slice(0, 3),
        { type: "Feature", geometry: null, properties: { id: "broken" } },
        { type: "Feature", geometry: { type: "Point", coordinates: [0, 0] }, properties: { id: "p" } },
        { type: "Feature", geometry: buildingsDoc.features[0].geometry, properties: {} },
      ],
    };
    const layer = parseBuildings(doc);
    expect(layer.features.length).toBe(3);
    expect(layer.skipped).toBe(3);
  });

  it("tolerates a missing redundancy field and disables that layer", () => {
    const doc = {
      type: "FeatureCollection",
      features: buildingsDoc.features.map((f: any) => ({
        ...f,
        properties: { ...f.properties, redundancy: undefined },
      })),
    };
    const layer = parseBuildings(doc);
    expect(layer.features.length).toBe(buildingsDoc.features.length);
    expect(layer.hasRedundancy).toBe(false);
    expect(layer.hasCommunities).toBe(true);
  });

  it("empty collection yields an empty layer without crashing", () => {
    const layer = parseBuildings({ type: "FeatureCollection", features: [] });
    expect(layer.features).toEqual([]);
    expect(layer.categories).toEqual([]);
  });

  it("excluded buildings carry null scores and flags", () => {
    const layer = parseBuildings(buildingsDoc);
    const excluded = layer.features.filter((f) => f.props.excluded);
    expect(excluded.length).toBeGreaterThan(0);
    for (const f of excluded) {
      expect(f.props.scores).toBeNull();
      expect(f.props.index).toBeNull();
      expect(f.props.reason).not.toBe("");
    }
  });
});

describe("parseServices", () => {
  it("loads fixture services with communities and exclusive populations", () => {
    const layer = parseServices(servicesDoc);
    expect(layer.features.length).toBe(servicesDoc.features.length);
    expect(layer.features.some((s) => s.props.community !== null)).toBe(true);
    expect(layer.features.some((s) => s.props.exclusive_population > 0)).toBe(true);
  });
});

describe("loadArtifacts", () => {
  it("fetches and parses both layers", async () => {
    const fetcher = vi.fn(async (url: string) => ({
      ok: true,
      status: 200,
      json: async () => (url.includes("buildings") ? buildingsDoc : servicesDoc),
    })) as unknown as typeof fetch;
    const artifacts = await loadArtifacts("x/buildings.geojson", "x/services.geojson", fetcher);
    expect(artifacts.buildings.features.length).toBeGreaterThan(0);
    expect(artifacts.services.features.length).toBeGreaterThan(0);
  });

  it("raises a readable error for HTTP failures", async () => {
    const fetcher = vi.fn(async () => ({
      ok: false,
      status: 404,
      json: async () => ({}),
    })) as unknown as typeof fetch;
    await expect(loadArtifacts("a", "b", fetcher)).rejects.toThrow("HTTP 404");
  });
});
