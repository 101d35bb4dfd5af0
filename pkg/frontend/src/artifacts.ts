import type {
  BuildingFeature,
  BuildingLayer,
  BuildingProps,
  ServiceFeature,
  ServiceLayer,
} from "./types.js";

function asRing(geometry: any): [number, number][] | null {
  if (!geometry || geometry.type !== "Polygon") return null;
  const ring = geometry.coordinates?.[0];
  if (!Array.isArray(ring) || ring.length < 4) return null;
  for (const c of ring) {
    if (!Array.isArray(c) || typeof c[0] !== "number" || typeof c[1] !== "number") return null;
  }
  return ring.map((c: number[]) => [c[0], c[1]]);
}

/** Tolerant GeoJSON parsing: malformed features are skipped and counted. */
export function parseBuildings(doc: any): BuildingLayer {
  const features: BuildingFeature[] = [];
  let skipped = 0;
  const raw = Array.isArray(doc?.features) ? doc.features : [];
  for (const feat of raw) {
    const ring = asRing(feat?.geometry);
    const p = feat?.properties;
    if (!ring || !p || typeof p.id !== "string") {
      skipped += 1;
      continue;
    }
    const props: BuildingProps = {
      id: p.id,
      population: typeof p.population === "number" ? p.population : 1,
      excluded: Boolean(p.excluded),
      reason: typeof p.reason === "string" ? p.reason : "",
      scores: p.scores && typeof p.scores === "object" ? p.scores : null,
      index: typeof p.index === "number" ? p.index : null,
      community: typeof p.community === "number" ? p.community : null,
      contested: Boolean(p.contested),
      unassignable: Boolean(p.unassignable),
      redundancy: typeof p.redundancy === "number" ? p.redundancy : null,
    };
    features.push({ id: props.id, ring, props });
  }
  if (skipped > 0) console.warn(`buildings: skipped ${skipped} malformed feature(s)`);
  const categories = firstScoredCategories(features);
  return {
    features,
    categories,
    hasRedundancy: features.some((f) => f.props.redundancy !== null),
    hasCommunities: features.some((f) => f.props.community !== null),
    skipped,
  };
}

function firstScoredCategories(features: BuildingFeature[]): string[] {
  for (const f of features) {
    if (f.props.scores) return Object.keys(f.props.scores).sort();
  }
  return [];
}

export function parseServices(doc: any): ServiceLayer {
  const features: ServiceFeature[] = [];
  let skipped = 0;
  const raw = Array.isArray(doc?.features) ? doc.features : [];
  for (const feat of raw) {
    const g = feat?.geometry;
    const p = feat?.properties;
    if (
      !g ||
      g.type !== "Point" ||
      !Array.isArray(g.coordinates) ||
      typeof g.coordinates[0] !== "number" ||
      !p ||
      typeof p.id !== "string"
    ) {
      skipped += 1;
      continue;
    }
    features.push({
      id: p.id,
      lon: g.coordinates[0],
      lat: g.coordinates[1],
      props: {
        id: p.id,
        type: typeof p.type === "string" ? p.type : "unknown",
        community: typeof p.community === "number" ? p.community : null,
        exclusive_population:
          typeof p.exclusive_population === "number" ? p.exclusive_population : 0,
      },
    });
  }
  if (skipped > 0) console.warn(`services: skipped ${skipped} malformed feature(s)`);
  return { features, skipped };
}

export interface Artifacts {
  buildings: BuildingLayer;
  services: ServiceLayer;
}

/** Fetch both artifacts; throws with a readable message for the error banner. */
export async function loadArtifacts(
  buildingsUrl: string,
  servicesUrl: string,
  fetcher: typeof fetch = fetch,
): Promise<Artifacts> {
  const [b, s] = await Promise.all([
    fetchJson(buildingsUrl, fetcher),
    fetchJson(servicesUrl, fetcher),
  ]);
  return { buildings: parseBuildings(b), services: parseServices(s) };
}

async function fetchJson(url: string, fetcher: typeof fetch): Promise<any> {
  let resp: Response;
  try {
    resp = await fetcher(url);
  } catch (err) {
    throw new Error(`cannot reach ${url}: ${String(err)}`);
  }
  if (!resp.ok) throw new Error(`fetching ${url} failed: HTTP ${resp.status}`);
  try {
    return await resp.json();
  } catch (err) {
    throw new Error(`${url} is not valid JSON: ${String(err)}`);
  }
}
