export interface BuildingProps {
  id: string;
  population: number;
  excluded: boolean;
  reason: string;
  scores: Record<string, number> | null;
  index: number | null;
  community: number | null;
  contested: boolean;
  unassignable: boolean;
  redundancy: number | null;
}

export interface BuildingFeature {
  id: string;
  ring: [number, number][]; // WGS84 exterior ring
  props: BuildingProps;
}

export interface ServiceProps {
  id: string;
  type: string;
  community: number | null;
  exclusive_population: number;
}

export interface ServiceFeature {
  id: string;
  lon: number;
  lat: number;
  props: ServiceProps;
}

export interface BuildingLayer {
  features: BuildingFeature[];
  categories: string[]; // stable category order shared by sliders and scores
  hasRedundancy: boolean;
  hasCommunities: boolean;
  skipped: number; // malformed features dropped during parsing
}

export interface ServiceLayer {
  features: ServiceFeature[];
  skipped: number;
}

export type LayerKind =
  | { kind: "weighted" }
  | { kind: "category"; name: string }
  | { kind: "community" }
  | { kind: "redundancy" };
