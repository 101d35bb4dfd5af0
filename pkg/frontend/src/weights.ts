import type { BuildingFeature } from "./types.js";

export type Weights = Record<string, number>;

export function uniformWeights(categories: string[]): Weights {
  const w: Weights = {};
  for (const c of categories) w[c] = 1 / categories.length;
  return w;
}

/** Scale non-negative weights to sum 1; all-zero falls back to uniform. */
export function normalizeWeights(raw: Weights): Weights {
  const keys = Object.keys(raw);
  let sum = 0;
  for (const k of keys) sum += Math.max(0, raw[k]);
  const out: Weights = {};
  if (sum <= 0) {
    for (const k of keys) out[k] = 1 / keys.length;
    return out;
  }
  for (const k of keys) out[k] = Math.max(0, raw[k]) / sum;
  return out;
}

/** One slider moved: pin its value, renormalize the rest proportionally. */
export function adjustWeight(current: Weights, category: string, value: number): Weights {
  const pinned = Math.min(1, Math.max(0, value));
  const others = Object.keys(current).filter((k) => k !== category);
  const othersSum = others.reduce((acc, k) => acc + current[k], 0);
  const out: Weights = { [category]: pinned };
  const remaining = 1 - pinned;
  for (const k of others) {
    out[k] = othersSum > 0 ? (current[k] / othersSum) * remaining : remaining / others.length;
  }
  return normalizeWeights(out);
}

/**
 * Weighted index per feature: sum of weight_c * score_c.
 * Excluded buildings (scores null) yield null. Never mutates inputs.
 */
export function recomputeWeighted(
  features: readonly BuildingFeature[],
  weights: Weights,
): (number | null)[] {
  const entries = Object.entries(weights);
  return features.map((f) => {
    if (!f.props.scores) return null;
    let total = 0;
    for (const [cat, w] of entries) {
      const s = f.props.scores[cat];
      if (s !== undefined) total += w * s;
    }
    return total;
  });
}
