import type { BuildingLayer } from "./types.js";
import type { Weights } from "./weights.js";

function fmt(x: number | null, digits = 3): string {
  return x === null ? "–" : x.toFixed(digits);
}

/** Fill the detail panel for a building id; unknown or null clears it. */
export function renderPanel(
  el: HTMLElement,
  layer: BuildingLayer,
  weights: Weights,
  buildingId: string | null,
): void {
  const feature = buildingId ? layer.features.find((f) => f.id === buildingId) : undefined;
  if (!feature) {
    el.innerHTML = '<p class="hint">Click a building to inspect it.</p>';
    return;
  }
  const p = feature.props;
  const rows: string[] = [];
  if (p.scores) {
    for (const cat of layer.categories) {
      rows.push(
        `<tr><td>${cat.replace(/_/g, " ")}</td><td>${fmt(p.scores[cat] ?? null)}</td></tr>`,
      );
    }
  }
  let weighted: number | null = null;
  if (p.scores) {
    weighted = 0;
    for (const [cat, w] of Object.entries(weights)) weighted += w * (p.scores[cat] ?? 0);
  }
  const badges: string[] = [];
  if (p.excluded) badges.push(`<span class="badge warn">excluded: ${p.reason}</span>`);
  if (p.contested) badges.push('<span class="badge">contested</span>');
  if (p.unassignable) badges.push('<span class="badge">unassignable</span>');
  el.innerHTML = `
    <h3>Building ${p.id}</h3>
    <div class="badges">${badges.join(" ")}</div>
    <table>${rows.join("")}</table>
    <dl>
      <dt>10-minute index</dt><dd>${fmt(p.index)}</dd>
      <dt>weighted index</dt><dd>${fmt(weighted)}</dd>
      <dt>community</dt><dd>${p.community === null ? "–" : p.community}</dd>
      <dt>redundancy R</dt><dd>${fmt(p.redundancy)}</dd>
      <dt>population</dt><dd>${p.population}</dd>
    </dl>`;
}
