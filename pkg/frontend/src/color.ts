// Viridis-style ramp, blue (low) to yellow (high).
const VIRIDIS: [number, number, number][] = [
  [68, 1, 84],
  [71, 44, 122],
  [59, 81, 139],
  [44, 113, 142],
  [33, 144, 141],
  [39, 173, 129],
  [92, 200, 99],
  [170, 220, 50],
  [253, 231, 37],
];

export function valueColor(value: number | null): string {
  if (value === null || Number.isNaN(value)) return "#d0d0d0";
  const v = Math.min(1, Math.max(0, value));
  const pos = v * (VIRIDIS.length - 1);
  const i = Math.min(VIRIDIS.length - 2, Math.floor(pos));
  const f = pos - i;
  const [r0, g0, b0] = VIRIDIS[i];
  const [r1, g1, b1] = VIRIDIS[i + 1];
  const r = Math.round(r0 + f * (r1 - r0));
  const g = Math.round(g0 + f * (g1 - g0));
  const b = Math.round(b0 + f * (b1 - b0));
  return `rgb(${r},${g},${b})`;
}

/** Stable categorical color for community ids. */
export function communityColor(community: number | null): string {
  if (community === null) return "#d0d0d0";
  const hue = (community * 137.508) % 360; // golden-angle spacing
  return `hsl(${hue.toFixed(1)},65%,52%)`;
}
