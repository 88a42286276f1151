// Cluster coloring: a fixed 32-entry palette indexed purely by cluster id.

export const UNASSIGNED_ID = 255;
export const PALETTE_SIZE = 32;

const UNASSIGNED_COLOR: [number, number, number] = [0.45, 0.45, 0.45];

function hslToRgb(h: number, s: number, l: number): [number, number, number] {
  const f = (n: number) => {
    const k = (n + h * 12) % 12;
    return l - s * Math.min(l, 1 - l) * Math.max(-1, Math.min(k - 3, 9 - k, 1));
  };
  return [f(0), f(8), f(4)];
}

// golden-angle hue walk: neighbouring ids get far-apart hues, and the table
// is built once so the id -> color mapping never drifts between frames
const TABLE: [number, number, number][] = [];
for (let i = 0; i < PALETTE_SIZE; i++) {
  const hue = (i * 0.618034) % 1;
  TABLE.push(hslToRgb(hue, 0.65, i % 2 === 0 ? 0.55 : 0.7));
}

/** RGB in [0,1] for a cluster id; 255 is the "no fragment" sentinel. */
export function clusterColor(id: number): [number, number, number] {
  if (id === UNASSIGNED_ID || id < 0) return UNASSIGNED_COLOR;
  const c = TABLE[id % PALETTE_SIZE];
  return [c![0], c![1], c![2]];
}
