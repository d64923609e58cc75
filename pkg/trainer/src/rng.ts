/** Deterministic 32-bit PRNG (mulberry32). Returns floats in [0, 1). */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Uniform integer in [0, n). */
export function randInt(rng: () => number, n: number): number {
  return Math.floor(rng() * n);
}

/** Fisher-Yates shuffle, in place, driven by the given rng. */
export function shuffle<T>(items: T[], rng: () => number): T[] {
  for (let i = items.length - 1; i > 0; i--) {
    const j = randInt(rng, i + 1);
    const tmp = items[i];
    items[i] = items[j];
    items[j] = tmp;
  }
  return items;
}

/** k distinct integers sampled from [0, n), in ascending order. */
export function sampleIndexes(rng: () => number, n: number, k: number): number[] {
  if (k >= n) {
    return Array.from({ length: n }, (_, i) => i);
  }
  const chosen = new Set<number>();
  while (chosen.size < k) {
    chosen.add(randInt(rng, n));
  }
  return [...chosen].sort((a, b) => a - b);
}
