/** Corpus sources: grouped instruction datasets (JSONL) and synthetic data.
 *
 * The file format is the producing pipeline's dataset contract: one JSON
 * object per line with query_id, variant_index, n_variants, seed,
 * instruction, query, answer (and optional meta). Structural validation
 * mirrors what this trainer depends on — uniform group size, exactly the
 * variant indexes 0..n-1 per group, in-group seed uniqueness, non-empty
 * texts. Content rules beyond that (e.g. answer section layout) belong to
 * the producer.
 */

import { readFileSync } from "node:fs";

import { TrainGroup } from "./loss.js";
import { mulberry32, randInt, shuffle } from "./rng.js";

export class DatasetError extends Error {}

export interface DatasetRecord {
  query_id: string;
  variant_index: number;
  n_variants: number;
  seed: number;
  instruction: string;
  query: string;
  answer: string;
  meta?: Record<string, unknown>;
}

function requireString(value: unknown, field: string, line: number): string {
  if (typeof value !== "string" || value.length === 0) {
    throw new DatasetError(`line ${line}: field ${field} must be a non-empty string`);
  }
  return value;
}

function requireInt(value: unknown, field: string, line: number): number {
  if (typeof value !== "number" || !Number.isInteger(value)) {
    throw new DatasetError(`line ${line}: field ${field} must be an integer`);
  }
  return value;
}

/** Parse JSONL text into records; blank lines are skipped. */
export function parseDatasetLines(text: string): DatasetRecord[] {
  const records: DatasetRecord[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "") {
      continue;
    }
    const lineNo = i + 1;
    let parsed: unknown;
    try {
      parsed = JSON.parse(line);
    } catch {
      throw new DatasetError(`line ${lineNo}: not valid JSON`);
    }
    if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
      throw new DatasetError(`line ${lineNo}: record must be a JSON object`);
    }
    const obj = parsed as Record<string, unknown>;
    const record: DatasetRecord = {
      query_id: requireString(obj.query_id, "query_id", lineNo),
      variant_index: requireInt(obj.variant_index, "variant_index", lineNo),
      n_variants: requireInt(obj.n_variants, "n_variants", lineNo),
      seed: requireInt(obj.seed, "seed", lineNo),
      instruction: requireString(obj.instruction, "instruction", lineNo),
      query: requireString(obj.query, "query", lineNo),
      answer: requireString(obj.answer, "answer", lineNo),
    };
    if (record.variant_index < 0) {
      throw new DatasetError(`line ${lineNo}: variant_index must be >= 0`);
    }
    if (record.n_variants < 1) {
      throw new DatasetError(`line ${lineNo}: n_variants must be >= 1`);
    }
    if (obj.meta !== undefined) {
      if (typeof obj.meta !== "object" || obj.meta === null || Array.isArray(obj.meta)) {
        throw new DatasetError(`line ${lineNo}: meta must be a JSON object`);
      }
      record.meta = obj.meta as Record<string, unknown>;
    }
    records.push(record);
  }
  return records;
}

export function readDatasetFile(path: string): DatasetRecord[] {
  return parseDatasetLines(readFileSync(path, "utf8"));
}

/** Check group structure; returns groups keyed by query_id in first-seen order. */
export function verifyGroupStructure(records: DatasetRecord[]): {
  groups: Map<string, DatasetRecord[]>;
  nVariants: number;
} {
  if (records.length === 0) {
    throw new DatasetError("dataset holds no records");
  }
  const nVariants = records[0].n_variants;
  const groups = new Map<string, DatasetRecord[]>();
  for (const record of records) {
    if (record.n_variants !== nVariants) {
      throw new DatasetError(
        `group ${record.query_id}: n_variants ${record.n_variants} disagrees with ${nVariants}`,
      );
    }
    const bucket = groups.get(record.query_id);
    if (bucket === undefined) {
      groups.set(record.query_id, [record]);
    } else {
      bucket.push(record);
    }
  }
  for (const [queryId, bucket] of groups) {
    if (bucket.length !== nVariants) {
      throw new DatasetError(
        `group ${queryId}: holds ${bucket.length} records, expected ${nVariants}`,
      );
    }
    const indexes = new Set(bucket.map((r) => r.variant_index));
    for (let v = 0; v < nVariants; v++) {
      if (!indexes.has(v)) {
        throw new DatasetError(`group ${queryId}: missing variant index ${v}`);
      }
    }
    const seeds = new Set(bucket.map((r) => r.seed));
    if (seeds.size !== bucket.length) {
      throw new DatasetError(`group ${queryId}: seeds are not distinct`);
    }
  }
  return { groups, nVariants };
}

/** UTF-8 bytes folded into [0, vocab): deterministic, dependency-free. */
export function tokenizeBytes(text: string, vocab: number): number[] {
  const bytes = Buffer.from(text, "utf8");
  const tokens = new Array<number>(bytes.length);
  for (let i = 0; i < bytes.length; i++) {
    tokens[i] = bytes[i] % vocab;
  }
  return tokens;
}

export interface CorpusOptions {
  vocab: number;
  cutoffLength: number;
}

/** Build token groups from dataset records. Long texts are fitted to the
 * cutoff: the query keeps its tail (nearest context), each answer its head. */
export function groupsFromRecords(
  records: DatasetRecord[],
  options: CorpusOptions,
): TrainGroup[] {
  const { vocab, cutoffLength } = options;
  if (cutoffLength < 2) {
    throw new DatasetError(`cutoff length must be at least 2, got ${cutoffLength}`);
  }
  const { groups, nVariants } = verifyGroupStructure(records);
  const out: TrainGroup[] = [];
  for (const [queryId, bucket] of groups) {
    const byIndex = [...bucket].sort((a, b) => a.variant_index - b.variant_index);
    const rawQuery = tokenizeBytes(byIndex[0].query, vocab);
    const qKeep = Math.min(rawQuery.length, Math.max(1, Math.floor(cutoffLength / 2)));
    const query = rawQuery.slice(rawQuery.length - qKeep);
    const budget = cutoffLength - query.length;
    const answers: number[][] = [];
    for (const record of byIndex) {
      const rawAnswer = tokenizeBytes(record.answer, vocab);
      const answer = rawAnswer.slice(0, Math.min(rawAnswer.length, budget));
      if (answer.length === 0) {
        throw new DatasetError(
          `group ${queryId}: answer ${record.variant_index} left no tokens under cutoff ${cutoffLength}`,
        );
      }
      answers.push(answer);
    }
    if (answers.length !== nVariants) {
      throw new DatasetError(`group ${queryId}: expected ${nVariants} answers`);
    }
    out.push({ groupId: queryId, query, answers });
  }
  return out;
}

/** Deterministic train/held-out split by group. */
export function splitHeldout(
  groups: TrainGroup[],
  fraction: number,
  seed: number,
): { train: TrainGroup[]; heldout: TrainGroup[] } {
  if (!(fraction >= 0 && fraction < 1)) {
    throw new DatasetError(`held-out fraction must lie in [0, 1), got ${fraction}`);
  }
  if (fraction === 0) {
    return { train: [...groups], heldout: [] };
  }
  if (groups.length < 2) {
    throw new DatasetError("need at least two groups to split off a held-out set");
  }
  const order = shuffle(
    Array.from({ length: groups.length }, (_, i) => i),
    mulberry32(seed),
  );
  const heldoutCount = Math.min(
    groups.length - 1,
    Math.max(1, Math.round(groups.length * fraction)),
  );
  const heldoutIdx = new Set(order.slice(0, heldoutCount));
  const train: TrainGroup[] = [];
  const heldout: TrainGroup[] = [];
  groups.forEach((group, i) => {
    (heldoutIdx.has(i) ? heldout : train).push(group);
  });
  return { train, heldout };
}

export interface SyntheticSpec {
  vocab: number;
  groups: number;
  variants: number;
  heldoutGroups: number;
  seed: number;
  queryLength?: number;
}

/** Structured synthetic corpus: the answer of variant j starts at
 * (last query token + j + 1) mod V and then counts upward by one. The
 * counting rule is fully learnable through a two-token window; the
 * variant-dependent start carries the per-group answer diversity. */
export function syntheticCorpus(spec: SyntheticSpec): {
  train: TrainGroup[];
  heldout: TrainGroup[];
} {
  const { vocab, groups, variants, heldoutGroups, seed } = spec;
  const queryLength = spec.queryLength ?? 3;
  if (vocab < 2 || groups < 1 || variants < 1 || heldoutGroups < 0 || queryLength < 1) {
    throw new DatasetError("synthetic corpus dimensions must be positive");
  }
  const rng = mulberry32(seed);
  const makeGroup = (groupId: string): TrainGroup => {
    const query = Array.from({ length: queryLength }, () => randInt(rng, vocab));
    const answers: number[][] = [];
    for (let j = 0; j < variants; j++) {
      const length = 3 + randInt(rng, 4); // 3..6 tokens
      const answer = new Array<number>(length);
      answer[0] = (query[queryLength - 1] + j + 1) % vocab;
      for (let t = 1; t < length; t++) {
        answer[t] = (answer[t - 1] + 1) % vocab;
      }
      answers.push(answer);
    }
    return { groupId, query, answers };
  };
  const train = Array.from({ length: groups }, (_, i) => makeGroup(`train-${i}`));
  const heldout = Array.from({ length: heldoutGroups }, (_, i) => makeGroup(`heldout-${i}`));
  return { train, heldout };
}
