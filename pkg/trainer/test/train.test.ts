import { describe, expect, it } from "vitest";

import { syntheticCorpus } from "../src/data.js";
import { TinyLM } from "../src/model.js";
import {
  TOY_DEFAULTS,
  TrainConfig,
  meanEntropy,
  trainToy,
  validateTrainConfig,
} from "../src/train.js";

const MODEL_DIMS = { vocab: 64, contextLength: 64, embedDim: 16, hiddenDim: 48 };

function corpus(seed = 11) {
  return syntheticCorpus({
    vocab: 64,
    groups: 200,
    variants: 4,
    heldoutGroups: 40,
    seed,
  });
}

function toyConfig(overrides: Partial<TrainConfig> = {}): TrainConfig {
  return { ...TOY_DEFAULTS, seed: 11, ...overrides };
}

describe("toy training runs", () => {
  it("meft objective: smoothed loss strictly decreases and held-out improves >= 20% within 30 epochs", () => {
    const { train, heldout } = corpus();
    const model = TinyLM.init(MODEL_DIMS, 11);
    const started = Date.now();
    const outcome = trainToy(model, train, heldout, toyConfig(), "meft");
    const elapsedMs = Date.now() - started;

    expect(elapsedMs).toBeLessThan(120_000);
    expect(outcome.aborted).toBe(false);
    expect(outcome.records).toHaveLength(30);
    for (const record of outcome.records) {
      expect(Number.isFinite(record.train_loss)).toBe(true);
      expect(Number.isFinite(record.heldout_loss)).toBe(true);
      expect(Number.isFinite(record.mean_entropy)).toBe(true);
    }
    const smoothed = outcome.records.map((r) => r.smoothed_train_loss);
    for (let i = 1; i < smoothed.length; i++) {
      expect(smoothed[i]).toBeLessThan(smoothed[i - 1]);
    }
    expect(outcome.improvementPct).toBeGreaterThanOrEqual(20);
  });

  it("conventional objective converges on the same corpus", () => {
    const { train, heldout } = corpus();
    const model = TinyLM.init(MODEL_DIMS, 11);
    const outcome = trainToy(model, train, heldout, toyConfig(), "conventional");
    expect(outcome.aborted).toBe(false);
    const smoothed = outcome.records.map((r) => r.smoothed_train_loss);
    for (let i = 1; i < smoothed.length; i++) {
      expect(smoothed[i]).toBeLessThan(smoothed[i - 1]);
    }
    expect(outcome.improvementPct).toBeGreaterThanOrEqual(20);
  });

  it("training on all variants leaves more answer diversity than training on one", () => {
    const { train, heldout } = corpus();
    const meftModel = TinyLM.init(MODEL_DIMS, 11);
    const convModel = TinyLM.init(MODEL_DIMS, 11);
    trainToy(meftModel, train, heldout, toyConfig(), "meft");
    trainToy(convModel, train, heldout, toyConfig(), "conventional");
    // Informational metric: the group objective should keep the next-token
    // distribution spread across the variant starts.
    expect(meanEntropy(meftModel, heldout)).toBeGreaterThan(meanEntropy(convModel, heldout));
  });

  it("a zero learning rate leaves every epoch's losses identical", () => {
    const { train, heldout } = corpus(3);
    const model = TinyLM.init(MODEL_DIMS, 3);
    const before = Float64Array.from(model.theta);
    const outcome = trainToy(
      model,
      train,
      heldout,
      toyConfig({ learningRate: 0, epochs: 5, seed: 3 }),
      "meft",
    );
    expect([...model.theta]).toEqual([...before]);
    const losses = new Set(outcome.records.map((r) => r.train_loss));
    expect(losses.size).toBe(1);
    const heldouts = new Set(outcome.records.map((r) => r.heldout_loss));
    expect(heldouts.size).toBe(1);
    expect(outcome.improvementPct).toBe(0);
  });

  it("an enormous warmup horizon pins the effective learning rate near zero", () => {
    const { train, heldout } = corpus(5);
    const model = TinyLM.init(MODEL_DIMS, 5);
    const outcome = trainToy(
      model,
      train,
      heldout,
      toyConfig({ warmupSteps: 1_000_000_000, epochs: 3, seed: 5 }),
      "meft",
    );
    expect(Math.abs(outcome.improvementPct)).toBeLessThan(1);
  });

  it("aborts on a non-finite loss and keeps the partial report", () => {
    const { train, heldout } = corpus(7);
    const model = TinyLM.init(MODEL_DIMS, 7);
    model.theta[model.offB2] = Number.NaN;
    const outcome = trainToy(model, train, heldout, toyConfig({ epochs: 10 }), "meft");
    expect(outcome.aborted).toBe(true);
    expect(outcome.abortReason).toMatch(/epoch 1/);
    expect(outcome.records).toHaveLength(1);
  });

  it("smoothed losses are the trailing window-of-3 means of the raw losses", () => {
    const { train, heldout } = corpus(13);
    const model = TinyLM.init(MODEL_DIMS, 13);
    const outcome = trainToy(model, train, heldout, toyConfig({ epochs: 6 }), "meft");
    const raw = outcome.records.map((r) => r.train_loss);
    outcome.records.forEach((record, i) => {
      const window = raw.slice(Math.max(0, i - 2), i + 1);
      const expected = window.reduce((a, b) => a + b, 0) / window.length;
      expect(Math.abs(record.smoothed_train_loss - expected)).toBeLessThan(1e-12);
    });
  });
});

describe("configuration validation", () => {
  it("accepts the documented defaults", () => {
    expect(() => validateTrainConfig(TOY_DEFAULTS)).not.toThrow();
  });

  it("rejects non-positive or malformed values (zero learning rate stays legal)", () => {
    const bad: Array<Partial<TrainConfig>> = [
      { epochs: 0 },
      { batchSize: 0 },
      { cutoffLength: 0 },
      { warmupSteps: -1 },
      { learningRate: -0.1 },
      { learningRate: Number.NaN },
      { seed: 0.5 },
      { epochs: 2.5 },
    ];
    for (const overrides of bad) {
      expect(() => validateTrainConfig({ ...TOY_DEFAULTS, ...overrides })).toThrow();
    }
    expect(() =>
      validateTrainConfig({ ...TOY_DEFAULTS, learningRate: 0 }),
    ).not.toThrow();
  });

  it("rejects empty corpora and oversized sequences", () => {
    const { train, heldout } = corpus(17);
    const model = TinyLM.init(MODEL_DIMS, 17);
    expect(() => trainToy(model, [], heldout, toyConfig(), "meft")).toThrow(/no groups/);
    expect(() => trainToy(model, train, [], toyConfig(), "meft")).toThrow(/held-out/);
    const oversized = [
      {
        groupId: "big",
        query: Array.from({ length: 60 }, () => 1),
        answers: [Array.from({ length: 60 }, () => 2)],
      },
    ];
    expect(() => trainToy(model, oversized, heldout, toyConfig(), "meft")).toThrow(
      /exceeds the cutoff/,
    );
  });
});
