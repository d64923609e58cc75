/** SGD training loop at toy scale, with per-epoch reporting.
 *
 * Objectives: "meft" trains on all answer variants of each group through
 * the group loss; "conventional" trains on variant 0 only (one answer per
 * query). Every epoch records a raw and a smoothed train loss (trailing
 * mean, window 3), the held-out loss, and the mean next-token entropy over
 * held-out answer positions — the entropy is informational, not a gate.
 */

import { ContractError, TinyLM } from "./model.js";
import {
  TrainGroup,
  conventionalLoss,
  conventionalLossAndGrad,
  meftLoss,
  meftLossAndGrad,
} from "./loss.js";
import { Objective } from "./gradcheck.js";
import { mulberry32, shuffle } from "./rng.js";

export interface TrainConfig {
  epochs: number;
  batchSize: number;
  learningRate: number;
  warmupSteps: number;
  cutoffLength: number;
  seed: number;
}

/** Documented full-scale configuration. Recorded for reference only —
 * toy runs always override it (a 1e-7 learning rate is meaningless here). */
export const FULL_SCALE_DEFAULTS: TrainConfig = {
  epochs: 2,
  batchSize: 64,
  learningRate: 1e-7,
  warmupSteps: 5000,
  cutoffLength: 500,
  seed: 0,
};

export const TOY_DEFAULTS: TrainConfig = {
  epochs: 30,
  batchSize: 8,
  learningRate: 0.5,
  warmupSteps: 0,
  cutoffLength: 64,
  seed: 0,
};

export function validateTrainConfig(config: TrainConfig): void {
  const positiveInts: Array<[string, number]> = [
    ["epochs", config.epochs],
    ["batchSize", config.batchSize],
    ["cutoffLength", config.cutoffLength],
  ];
  for (const [name, value] of positiveInts) {
    if (!Number.isInteger(value) || value < 1) {
      throw new ContractError(`${name} must be a positive integer, got ${value}`);
    }
  }
  if (!Number.isInteger(config.warmupSteps) || config.warmupSteps < 0) {
    throw new ContractError(`warmupSteps must be a non-negative integer, got ${config.warmupSteps}`);
  }
  // learningRate 0 is legal: it is the no-update control run.
  if (!(Number.isFinite(config.learningRate) && config.learningRate >= 0)) {
    throw new ContractError(`learningRate must be a finite number >= 0, got ${config.learningRate}`);
  }
  if (!Number.isInteger(config.seed)) {
    throw new ContractError(`seed must be an integer, got ${config.seed}`);
  }
}

export interface EpochRecord {
  epoch: number;
  objective: Objective;
  train_loss: number;
  smoothed_train_loss: number;
  heldout_loss: number;
  mean_entropy: number;
}

export interface TrainOutcome {
  records: EpochRecord[];
  aborted: boolean;
  abortReason?: string;
  initHeldoutLoss: number;
  finalHeldoutLoss: number;
  improvementPct: number;
}

/** The per-group training measure for the chosen objective. */
export function groupLoss(model: TinyLM, group: TrainGroup, objective: Objective): number {
  if (objective === "meft") {
    return meftLoss(model, group);
  }
  return conventionalLoss(model, group.query, group.answers[0]);
}

/** Mean per-group loss over a collection of groups. */
export function meanGroupLoss(
  model: TinyLM,
  groups: TrainGroup[],
  objective: Objective,
): number {
  if (groups.length === 0) {
    throw new ContractError("cannot evaluate the loss of an empty group collection");
  }
  let total = 0;
  for (const group of groups) {
    total += groupLoss(model, group, objective);
  }
  return total / groups.length;
}

/** Mean next-token entropy (nats) over every answer position of every
 * variant, teacher-forced. A property of the model, not of the objective. */
export function meanEntropy(model: TinyLM, groups: TrainGroup[]): number {
  const row = new Float64Array(model.dims.vocab);
  let total = 0;
  let positions = 0;
  for (const group of groups) {
    for (const answer of group.answers) {
      const seq = group.query.concat(answer);
      for (let t = group.query.length; t < seq.length; t++) {
        model.logRowInto(seq, t, row);
        let entropy = 0;
        for (let v = 0; v < row.length; v++) {
          entropy -= Math.exp(row[v]) * row[v];
        }
        total += entropy;
        positions += 1;
      }
    }
  }
  if (positions === 0) {
    throw new ContractError("no answer positions to measure entropy over");
  }
  return total / positions;
}

function checkObjective(objective: Objective): void {
  if (objective !== "meft" && objective !== "conventional") {
    throw new ContractError(`unknown objective ${JSON.stringify(objective)}`);
  }
}

function checkCorpusFits(groups: TrainGroup[], config: TrainConfig, model: TinyLM): void {
  const limit = Math.min(config.cutoffLength, model.dims.contextLength);
  for (const group of groups) {
    for (const answer of group.answers) {
      const total = group.query.length + answer.length;
      if (total > limit) {
        throw new ContractError(
          `group ${group.groupId}: sequence length ${total} exceeds the cutoff ${limit}`,
        );
      }
    }
  }
}

/** Train in place; returns the epoch records and summary figures.
 * A non-finite loss aborts the run (partial records retained). */
export function trainToy(
  model: TinyLM,
  train: TrainGroup[],
  heldout: TrainGroup[],
  config: TrainConfig,
  objective: Objective,
): TrainOutcome {
  validateTrainConfig(config);
  checkObjective(objective);
  if (train.length === 0) {
    throw new ContractError("training corpus holds no groups");
  }
  if (heldout.length === 0) {
    throw new ContractError("held-out corpus holds no groups");
  }
  checkCorpusFits(train, config, model);
  checkCorpusFits(heldout, config, model);

  const initHeldoutLoss = meanGroupLoss(model, heldout, objective);
  const grad = new Float64Array(model.paramCount);
  const records: EpochRecord[] = [];
  const rawLosses: number[] = [];
  let aborted = false;
  let abortReason: string | undefined;
  let stepIndex = 0;

  const perGroupLoss = new Float64Array(train.length);
  for (let epoch = 1; epoch <= config.epochs; epoch++) {
    const order = shuffle(
      Array.from({ length: train.length }, (_, i) => i),
      mulberry32(config.seed + epoch * 1013904223),
    );
    for (let start = 0; start < order.length; start += config.batchSize) {
      const batch = order.slice(start, start + config.batchSize);
      grad.fill(0);
      for (const idx of batch) {
        const group = train[idx];
        const scale = 1 / batch.length;
        if (objective === "meft") {
          perGroupLoss[idx] = meftLossAndGrad(model, group, grad, { scale });
        } else {
          perGroupLoss[idx] = conventionalLossAndGrad(
            model,
            group.query,
            group.answers[0],
            grad,
            scale,
          );
        }
      }
      const warm =
        config.warmupSteps > 0 ? Math.min(1, (stepIndex + 1) / config.warmupSteps) : 1;
      const lr = config.learningRate * warm;
      if (lr !== 0) {
        for (let i = 0; i < grad.length; i++) {
          model.theta[i] -= lr * grad[i];
        }
      }
      stepIndex += 1;
    }
    // Sum in group-index order so the metric does not depend on the
    // shuffled visit order (a zero-learning-rate run stays bit-constant).
    let epochLossSum = 0;
    for (let i = 0; i < perGroupLoss.length; i++) {
      epochLossSum += perGroupLoss[i];
    }
    const trainLoss = epochLossSum / train.length;
    rawLosses.push(trainLoss);
    const windowStart = Math.max(0, rawLosses.length - 3);
    const windowed = rawLosses.slice(windowStart);
    const smoothed = windowed.reduce((a, b) => a + b, 0) / windowed.length;
    const heldoutLoss = meanGroupLoss(model, heldout, objective);
    const entropy = meanEntropy(model, heldout);
    records.push({
      epoch,
      objective,
      train_loss: trainLoss,
      smoothed_train_loss: smoothed,
      heldout_loss: heldoutLoss,
      mean_entropy: entropy,
    });
    if (!Number.isFinite(trainLoss) || !Number.isFinite(heldoutLoss)) {
      aborted = true;
      abortReason = `non-finite loss at epoch ${epoch}`;
      break;
    }
  }

  const finalHeldoutLoss =
    records.length > 0 ? records[records.length - 1].heldout_loss : initHeldoutLoss;
  const improvementPct =
    initHeldoutLoss !== 0 ? ((initHeldoutLoss - finalHeldoutLoss) / initHeldoutLoss) * 100 : 0;
  return {
    records,
    aborted,
    abortReason,
    initHeldoutLoss,
    finalHeldoutLoss,
    improvementPct,
  };
}
