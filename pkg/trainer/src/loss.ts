/** Training objectives over (query, answer) pairs and answer-variant groups.
 *
 * `conventionalLoss` is the negative sum of next-token log-probabilities
 * over the answer positions only — query positions never contribute.
 * `meftLoss` averages that per-variant loss across all answers of a group
 * (mean by default; `reduction: "sum"` skips the division). Per-variant
 * losses are sorted before summation so the result is bit-identical under
 * any permutation of the answers.
 */

import { ContractError, TinyLM } from "./model.js";

export interface TrainGroup {
  groupId: string;
  query: number[];
  answers: number[][];
}

export type Reduction = "mean" | "sum";

export interface GroupLossOptions {
  reduction?: Reduction;
}

function checkPair(model: TinyLM, query: ArrayLike<number>, answer: ArrayLike<number>): void {
  if (answer.length === 0) {
    throw new ContractError("answer must hold at least one token");
  }
  const total = query.length + answer.length;
  if (total > model.dims.contextLength) {
    throw new ContractError(
      `sequence length ${total} exceeds context length ${model.dims.contextLength}`,
    );
  }
}

export function checkGroup(group: TrainGroup): void {
  if (group.answers.length === 0) {
    throw new ContractError(`group ${group.groupId}: holds no answers`);
  }
  for (const answer of group.answers) {
    if (answer.length === 0) {
      throw new ContractError(`group ${group.groupId}: holds an empty answer`);
    }
  }
}

function checkedReduction(options?: GroupLossOptions): Reduction {
  const reduction = options?.reduction ?? "mean";
  if (reduction !== "mean" && reduction !== "sum") {
    throw new ContractError(`unknown reduction ${JSON.stringify(reduction)}`);
  }
  return reduction;
}

/** Sum of sorted values: permutation-exact floating summation. */
function sortedSum(values: number[]): number {
  const ordered = [...values].sort((a, b) => a - b);
  let total = 0;
  for (const v of ordered) {
    total += v;
  }
  return total;
}

/** -Σ log P(answer token | prefix) over answer positions of query ⊕ answer. */
export function conventionalLoss(
  model: TinyLM,
  query: number[],
  answer: number[],
): number {
  return conventionalLossAndGrad(model, query, answer, null, 1);
}

/** Loss per `conventionalLoss`; accumulates `scale` times its gradient
 * into `grad` when one is given. */
export function conventionalLossAndGrad(
  model: TinyLM,
  query: number[],
  answer: number[],
  grad: Float64Array | null,
  scale = 1,
): number {
  checkPair(model, query, answer);
  const seq = query.concat(answer);
  let loss = 0;
  for (let t = query.length; t < seq.length; t++) {
    loss += model.positionLossGrad(seq, t, grad, scale);
  }
  return loss;
}

/** Group objective: mean (or sum) of the per-answer conventional losses. */
export function meftLoss(model: TinyLM, group: TrainGroup, options?: GroupLossOptions): number {
  const reduction = checkedReduction(options);
  checkGroup(group);
  const losses = group.answers.map((answer) =>
    conventionalLoss(model, group.query, answer),
  );
  const total = sortedSum(losses);
  return reduction === "sum" ? total : total / losses.length;
}

/** Loss per `meftLoss`; accumulates `scale` times its gradient into `grad`. */
export function meftLossAndGrad(
  model: TinyLM,
  group: TrainGroup,
  grad: Float64Array | null,
  options?: GroupLossOptions & { scale?: number },
): number {
  const reduction = checkedReduction(options);
  checkGroup(group);
  const scale = options?.scale ?? 1;
  const n = group.answers.length;
  const variantScale = scale * (reduction === "mean" ? 1 / n : 1);
  const losses = group.answers.map((answer) =>
    conventionalLossAndGrad(model, group.query, answer, grad, variantScale),
  );
  const total = sortedSum(losses);
  return reduction === "sum" ? total : total / n;
}
