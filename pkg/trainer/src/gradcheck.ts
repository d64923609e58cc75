/** Central-finite-difference verification of the analytic gradients. */

import { ContractError, TinyLM } from "./model.js";
import {
  TrainGroup,
  Reduction,
  conventionalLoss,
  conventionalLossAndGrad,
  meftLoss,
  meftLossAndGrad,
} from "./loss.js";
import { mulberry32, sampleIndexes } from "./rng.js";

export type Objective = "meft" | "conventional";

export interface GradCheckOptions {
  h?: number; // step size, within [1e-6, 1e-4]
  sampleSize?: number; // parameter coordinates to probe
  seed?: number; // coordinate-subsample seed
  objective?: Objective;
  reduction?: Reduction;
}

/** Analytic gradient of the chosen objective, as a fresh vector. */
export function analyticGradient(
  model: TinyLM,
  group: TrainGroup,
  objective: Objective = "meft",
  reduction: Reduction = "mean",
): Float64Array {
  const grad = new Float64Array(model.paramCount);
  if (objective === "meft") {
    meftLossAndGrad(model, group, grad, { reduction });
  } else {
    conventionalLossAndGrad(model, group.query, group.answers[0], grad, 1);
  }
  return grad;
}

/** Max relative error between analytic gradient and central differences,
 * probed on a random subsample of parameter coordinates. */
export function gradCheck(model: TinyLM, group: TrainGroup, options?: GradCheckOptions): number {
  const h = options?.h ?? 1e-5;
  if (!(h >= 1e-6 && h <= 1e-4)) {
    throw new ContractError(`finite-difference step must lie in [1e-6, 1e-4], got ${h}`);
  }
  const objective = options?.objective ?? "meft";
  if (objective !== "meft" && objective !== "conventional") {
    throw new ContractError(`unknown objective ${JSON.stringify(objective)}`);
  }
  const reduction = options?.reduction ?? "mean";
  const sampleSize = options?.sampleSize ?? 60;
  const seed = options?.seed ?? 0;

  const lossAt = (): number =>
    objective === "meft"
      ? meftLoss(model, group, { reduction })
      : conventionalLoss(model, group.query, group.answers[0]);

  const grad = analyticGradient(model, group, objective, reduction);
  const coords = sampleIndexes(mulberry32(seed), model.paramCount, sampleSize);
  let worst = 0;
  for (const i of coords) {
    const original = model.theta[i];
    model.theta[i] = original + h;
    const plus = lossAt();
    model.theta[i] = original - h;
    const minus = lossAt();
    model.theta[i] = original;
    const fd = (plus - minus) / (2 * h);
    const denom = Math.max(Math.abs(fd) + Math.abs(grad[i]), 1e-10);
    const rel = Math.abs(fd - grad[i]) / denom;
    if (rel > worst) {
      worst = rel;
    }
  }
  return worst;
}
