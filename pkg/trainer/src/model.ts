/** A tiny autoregressive language model with a flat parameter vector.
 *
 * Architecture: each position is predicted from the previous WINDOW token
 * embeddings through one tanh hidden layer and a softmax output — a neural
 * n-gram model. Positions before the sequence start read a dedicated
 * boundary embedding (row `vocab` of the embedding table), so the model is
 * autoregressive by construction: position t depends only on tokens < t.
 *
 * All parameters live in one Float64Array so finite-difference checks and
 * SGD updates can treat the model as a plain vector.
 */

import { mulberry32 } from "./rng.js";

export const WINDOW = 2;

export interface ModelDims {
  vocab: number;
  contextLength: number;
  embedDim: number;
  hiddenDim: number;
}

export class ContractError extends Error {}

function checkDims(dims: ModelDims): void {
  const { vocab, contextLength, embedDim, hiddenDim } = dims;
  for (const [name, value] of Object.entries({ vocab, contextLength, embedDim, hiddenDim })) {
    if (!Number.isInteger(value) || value < 1) {
      throw new ContractError(`model dimension ${name} must be a positive integer, got ${value}`);
    }
  }
  if (vocab < 2) {
    throw new ContractError(`vocab must be at least 2, got ${vocab}`);
  }
}

export class TinyLM {
  readonly dims: ModelDims;
  readonly theta: Float64Array;
  readonly offE: number;
  readonly offW1: number;
  readonly offB1: number;
  readonly offW2: number;
  readonly offB2: number;

  // Reused per-position workspaces (single-threaded).
  private readonly u: Float64Array;
  private readonly z: Float64Array;
  private readonly logits: Float64Array;
  private readonly probs: Float64Array;
  private readonly dz: Float64Array;
  private readonly du: Float64Array;

  constructor(dims: ModelDims, theta?: Float64Array) {
    checkDims(dims);
    this.dims = { ...dims };
    const { vocab: V, embedDim: d, hiddenDim: h } = dims;
    const twoD = WINDOW * d;
    this.offE = 0;
    this.offW1 = this.offE + (V + 1) * d;
    this.offB1 = this.offW1 + h * twoD;
    this.offW2 = this.offB1 + h;
    this.offB2 = this.offW2 + V * h;
    const total = this.offB2 + V;
    if (theta !== undefined) {
      if (theta.length !== total) {
        throw new ContractError(
          `parameter vector has length ${theta.length}, expected ${total}`,
        );
      }
      this.theta = theta;
    } else {
      this.theta = new Float64Array(total);
    }
    this.u = new Float64Array(twoD);
    this.z = new Float64Array(h);
    this.logits = new Float64Array(V);
    this.probs = new Float64Array(V);
    this.dz = new Float64Array(h);
    this.du = new Float64Array(twoD);
  }

  get paramCount(): number {
    return this.theta.length;
  }

  /** Fresh model with small deterministic uniform initialization. */
  static init(dims: ModelDims, seed: number): TinyLM {
    const model = new TinyLM(dims);
    const { vocab: V, embedDim: d, hiddenDim: h } = dims;
    const twoD = WINDOW * d;
    const rng = mulberry32(seed);
    const fill = (start: number, count: number, scale: number) => {
      for (let i = 0; i < count; i++) {
        model.theta[start + i] = (rng() * 2 - 1) * scale;
      }
    };
    fill(model.offE, (V + 1) * d, 0.1);
    fill(model.offW1, h * twoD, 1 / Math.sqrt(twoD));
    // b1 and b2 start at zero.
    fill(model.offW2, V * h, 1 / Math.sqrt(h));
    return model;
  }

  /** Deep copy (parameters included). */
  clone(): TinyLM {
    return new TinyLM(this.dims, Float64Array.from(this.theta));
  }

  private checkTokens(tokens: ArrayLike<number>): void {
    const V = this.dims.vocab;
    if (tokens.length > this.dims.contextLength) {
      throw new ContractError(
        `sequence length ${tokens.length} exceeds context length ${this.dims.contextLength}`,
      );
    }
    for (let i = 0; i < tokens.length; i++) {
      const tok = tokens[i];
      if (!Number.isInteger(tok) || tok < 0 || tok >= V) {
        throw new ContractError(`token ${tok} at position ${i} outside vocabulary 0..${V - 1}`);
      }
    }
  }

  /** Compute hidden state and logits for position t. Fills workspaces. */
  private positionForward(tokens: ArrayLike<number>, t: number): void {
    const { vocab: V, embedDim: d, hiddenDim: h } = this.dims;
    const twoD = WINDOW * d;
    const theta = this.theta;
    for (let k = 1; k <= WINDOW; k++) {
      const ctx = t - k >= 0 ? (tokens[t - k] as number) : V; // V = boundary row
      const src = this.offE + ctx * d;
      const dst = (k - 1) * d;
      for (let j = 0; j < d; j++) {
        this.u[dst + j] = theta[src + j];
      }
    }
    for (let i = 0; i < h; i++) {
      let s = theta[this.offB1 + i];
      const base = this.offW1 + i * twoD;
      for (let j = 0; j < twoD; j++) {
        s += theta[base + j] * this.u[j];
      }
      this.z[i] = Math.tanh(s);
    }
    for (let v = 0; v < V; v++) {
      let s = theta[this.offB2 + v];
      const base = this.offW2 + v * h;
      for (let i = 0; i < h; i++) {
        s += theta[base + i] * this.z[i];
      }
      this.logits[v] = s;
    }
  }

  /** Log-sum-exp of the current logits workspace. */
  private logSumExp(): number {
    const V = this.dims.vocab;
    let m = -Infinity;
    for (let v = 0; v < V; v++) {
      if (this.logits[v] > m) m = this.logits[v];
    }
    let s = 0;
    for (let v = 0; v < V; v++) {
      s += Math.exp(this.logits[v] - m);
    }
    return m + Math.log(s);
  }

  /** Write the normalized log-probability row for position t into `out`. */
  logRowInto(tokens: ArrayLike<number>, t: number, out: Float64Array): void {
    const V = this.dims.vocab;
    if (out.length !== V) {
      throw new ContractError(`output row has length ${out.length}, expected ${V}`);
    }
    this.checkTokens(tokens);
    if (!Number.isInteger(t) || t < 0 || t >= tokens.length) {
      throw new ContractError(`position ${t} outside sequence of length ${tokens.length}`);
    }
    this.positionForward(tokens, t);
    const lse = this.logSumExp();
    for (let v = 0; v < V; v++) {
      out[v] = this.logits[v] - lse;
    }
  }

  /** Per-position next-token log-probability rows for the whole sequence. */
  forward(tokens: ArrayLike<number>): Float64Array[] {
    this.checkTokens(tokens);
    const rows: Float64Array[] = [];
    for (let t = 0; t < tokens.length; t++) {
      const row = new Float64Array(this.dims.vocab);
      this.logRowInto(tokens, t, row);
      rows.push(row);
    }
    return rows;
  }

  /** -log P(tokens[t] | preceding window); optionally accumulates
   * `scale` times its parameter gradient into `grad`. */
  positionLossGrad(
    tokens: ArrayLike<number>,
    t: number,
    grad: Float64Array | null,
    scale: number,
  ): number {
    const { vocab: V, embedDim: d, hiddenDim: h } = this.dims;
    const twoD = WINDOW * d;
    const theta = this.theta;
    const target = tokens[t] as number;
    this.positionForward(tokens, t);
    const lse = this.logSumExp();
    const loss = lse - this.logits[target];
    if (grad !== null && scale !== 0) {
      if (grad.length !== theta.length) {
        throw new ContractError(
          `gradient vector has length ${grad.length}, expected ${theta.length}`,
        );
      }
      for (let v = 0; v < V; v++) {
        this.probs[v] = Math.exp(this.logits[v] - lse);
      }
      this.dz.fill(0);
      for (let v = 0; v < V; v++) {
        const dl = scale * (this.probs[v] - (v === target ? 1 : 0));
        grad[this.offB2 + v] += dl;
        const base = this.offW2 + v * h;
        for (let i = 0; i < h; i++) {
          grad[base + i] += dl * this.z[i];
          this.dz[i] += dl * theta[base + i];
        }
      }
      this.du.fill(0);
      for (let i = 0; i < h; i++) {
        const dpre = this.dz[i] * (1 - this.z[i] * this.z[i]);
        grad[this.offB1 + i] += dpre;
        const base = this.offW1 + i * twoD;
        for (let j = 0; j < twoD; j++) {
          grad[base + j] += dpre * this.u[j];
          this.du[j] += dpre * theta[base + j];
        }
      }
      for (let k = 1; k <= WINDOW; k++) {
        const ctx = t - k >= 0 ? (tokens[t - k] as number) : V;
        const dst = this.offE + ctx * d;
        const src = (k - 1) * d;
        for (let j = 0; j < d; j++) {
          grad[dst + j] += this.du[src + j];
        }
      }
    }
    return loss;
  }
}
