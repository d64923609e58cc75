#!/usr/bin/env node
/** Command-line entry points.
 *
 *   variant-trainer train --synthetic [flags]
 *   variant-trainer train --dataset dataset.jsonl [flags]
 *   variant-trainer verify dataset.jsonl
 *
 * `train` writes one JSON line per epoch to the report file and prints a
 * summary object to stdout. Exit codes: 0 ok, 1 runtime failure or aborted
 * run, 2 bad usage/config, 4 data-contract violation.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { dirname, resolve } from "node:path";
import { parseArgs } from "node:util";
import { pathToFileURL } from "node:url";

import {
  DatasetError,
  groupsFromRecords,
  readDatasetFile,
  splitHeldout,
  syntheticCorpus,
  verifyGroupStructure,
} from "./data.js";
import { Objective } from "./gradcheck.js";
import { ContractError, TinyLM } from "./model.js";
import { TOY_DEFAULTS, TrainConfig, trainToy } from "./train.js";

export const EXIT_OK = 0;
export const EXIT_ERROR = 1;
export const EXIT_USAGE = 2;
export const EXIT_DATA = 4;

class UsageError extends Error {}

function intFlag(value: string | undefined, name: string, fallback: number): number {
  if (value === undefined) {
    return fallback;
  }
  const parsed = Number(value);
  if (!Number.isInteger(parsed)) {
    throw new UsageError(`--${name} must be an integer, got ${JSON.stringify(value)}`);
  }
  return parsed;
}

function floatFlag(value: string | undefined, name: string, fallback: number): number {
  if (value === undefined) {
    return fallback;
  }
  const parsed = Number(value);
  if (!Number.isFinite(parsed)) {
    throw new UsageError(`--${name} must be a number, got ${JSON.stringify(value)}`);
  }
  return parsed;
}

function cmdTrain(argv: string[]): number {
  const { values } = parseArgs({
    args: argv,
    options: {
      dataset: { type: "string" },
      synthetic: { type: "boolean", default: false },
      objective: { type: "string", default: "meft" },
      epochs: { type: "string" },
      "batch-size": { type: "string" },
      "learning-rate": { type: "string" },
      "warmup-steps": { type: "string" },
      cutoff: { type: "string" },
      seed: { type: "string" },
      vocab: { type: "string" },
      "embed-dim": { type: "string" },
      "hidden-dim": { type: "string" },
      groups: { type: "string" },
      variants: { type: "string" },
      heldout: { type: "string" },
      "heldout-fraction": { type: "string" },
      out: { type: "string", default: "train-report.jsonl" },
    },
  });

  const haveDataset = values.dataset !== undefined;
  if (haveDataset === Boolean(values.synthetic)) {
    throw new UsageError("choose exactly one corpus source: --dataset FILE or --synthetic");
  }
  const objective = values.objective as Objective;
  if (objective !== "meft" && objective !== "conventional") {
    throw new UsageError(`--objective must be meft or conventional, got ${values.objective}`);
  }

  const config: TrainConfig = {
    epochs: intFlag(values.epochs, "epochs", TOY_DEFAULTS.epochs),
    batchSize: intFlag(values["batch-size"], "batch-size", TOY_DEFAULTS.batchSize),
    learningRate: floatFlag(values["learning-rate"], "learning-rate", TOY_DEFAULTS.learningRate),
    warmupSteps: intFlag(values["warmup-steps"], "warmup-steps", TOY_DEFAULTS.warmupSteps),
    cutoffLength: intFlag(values.cutoff, "cutoff", TOY_DEFAULTS.cutoffLength),
    seed: intFlag(values.seed, "seed", TOY_DEFAULTS.seed),
  };
  const vocab = intFlag(values.vocab, "vocab", 64);
  const embedDim = intFlag(values["embed-dim"], "embed-dim", 16);
  const hiddenDim = intFlag(values["hidden-dim"], "hidden-dim", 48);

  let train;
  let heldout;
  if (values.synthetic) {
    const corpus = syntheticCorpus({
      vocab,
      groups: intFlag(values.groups, "groups", 200),
      variants: intFlag(values.variants, "variants", 4),
      heldoutGroups: intFlag(values.heldout, "heldout", 40),
      seed: config.seed,
    });
    train = corpus.train;
    heldout = corpus.heldout;
  } else {
    const records = readDatasetFile(values.dataset as string);
    const groups = groupsFromRecords(records, { vocab, cutoffLength: config.cutoffLength });
    const fraction = floatFlag(values["heldout-fraction"], "heldout-fraction", 0.2);
    const split = splitHeldout(groups, fraction, config.seed);
    train = split.train;
    heldout = split.heldout;
  }

  const model = TinyLM.init(
    { vocab, contextLength: config.cutoffLength, embedDim, hiddenDim },
    config.seed,
  );
  const outcome = trainToy(model, train, heldout, config, objective);

  const outPath = resolve(values.out as string);
  mkdirSync(dirname(outPath), { recursive: true });
  const lines = outcome.records.map((record) => JSON.stringify(record)).join("\n");
  writeFileSync(outPath, lines.length > 0 ? lines + "\n" : "", "utf8");

  process.stdout.write(
    JSON.stringify({
      objective,
      epochs_run: outcome.records.length,
      train_groups: train.length,
      heldout_groups: heldout.length,
      init_heldout_loss: outcome.initHeldoutLoss,
      final_heldout_loss: outcome.finalHeldoutLoss,
      improvement_pct: outcome.improvementPct,
      aborted: outcome.aborted,
      report: outPath,
    }) + "\n",
  );
  if (outcome.aborted) {
    process.stderr.write(`error: ${outcome.abortReason}\n`);
    return EXIT_ERROR;
  }
  return EXIT_OK;
}

function cmdVerify(argv: string[]): number {
  const { positionals } = parseArgs({ args: argv, allowPositionals: true, options: {} });
  if (positionals.length !== 1) {
    throw new UsageError("verify takes exactly one argument: the dataset path");
  }
  const records = readDatasetFile(positionals[0]);
  const { groups, nVariants } = verifyGroupStructure(records);
  process.stdout.write(
    JSON.stringify({
      total_records: records.length,
      groups: groups.size,
      n_variants: nVariants,
    }) + "\n",
  );
  return EXIT_OK;
}

export function runCli(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    if (command === "train") {
      return cmdTrain(rest);
    }
    if (command === "verify") {
      return cmdVerify(rest);
    }
    throw new UsageError(
      `unknown command ${JSON.stringify(command ?? "")}; expected train or verify`,
    );
  } catch (err) {
    const code =
      err instanceof Error && "code" in err ? String((err as { code: unknown }).code) : "";
    if (
      err instanceof UsageError ||
      err instanceof ContractError ||
      code.startsWith("ERR_PARSE_ARGS")
    ) {
      process.stderr.write(`error: ${(err as Error).message}\n`);
      return EXIT_USAGE;
    }
    if (err instanceof DatasetError || code === "ENOENT") {
      process.stderr.write(`error: ${(err as Error).message}\n`);
      return EXIT_DATA;
    }
    throw err;
  }
}

const invokedDirectly =
  typeof process.argv[1] === "string" &&
  import.meta.url === pathToFileURL(process.argv[1]).href;
if (invokedDirectly) {
  process.exit(runCli(process.argv.slice(2)));
}
