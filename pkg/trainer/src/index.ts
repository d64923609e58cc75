export { ContractError, ModelDims, TinyLM, WINDOW } from "./model.js";
export {
  GroupLossOptions,
  Reduction,
  TrainGroup,
  checkGroup,
  conventionalLoss,
  conventionalLossAndGrad,
  meftLoss,
  meftLossAndGrad,
} from "./loss.js";
export { GradCheckOptions, Objective, analyticGradient, gradCheck } from "./gradcheck.js";
export {
  CorpusOptions,
  DatasetError,
  DatasetRecord,
  SyntheticSpec,
  groupsFromRecords,
  parseDatasetLines,
  readDatasetFile,
  splitHeldout,
  syntheticCorpus,
  tokenizeBytes,
  verifyGroupStructure,
} from "./data.js";
export {
  EpochRecord,
  FULL_SCALE_DEFAULTS,
  TOY_DEFAULTS,
  TrainConfig,
  TrainOutcome,
  groupLoss,
  meanEntropy,
  meanGroupLoss,
  trainToy,
  validateTrainConfig,
} from "./train.js";
export { mulberry32, randInt, sampleIndexes, shuffle } from "./rng.js";
export { EXIT_DATA, EXIT_ERROR, EXIT_OK, EXIT_USAGE, runCli } from "./cli.js";
