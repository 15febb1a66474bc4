/**
 * Wall-clock-budgeted training loop: stratified fixture subsample, cosine
 * annealing over a fixed epoch horizon, optional cutout, final validation
 * accuracy in percent.
 */

import * as tf from "@tensorflow/tfjs";
import {
  CHANNELS,
  DEFAULT_POOL_PER_CLASS,
  NUM_CLASSES,
  fixtureLabels,
  materialize,
  subsample,
} from "./dataset";
import { Family, Multipliers, buildModel, scaledResolution } from "./model";
import { mulberry32, shuffledIndices } from "./rng";

export const MAX_EPOCH = 240;
export const OPTIMIZERS = [
  "Adadelta",
  "Adagrad",
  "SGD",
  "Adam",
  "AdamW",
  "Adamax",
  "ASGD",
] as const;

export interface TrainOptions {
  family: Family;
  multipliers: Multipliers;
  learningRate: number;
  weightDecay: number;
  optimizerIndex: number;
  batchSize: number;
  budgetSeconds: number;
  cutout: boolean;
  cutoutSize: number;
  seed: number;
  trainPerClass: number;
  valPerClass: number;
  poolPerClass: number;
}

export const DEFAULT_OPTIONS: TrainOptions = {
  family: "senet18",
  multipliers: { depth: 1, width: 1, resolution: 1 },
  learningRate: 0.1,
  weightDecay: 5e-4,
  optimizerIndex: OPTIMIZERS.indexOf("SGD"),
  batchSize: 128,
  budgetSeconds: 30,
  cutout: false,
  cutoutSize: 8,
  seed: 0,
  trainPerClass: 500,
  valPerClass: 100,
  poolPerClass: DEFAULT_POOL_PER_CLASS,
};

export interface TrainResult {
  accuracy: number;
  epochsRun: number;
  batchesRun: number;
  elapsedSeconds: number;
}

/**
 * Build the optimizer named by its 0-based index. AdamW decays through the
 * explicit L2 term like every other optimizer here, and ASGD's averaging is
 * omitted; both reduce to their base update rule.
 */
export function makeOptimizer(index: number, learningRate: number): tf.Optimizer {
  switch (OPTIMIZERS[index]) {
    case "Adadelta":
      return tf.train.adadelta(learningRate);
    case "Adagrad":
      return tf.train.adagrad(learningRate);
    case "SGD":
    case "ASGD":
      return tf.train.sgd(learningRate);
    case "Adam":
    case "AdamW":
      return tf.train.adam(learningRate);
    case "Adamax":
      return tf.train.adamax(learningRate);
    default:
      throw new Error(`optimizer index ${index} outside 0..${OPTIMIZERS.length - 1}`);
  }
}

export function cosineLearningRate(base: number, epoch: number): number {
  const clamped = Math.min(epoch, MAX_EPOCH);
  return base * 0.5 * (1 + Math.cos((Math.PI * clamped) / MAX_EPOCH));
}

/** Zero out one random square patch per image, in place. */
export function applyCutout(
  images: Float32Array,
  count: number,
  size: number,
  patch: number,
  rng: () => number,
): void {
  const pixelsPer = size * size * CHANNELS;
  for (let i = 0; i < count; i++) {
    const cx = Math.floor(rng() * size);
    const cy = Math.floor(rng() * size);
    const half = Math.floor(patch / 2);
    for (let y = Math.max(0, cy - half); y < Math.min(size, cy + half); y++) {
      for (let x = Math.max(0, cx - half); x < Math.min(size, cx + half); x++) {
        const base = i * pixelsPer + (y * size + x) * CHANNELS;
        images[base] = 0;
        images[base + 1] = 0;
        images[base + 2] = 0;
      }
    }
  }
}

/**
 * Validation accuracy (percent) of a model over labeled image tensors.
 *
 * If `cutoff` returns true between chunks the remaining images are skipped
 * and the accuracy is computed over the images seen so far (the split order
 * is already shuffled, so any prefix is an unbiased sample). At least one
 * chunk is always evaluated.
 */
export function evaluateAccuracy(
  model: tf.LayersModel,
  images: tf.Tensor4D,
  labels: Int32Array,
  batchSize = 256,
  cutoff?: () => boolean,
): number {
  const total = labels.length;
  let seen = 0;
  let correct = 0;
  for (let start = 0; start < total; start += batchSize) {
    if (start > 0 && cutoff && cutoff()) break;
    const end = Math.min(total, start + batchSize);
    seen = end;
    const predicted = tf.tidy(() => {
      const slice = images.slice([start, 0, 0, 0], [end - start, -1, -1, -1]);
      const logits = model.predict(slice) as tf.Tensor2D;
      return logits.argMax(-1);
    });
    const values = predicted.dataSync();
    predicted.dispose();
    for (let i = 0; i < values.length; i++) {
      if (values[i] === labels[start + i]) correct++;
    }
  }
  return (100 * correct) / Math.max(1, seen);
}

function l2Penalty(model: tf.LayersModel, weightDecay: number): tf.Scalar {
  let penalty = tf.scalar(0);
  for (const weight of model.trainableWeights) {
    if (!weight.name.includes("kernel")) continue;
    const tensor = weight.read();
    penalty = penalty.add(tensor.square().sum().mul(weightDecay)) as tf.Scalar;
  }
  return penalty as tf.Scalar;
}

// empirically a train step costs ~35x the forward pass on the cpu backend;
// used to predict whether the next batch still fits the budget
const BACKWARD_FACTOR = 35;
// images per forward chunk during probing and evaluation
const EVAL_CHUNK = 16;
// evaluation may spill at most this far past the budget before it is cut off
const EVAL_SPILL_MS = 2000;

/** Milliseconds since process start: imports and startup count against the budget. */
function clockMs(): number {
  return process.uptime() * 1000;
}

export function train(options: TrainOptions): TrainResult {
  const start = clockMs();
  const budgetMs = options.budgetSeconds * 1000;
  const resolution = scaledResolution(options.multipliers);
  const pool = fixtureLabels(options.poolPerClass * NUM_CLASSES);
  const split = subsample(pool, options.seed, options.trainPerClass, options.valPerClass);

  const trainData = materialize(split.train, resolution);
  const valData = materialize(split.val, resolution);
  const valImages = tf.tensor4d(valData.images, [
    split.val.length,
    resolution,
    resolution,
    CHANNELS,
  ]);

  const model = buildModel(options.family, options.multipliers, 0, options.seed);
  const optimizer = makeOptimizer(options.optimizerIndex, options.learningRate);
  const rng = mulberry32(0xc0ffee ^ options.seed);
  const pixelsPer = resolution * resolution * CHANNELS;
  const n = split.train.length;

  // one-sample forward probe calibrates per-batch and evaluation estimates,
  // so even a model too large to train one batch in budget exits on time
  // the first pass pays one-time kernel setup costs; time the second
  const probeCount = Math.min(EVAL_CHUNK, n);
  let chunkForwardMs = 1;
  for (let pass = 0; pass < 2; pass++) {
    const probeStart = clockMs();
    tf.tidy(() => {
      const probe = tf.tensor4d(
        trainData.images.subarray(0, probeCount * pixelsPer),
        [probeCount, resolution, resolution, CHANNELS],
      );
      (model.predict(probe) as tf.Tensor).dataSync();
    });
    chunkForwardMs = Math.max(1, clockMs() - probeStart);
  }
  const evalEstimateMs =
    1.5 * chunkForwardMs * Math.ceil(split.val.length / EVAL_CHUNK);
  let batchEstimateMs =
    BACKWARD_FACTOR * chunkForwardMs * (options.batchSize / probeCount);

  let epochsRun = 0;
  let batchesRun = 0;
  let outOfTime = false;

  for (let epoch = 0; epoch < MAX_EPOCH && !outOfTime; epoch++) {
    (optimizer as unknown as { learningRate: number }).learningRate =
      cosineLearningRate(options.learningRate, epoch);
    const order = shuffledIndices(n, rng);
    for (let cursor = 0; cursor + options.batchSize <= n; cursor += options.batchSize) {
      // stop unless the next batch plus the final evaluation fit the budget
      const elapsed = clockMs() - start;
      if (elapsed + batchEstimateMs + evalEstimateMs >= budgetMs) {
        outOfTime = true;
        break;
      }
      const batchStart = clockMs();
      const count = options.batchSize;
      const images = new Float32Array(count * pixelsPer);
      const labels = new Int32Array(count);
      for (let i = 0; i < count; i++) {
        const row = order[cursor + i];
        images.set(
          trainData.images.subarray(row * pixelsPer, (row + 1) * pixelsPer),
          i * pixelsPer,
        );
        labels[i] = trainData.labels[row];
      }
      if (options.cutout) {
        applyCutout(images, count, resolution, options.cutoutSize, rng);
      }
      const xs = tf.tensor4d(images, [count, resolution, resolution, CHANNELS]);
      const ys = tf.oneHot(tf.tensor1d(labels, "int32"), NUM_CLASSES);
      optimizer.minimize(() =>
        tf.tidy(() => {
          const logits = model.apply(xs, { training: true }) as tf.Tensor2D;
          let loss = tf.losses.softmaxCrossEntropy(ys, logits) as tf.Scalar;
          if (options.weightDecay > 0) {
            loss = loss.add(l2Penalty(model, options.weightDecay)) as tf.Scalar;
          }
          return loss;
        }),
      );
      xs.dispose();
      ys.dispose();
      batchesRun++;
      batchEstimateMs = 1.2 * (clockMs() - batchStart);
    }
    if (!outOfTime) epochsRun++;
  }

  const accuracy = evaluateAccuracy(
    model,
    valImages,
    valData.labels,
    EVAL_CHUNK,
    () => clockMs() - start >= budgetMs + EVAL_SPILL_MS,
  );
  valImages.dispose();
  return {
    accuracy,
    epochsRun,
    batchesRun,
    elapsedSeconds: (clockMs() - start) / 1000,
  };
}
