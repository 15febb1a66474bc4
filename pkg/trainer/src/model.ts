/**
 * CIFAR-style ResNet-18 / SENet-18 built from depth/width/resolution
 * multipliers. Scaling uses half-away-from-zero rounding floored at 1, the
 * same rule the search driver applies when counting MACs, so the trained
 * network is exactly the architecture being costed.
 */

import * as tf from "@tensorflow/tfjs";
import { NUM_CLASSES } from "./dataset";

export type Family = "resnet18" | "senet18";

export interface Multipliers {
  depth: number;
  width: number;
  resolution: number;
}

export const IDENTITY: Multipliers = { depth: 1, width: 1, resolution: 1 };

const BASE_RESOLUTION = 32;
const BASE_STEM = 64;
const BASE_STAGES = [
  { blocks: 2, channels: 64, stride: 1 },
  { blocks: 2, channels: 128, stride: 2 },
  { blocks: 2, channels: 256, stride: 2 },
  { blocks: 2, channels: 512, stride: 2 },
];
const SE_REDUCTION = 16;

export function roundHalfAway(x: number): number {
  return x >= 0 ? Math.floor(x + 0.5) : -Math.floor(-x + 0.5);
}

export function scaled(value: number, mult: number): number {
  return Math.max(1, roundHalfAway(value * mult));
}

export function scaledResolution(m: Multipliers): number {
  return scaled(BASE_RESOLUTION, m.resolution);
}

function conv(
  x: tf.SymbolicTensor,
  filters: number,
  kernel: number,
  stride: number,
  weightDecay: number,
  seed: number,
): tf.SymbolicTensor {
  const regularizer =
    weightDecay > 0 ? tf.regularizers.l2({ l2: weightDecay }) : undefined;
  let out = tf.layers
    .conv2d({
      filters,
      kernelSize: kernel,
      strides: stride,
      padding: "same",
      useBias: false,
      kernelInitializer: tf.initializers.heNormal({ seed }),
      kernelRegularizer: regularizer,
    })
    .apply(x) as tf.SymbolicTensor;
  out = tf.layers.batchNormalization().apply(out) as tf.SymbolicTensor;
  return out;
}

function seGate(
  x: tf.SymbolicTensor,
  channels: number,
  seed: number,
): tf.SymbolicTensor {
  const reduced = Math.max(1, roundHalfAway(channels / SE_REDUCTION));
  let gate = tf.layers.globalAveragePooling2d({}).apply(x) as tf.SymbolicTensor;
  gate = tf.layers
    .reshape({ targetShape: [1, 1, channels] })
    .apply(gate) as tf.SymbolicTensor;
  gate = tf.layers
    .conv2d({
      filters: reduced,
      kernelSize: 1,
      activation: "relu",
      useBias: false,
      kernelInitializer: tf.initializers.heNormal({ seed }),
    })
    .apply(gate) as tf.SymbolicTensor;
  gate = tf.layers
    .conv2d({
      filters: channels,
      kernelSize: 1,
      activation: "sigmoid",
      useBias: false,
      kernelInitializer: tf.initializers.heNormal({ seed: seed + 1 }),
    })
    .apply(gate) as tf.SymbolicTensor;
  return tf.layers.multiply().apply([x, gate]) as tf.SymbolicTensor;
}

function basicBlock(
  x: tf.SymbolicTensor,
  inChannels: number,
  outChannels: number,
  stride: number,
  family: Family,
  weightDecay: number,
  seed: number,
): tf.SymbolicTensor {
  let out = conv(x, outChannels, 3, stride, weightDecay, seed);
  out = tf.layers.reLU().apply(out) as tf.SymbolicTensor;
  out = conv(out, outChannels, 3, 1, weightDecay, seed + 1);
  let shortcut = x;
  if (stride !== 1 || inChannels !== outChannels) {
    shortcut = conv(x, outChannels, 1, stride, weightDecay, seed + 2);
  }
  if (family === "senet18") {
    out = seGate(out, outChannels, seed + 3);
  }
  out = tf.layers.add().apply([out, shortcut]) as tf.SymbolicTensor;
  return tf.layers.reLU().apply(out) as tf.SymbolicTensor;
}

export function buildModel(
  family: Family,
  m: Multipliers,
  weightDecay = 0,
  seed = 0,
): tf.LayersModel {
  const resolution = scaledResolution(m);
  const input = tf.input({ shape: [resolution, resolution, 3] });
  const stemChannels = scaled(BASE_STEM, m.width);
  let x = conv(input, stemChannels, 3, 1, weightDecay, seed);
  x = tf.layers.reLU().apply(x) as tf.SymbolicTensor;
  let channels = stemChannels;
  let layerSeed = seed + 10;
  for (const stage of BASE_STAGES) {
    const blocks = scaled(stage.blocks, m.depth);
    const outChannels = scaled(stage.channels, m.width);
    for (let b = 0; b < blocks; b++) {
      const stride = b === 0 ? stage.stride : 1;
      x = basicBlock(x, channels, outChannels, stride, family, weightDecay, layerSeed);
      channels = outChannels;
      layerSeed += 10;
    }
  }
  x = tf.layers.globalAveragePooling2d({}).apply(x) as tf.SymbolicTensor;
  const logits = tf.layers
    .dense({
      units: NUM_CLASSES,
      kernelInitializer: tf.initializers.glorotUniform({ seed: layerSeed }),
    })
    .apply(x) as tf.SymbolicTensor;
  return tf.model({ inputs: input, outputs: logits });
}

/** Trainable parameter count (conv kernels, BN gamma/beta, classifier). */
export function trainableParams(model: tf.LayersModel): number {
  return model.trainableWeights
    .map((w) => w.shape.reduce((a: number, b) => a * (b ?? 1), 1))
    .reduce((a: number, b: number) => a + b, 0);
}
