/**
 * Built-in synthetic 10-class image fixture and stratified subsampling.
 *
 * Images are deterministic functions of (index, class): a class-dependent
 * sinusoidal pattern plus per-image noise, so any slice of the dataset can
 * be materialized lazily and reproducibly.
 */

import { gaussian, mulberry32, shuffledIndices } from "./rng";

export const NUM_CLASSES = 10;
export const IMAGE_SIZE = 32;
export const CHANNELS = 3;
export const DEFAULT_POOL_PER_CLASS = 800;

export class DataError extends Error {}

export interface Split {
  train: number[];
  val: number[];
}

/** Label of fixture image `index`: classes interleave, so any prefix is balanced. */
export function fixtureLabel(index: number): number {
  return index % NUM_CLASSES;
}

export function fixtureLabels(count: number): number[] {
  return Array.from({ length: count }, (_, i) => fixtureLabel(i));
}

/**
 * Materialize one fixture image as HWC float32 in [0, 1].
 *
 * The class signal is a plane wave whose frequency and orientation depend on
 * the label; per-image phase jitter and pixel noise keep the task nontrivial.
 */
export function fixtureImage(index: number, size: number = IMAGE_SIZE): Float32Array {
  const label = fixtureLabel(index);
  const rng = mulberry32(0x9e3779b9 ^ index);
  const freq = 1 + (label % 5);
  const angle = (label / NUM_CLASSES) * Math.PI;
  const dx = Math.cos(angle);
  const dy = Math.sin(angle);
  const phase = rng() * 2 * Math.PI;
  const pixels = new Float32Array(size * size * CHANNELS);
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      const t = ((x * dx + y * dy) / size) * 2 * Math.PI * freq + phase;
      const signal = 0.5 + 0.35 * Math.sin(t);
      for (let c = 0; c < CHANNELS; c++) {
        const tint = 0.1 * Math.sin(t + (c * 2 * Math.PI) / 3);
        const noise = 0.08 * gaussian(rng);
        const value = signal + tint + noise;
        pixels[(y * size + x) * CHANNELS + c] = Math.min(1, Math.max(0, value));
      }
    }
  }
  return pixels;
}

/**
 * Seeded shuffle followed by a stratified draw: the first `trainPerClass`
 * occurrences of each class go to the train split, the next `valPerClass`
 * to the validation split. Train and val are disjoint by construction.
 */
export function subsample(
  labels: number[],
  seed: number,
  trainPerClass = 500,
  valPerClass = 100,
): Split {
  const order = shuffledIndices(labels.length, mulberry32(seed));
  const train: number[] = [];
  const val: number[] = [];
  const trainTaken = new Array(NUM_CLASSES).fill(0);
  const valTaken = new Array(NUM_CLASSES).fill(0);
  for (const index of order) {
    const label = labels[index];
    if (label < 0 || label >= NUM_CLASSES || !Number.isInteger(label)) {
      throw new DataError(`label ${label} outside 0..${NUM_CLASSES - 1}`);
    }
    if (trainTaken[label] < trainPerClass) {
      trainTaken[label]++;
      train.push(index);
    } else if (valTaken[label] < valPerClass) {
      valTaken[label]++;
      val.push(index);
    }
  }
  for (let c = 0; c < NUM_CLASSES; c++) {
    if (trainTaken[c] < trainPerClass || valTaken[c] < valPerClass) {
      throw new DataError(
        `class ${c} has only ${trainTaken[c] + valTaken[c]} images, ` +
          `needs ${trainPerClass + valPerClass}`,
      );
    }
  }
  return { train, val };
}

/** Materialize images/labels for a list of fixture indices. */
export function materialize(
  indices: number[],
  size: number = IMAGE_SIZE,
): { images: Float32Array; labels: Int32Array } {
  const pixelsPer = size * size * CHANNELS;
  const images = new Float32Array(indices.length * pixelsPer);
  const labels = new Int32Array(indices.length);
  indices.forEach((index, row) => {
    images.set(fixtureImage(index, size), row * pixelsPer);
    labels[row] = fixtureLabel(index);
  });
  return { images, labels };
}
