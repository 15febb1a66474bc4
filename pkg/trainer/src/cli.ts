#!/usr/bin/env node
/**
 * Blackbox entry point: `trainer --mode {nas|hpo} [options] <input> <seed>`.
 *
 * Reads a one-line point file, trains within the wall-clock budget, and
 * prints validation accuracy (percent) as the last stdout line. Any invalid
 * point or configuration exits nonzero, which the caller treats as a failed
 * evaluation.
 */

import { readFileSync } from "fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { Family } from "./model";
import { DEFAULT_OPTIONS, OPTIMIZERS, TrainOptions, train } from "./train";

class PointError extends Error {}

function parsePoint(path: string): number[] {
  const text = readFileSync(path, "utf8");
  const tokens = text.trim().split(/\s+/).filter((t) => t.length > 0);
  if (tokens.length === 0) {
    throw new PointError("empty point file");
  }
  const values = tokens.map((token) => {
    const value = Number(token);
    if (!Number.isFinite(value)) {
      throw new PointError(`bad token ${JSON.stringify(token)} in point file`);
    }
    return value;
  });
  return values;
}

function nasOptions(point: number[], base: TrainOptions): TrainOptions {
  if (point.length !== 3) {
    throw new PointError(`nas mode expects 3 multipliers, got ${point.length}`);
  }
  const [depth, width, resolution] = point;
  if (point.some((v) => v <= 0)) {
    throw new PointError("multipliers must be positive");
  }
  return { ...base, multipliers: { depth, width, resolution } };
}

function hpoOptions(point: number[], base: TrainOptions): TrainOptions {
  if (point.length !== 4) {
    throw new PointError(`hpo mode expects lr wd opt_index batch, got ${point.length}`);
  }
  const [lr, wd, optIndex, batch] = point;
  if (lr <= 0 || wd < 0) {
    throw new PointError("learning rate must be positive, weight decay nonnegative");
  }
  if (!Number.isInteger(optIndex) || optIndex < 0 || optIndex >= OPTIMIZERS.length) {
    throw new PointError(`optimizer index ${optIndex} outside 0..${OPTIMIZERS.length - 1}`);
  }
  if (!Number.isInteger(batch) || batch < 1) {
    throw new PointError(`batch size ${batch} is not a positive integer`);
  }
  return {
    ...base,
    learningRate: lr,
    weightDecay: wd,
    optimizerIndex: optIndex,
    batchSize: batch,
  };
}

function parseMultipliers(text: string): { depth: number; width: number; resolution: number } {
  const parts = text.split(",").map(Number);
  if (parts.length !== 3 || parts.some((v) => !Number.isFinite(v) || v <= 0)) {
    throw new PointError(`bad --multipliers ${JSON.stringify(text)}`);
  }
  return { depth: parts[0], width: parts[1], resolution: parts[2] };
}

export function main(argvRaw: string[]): number {
  const argv = yargs(argvRaw)
    .usage("$0 --mode {nas|hpo} [options] <input> <seed>")
    .command("$0 <input> <seed>", "train and print validation accuracy")
    .positional("input", { type: "string", describe: "one-line point file" })
    .positional("seed", { type: "number", describe: "training seed" })
    .option("mode", {
      choices: ["nas", "hpo"] as const,
      demandOption: true,
      describe: "point file interpretation",
    })
    .option("family", {
      choices: ["resnet18", "senet18"] as const,
      default: "senet18" as Family,
    })
    .option("budget-seconds", { type: "number", default: DEFAULT_OPTIONS.budgetSeconds })
    .option("cutout", { type: "boolean", default: false })
    .option("cutout-size", { type: "number", default: DEFAULT_OPTIONS.cutoutSize })
    .option("multipliers", {
      type: "string",
      default: "1,1,1",
      describe: "hpo mode: fixed depth,width,resolution of the trained model",
    })
    .option("train-per-class", { type: "number", default: DEFAULT_OPTIONS.trainPerClass })
    .option("val-per-class", { type: "number", default: DEFAULT_OPTIONS.valPerClass })
    .option("pool-per-class", { type: "number", default: DEFAULT_OPTIONS.poolPerClass })
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      throw err ?? new PointError(msg);
    })
    .parseSync();

  const seed = Number(argv.seed);
  if (!Number.isInteger(seed)) {
    throw new PointError(`seed ${argv.seed} is not an integer`);
  }
  const base: TrainOptions = {
    ...DEFAULT_OPTIONS,
    family: argv.family as Family,
    budgetSeconds: argv["budget-seconds"] as number,
    cutout: argv.cutout as boolean,
    cutoutSize: argv["cutout-size"] as number,
    multipliers: parseMultipliers(argv.multipliers as string),
    trainPerClass: argv["train-per-class"] as number,
    valPerClass: argv["val-per-class"] as number,
    poolPerClass: argv["pool-per-class"] as number,
    seed,
  };
  const point = parsePoint(argv.input as string);
  const options = argv.mode === "nas" ? nasOptions(point, base) : hpoOptions(point, base);
  const result = train(options);
  console.log(result.accuracy.toFixed(4));
  return 0;
}

if (require.main === module) {
  try {
    process.exit(main(hideBin(process.argv)));
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  }
}
