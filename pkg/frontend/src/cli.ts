#!/usr/bin/env node
/** CLI: train-embed (one arm/task) and experiment (FineT vs FuzzT). */

import { parseArgs } from "node:util";

import { readDataset, readSplits } from "./data.js";
import { writeEmbeddings, writePredictions } from "./embed.js";
import { runExperiment } from "./experiment.js";
import { Arm, DEFAULT_CONFIG, Task, trainAndEmbed } from "./train.js";

function usage(msg?: string): never {
  if (msg) console.error(msg);
  console.error(`usage:
  tune train-embed --dataset D.jsonl --splits S.json --arm finet|fuzzt \\
      --task clone|classification --out OUT [--seed N] [--epochs N]
  tune experiment --finet D1.jsonl --fuzzt D2.jsonl --splits S.json \\
      --out-dir DIR [--seeds 1,2,3] [--epochs N]`);
  process.exit(1);
}

function main(argv: string[]): void {
  const cmd = argv[0];
  const opts = parseArgs({
    args: argv.slice(1),
    options: {
      dataset: { type: "string" },
      splits: { type: "string" },
      arm: { type: "string" },
      task: { type: "string" },
      out: { type: "string" },
      seed: { type: "string" },
      epochs: { type: "string" },
      finet: { type: "string" },
      fuzzt: { type: "string" },
      "out-dir": { type: "string" },
      seeds: { type: "string" },
    },
  }).values;

  if (cmd === "train-embed") {
    const { dataset, splits, arm, task, out } = opts;
    if (!dataset || !splits || !arm || !task || !out) usage("missing flags");
    if (arm !== "finet" && arm !== "fuzzt") usage(`bad arm: ${arm}`);
    if (task !== "clone" && task !== "classification") usage(`bad task: ${task}`);
    const result = trainAndEmbed(readDataset(dataset), readSplits(splits), {
      ...DEFAULT_CONFIG,
      arm: arm as Arm,
      task: task as Task,
      seed: opts.seed ? Number(opts.seed) : DEFAULT_CONFIG.seed,
      epochs: opts.epochs ? Number(opts.epochs) : DEFAULT_CONFIG.epochs,
    });
    if (task === "clone") {
      writeEmbeddings(result.embeddings, out);
    } else {
      writePredictions(result.predictions, out);
    }
    console.log(JSON.stringify({
      bestEpoch: result.bestEpoch,
      valHistory: result.valHistory,
    }));
    return;
  }

  if (cmd === "experiment") {
    const { finet, fuzzt, splits } = opts;
    const outDir = opts["out-dir"];
    if (!finet || !fuzzt || !splits || !outDir) usage("missing flags");
    const result = runExperiment({
      finetPath: finet,
      fuzztPath: fuzzt,
      splitsPath: splits,
      outDir,
      seeds: opts.seeds ? opts.seeds.split(",").map(Number) : undefined,
      epochs: opts.epochs ? Number(opts.epochs) : undefined,
    });
    console.log(JSON.stringify(result, null, 2));
    return;
  }

  usage(`unknown command: ${cmd}`);
}

main(process.argv.slice(2));
