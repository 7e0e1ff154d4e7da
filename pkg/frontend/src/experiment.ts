/**
 * FineT-vs-FuzzT directional comparison.
 *
 * Both arms read datasets emitted from the *same* pipeline workspace (same
 * programs, same splits, same fuzzing run); the only difference is the
 * record text: `finet` was emitted with template `none` (source only),
 * `fuzzt` with an input/output pair template. Per seed we train one clone
 * model (supervised contrastive) and one classifier per arm, then score
 * MAP@R via the evaluator CLI and classification error directly.
 */

import { execFileSync } from "node:child_process";
import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { DatasetRecord, SplitsManifest, readDataset, readSplits } from "./data.js";
import { writeEmbeddings, writePredictions } from "./embed.js";
import { Arm, DEFAULT_CONFIG, TuneConfig, trainAndEmbed } from "./train.js";

export interface ArmSeedResult {
  arm: Arm;
  seed: number;
  mapAtR: number;
  errorRate: number;
}

export interface ExperimentResult {
  runs: ArmSeedResult[];
  meanMapFinet: number;
  meanMapFuzzt: number;
  mapGainPoints: number;
  errorLowerCount: number; // seeds where fuzzt error < finet error
  seeds: number[];
}

/** Score an embedding file with the evaluator CLI; returns MAP@R in [0,1]. */
export function evalMapAtR(embeddingsPath: string, workdir: string): number {
  const reportPath = join(workdir, "report.json");
  execFileSync("fuzzaug", ["eval", embeddingsPath, "--report", reportPath], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  const report = JSON.parse(readFileSync(reportPath, "utf8"));
  if (typeof report.map_at_r !== "number") {
    throw new Error(`evaluator report missing map_at_r: ${reportPath}`);
  }
  return report.map_at_r;
}

export function errorRate(
  predictions: { label: string; predicted: string }[],
): number {
  if (predictions.length === 0) throw new Error("no predictions");
  const wrong = predictions.filter((p) => p.predicted !== p.label).length;
  return wrong / predictions.length;
}

/**
 * Arm parity audit: the two datasets must be identical record-for-record
 * except in the `text` and `n_pairs_used`/`template_kind` augmentation
 * fields; ids, labels, order, and split tags must match exactly.
 */
export function auditArmParity(
  finet: DatasetRecord[], fuzzt: DatasetRecord[],
): string[] {
  const problems: string[] = [];
  if (finet.length !== fuzzt.length) {
    problems.push(`record counts differ: ${finet.length} vs ${fuzzt.length}`);
    return problems;
  }
  finet.forEach((a, i) => {
    const b = fuzzt[i];
    if (a.program_id !== b.program_id) problems.push(`row ${i}: id ${a.program_id} vs ${b.program_id}`);
    if (a.problem_id !== b.problem_id) {
      problems.push(`row ${i}: problem ${a.problem_id} vs ${b.problem_id}`);
    }
    if (a.split_tag !== b.split_tag) {
      problems.push(`row ${i}: split ${a.split_tag} vs ${b.split_tag}`);
    }
    if (!b.text.startsWith(a.text.trimEnd()) && a.text !== b.text) {
      problems.push(`row ${i}: fuzzt text does not extend finet source`);
    }
  });
  return problems;
}

export interface ExperimentInputs {
  finetPath: string;
  fuzztPath: string;
  splitsPath: string;
  outDir: string;
  seeds?: number[];
  epochs?: number;
}

export function runExperiment(inputs: ExperimentInputs): ExperimentResult {
  const finet = readDataset(inputs.finetPath);
  const fuzzt = readDataset(inputs.fuzztPath);
  const splits: SplitsManifest = readSplits(inputs.splitsPath);
  const parity = auditArmParity(finet, fuzzt);
  if (parity.length > 0) {
    throw new Error(`arm parity audit failed:\n${parity.join("\n")}`);
  }
  mkdirSync(inputs.outDir, { recursive: true });
  const seeds = inputs.seeds ?? [1, 2, 3];
  const runs: ArmSeedResult[] = [];
  for (const seed of seeds) {
    for (const [arm, records] of [["finet", finet], ["fuzzt", fuzzt]] as
      [Arm, DatasetRecord[]][]) {
      const base: TuneConfig = {
        ...DEFAULT_CONFIG,
        arm,
        task: "clone",
        seed,
        epochs: inputs.epochs ?? DEFAULT_CONFIG.epochs,
      };
      const clone = trainAndEmbed(records, splits, base);
      const embPath = join(inputs.outDir, `emb_${arm}_s${seed}.txt`);
      writeEmbeddings(clone.embeddings, embPath);
      const mapAtR = evalMapAtR(embPath, inputs.outDir);
      const cls = trainAndEmbed(records, splits,
        { ...base, task: "classification" });
      writePredictions(cls.predictions,
        join(inputs.outDir, `pred_${arm}_s${seed}.csv`));
      runs.push({ arm, seed, mapAtR, errorRate: errorRate(cls.predictions) });
    }
  }
  const byArm = (arm: Arm) => runs.filter((r) => r.arm === arm);
  const mean = (xs: number[]) => xs.reduce((a, b) => a + b, 0) / xs.length;
  const meanMapFinet = mean(byArm("finet").map((r) => r.mapAtR));
  const meanMapFuzzt = mean(byArm("fuzzt").map((r) => r.mapAtR));
  let errorLowerCount = 0;
  for (const seed of seeds) {
    const f = runs.find((r) => r.arm === "finet" && r.seed === seed)!;
    const z = runs.find((r) => r.arm === "fuzzt" && r.seed === seed)!;
    if (z.errorRate < f.errorRate) errorLowerCount++;
  }
  const result: ExperimentResult = {
    runs,
    meanMapFinet,
    meanMapFuzzt,
    mapGainPoints: 100 * (meanMapFuzzt - meanMapFinet),
    errorLowerCount,
    seeds,
  };
  writeFileSync(join(inputs.outDir, "metrics.json"),
    JSON.stringify(result, null, 2) + "\n");
  return result;
}
