/**
 * Builds the experiment fixtures: a synthetic corpus of 10 classes x 20
 * programs where class membership is behavioral, not syntactic.
 *
 * Every class c implements y = (x * A_c + B_c) mod 97 (value-normalized for
 * negative x).  The 20 surface styles are shared across classes, and each
 * program carries seeded distractor constants, so source text correlates
 * with style, not class; harvested input/output pairs reveal the class
 * directly.  The corpus is pushed through the data pipeline CLI once, then
 * emitted twice: template `none` (finet arm) and `pl_cpp` (fuzzt arm).
 *
 * Usage: tsx scripts/make_fixtures.ts [outDir]  (default: fixtures/)
 */

import { execFileSync } from "node:child_process";
import { copyFileSync, mkdirSync, mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

import { Rng } from "../src/rng.js";

const M = 97;

interface ClassSpec {
  a: number;
  b: number;
}

// distinct (a, b) per class; b mod 97 pairwise distinct so even the
// constant-input pair (failed parse -> x = 0) separates classes
const CLASSES: ClassSpec[] = Array.from({ length: 10 }, (_, c) => ({
  a: 2 * c + 3,
  b: 11 * c + 5,
}));

/**
 * 20 surface styles; every style computes exactly (x*a + b) mod 97.
 *
 * The class constants never appear as literals: each is split into two
 * per-program random positive addends (`a = a1 + a2`, `b = b1 + b2`), so
 * every numeric token in a source is program-specific noise and only the
 * *sums* are class-determined.  Text correlates with style, behavior with
 * class.
 */
function render(style: number, a: number, b: number, rng: Rng): string {
  const names = [
    ["x", "y"], ["n", "r"], ["val", "res"], ["inp", "out_v"],
  ][style % 4];
  const [vx, vy] = names;
  const a1 = 1 + rng.int(a - 1), a2 = a - a1;
  const b1 = 1 + rng.int(b - 1), b2 = b - b1;
  const d1 = 100 + rng.int(900); // distractor constants, class-independent
  const d2 = 10 + rng.int(90);
  const shape = Math.floor(style / 4); // 5 computation shapes
  let compute: string;
  switch (shape) {
    case 0:
      compute =
        `    long long ${vy} = ((${vx} * (${a1}LL + ${a2}) + ${b1} + ${b2})` +
        ` % 97 + 97) % 97;\n`;
      break;
    case 1:
      compute =
        `    long long ${vy} = ${b1} + ${b2};\n` +
        `    for (int i = 0; i < ${a1} + ${a2}; i++) ${vy} += ${vx};\n` +
        `    ${vy} = (${vy} % 97 + 97) % 97;\n`;
      break;
    case 2:
      compute =
        `    long long t = ${vx} * (${a1}LL + ${a2});\n` +
        `    long long ${vy} = t + ${b1} + ${b2};\n` +
        `    ${vy} = (${vy} % 97 + 97) % 97;\n`;
      break;
    case 3:
      compute =
        `    long long ${vy} = step(${vx});\n`;
      break;
    default:
      compute =
        `    long long acc[2] = {${b1} + ${b2}, 0};\n` +
        `    acc[1] = ${vx} * (${a1}LL + ${a2});\n` +
        `    long long ${vy} = ((acc[0] + acc[1]) % 97 + 97) % 97;\n`;
  }
  const helper = shape === 3
    ? `static long long step(long long v) {\n` +
      `    return ((v * (${a1}LL + ${a2}) + ${b1} + ${b2}) % 97 + 97) % 97;\n}\n\n`
    : "";
  const deadCode = style % 2 === 0
    ? `    int pad[${d2}]; pad[0] = ${d1}; (void)pad;\n`
    : `    const int scratch = ${d1}; (void)scratch;\n`;
  return (
    `#include <cstdio>\n\n` +
    helper +
    `int main() {\n` +
    `    long long ${vx} = 0;\n` +
    `    scanf("%lld", &${vx});\n` +
    deadCode +
    compute +
    `    printf("%lld\\n", ${vy});\n` +
    `    return 0;\n` +
    `}\n`
  );
}

function run(cmd: string, args: string[]): void {
  console.log(`+ ${cmd} ${args.join(" ")}`);
  execFileSync(cmd, args, { stdio: "inherit" });
}

function main(): void {
  const outDir = resolve(process.argv[2] ?? join(import.meta.dirname, "..", "fixtures"));
  mkdirSync(outDir, { recursive: true });
  const work = mkdtempSync(join(tmpdir(), "tune-fixtures-"));
  const corpus = join(work, "corpus");
  const rng = new Rng(97);
  for (let c = 0; c < CLASSES.length; c++) {
    const dir = join(corpus, String(c + 1));
    mkdirSync(dir, { recursive: true });
    for (let style = 0; style < 20; style++) {
      const src = render(style, CLASSES[c].a, CLASSES[c].b, rng.fork(`${c}/${style}`));
      writeFileSync(join(dir, `${style}.cpp`), src);
    }
  }
  const ws = join(work, "ws");
  run("fuzzaug", [
    "ingest", "-w", ws, corpus,
    "--seed", "9", "--budget-minutes", "0.5",
    "--exhaust-havoc-execs", "60", "--max-execs", "400",
    "--max-pairs", "3", "--max-pair-chars", "200",
    "--workers", "4",
  ]);
  run("fuzzaug", ["pipeline", "-w", ws, "--template", "none"]);
  run("fuzzaug", [
    "split", "-w", ws, "--task", "classification",
    "--fractions", "3/5,1/5,1/5", "--seed", "1",
  ]);
  run("fuzzaug", ["emit", "-w", ws, "--template", "none",
    "--out", join(outDir, "dataset_finet.jsonl")]);
  run("fuzzaug", ["emit", "-w", ws, "--template", "pl_cpp",
    "--out", join(outDir, "dataset_fuzzt.jsonl")]);
  copyFileSync(join(ws, "splits.json"), join(outDir, "splits.json"));
  console.log(`fixtures written to ${outDir} (workspace kept at ${ws})`);
}

main();
