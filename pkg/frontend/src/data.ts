/** Readers for the pipeline's dataset JSONL and splits manifest. */

import { readFileSync } from "node:fs";

export interface DatasetRecord {
  program_id: string;
  problem_id: string;
  text: string;
  n_pairs_used: number;
  template_kind: string;
  split_tag: string;
}

export interface SplitsManifest {
  train: string[];
  val: string[];
  test: string[];
}

export function readDataset(path: string): DatasetRecord[] {
  const lines = readFileSync(path, "utf8").split("\n").filter((l) => l.trim());
  return lines.map((line, i) => {
    const d = JSON.parse(line);
    for (const field of ["program_id", "problem_id", "text", "template_kind"]) {
      if (!(field in d)) {
        throw new Error(`${path}:${i + 1}: record missing field ${field}`);
      }
    }
    return d as DatasetRecord;
  });
}

export function readSplits(path: string): SplitsManifest {
  const d = JSON.parse(readFileSync(path, "utf8"));
  for (const part of ["train", "val", "test"]) {
    if (!Array.isArray(d[part])) {
      throw new Error(`${path}: splits manifest missing ${part} list`);
    }
  }
  return { train: d.train, val: d.val, test: d.test };
}

/** Partition dataset records by the id lists in a splits manifest. */
export function partition(
  records: DatasetRecord[],
  splits: SplitsManifest,
): { train: DatasetRecord[]; val: DatasetRecord[]; test: DatasetRecord[] } {
  const by = new Map(records.map((r) => [r.program_id, r]));
  const pick = (ids: string[]) =>
    ids.flatMap((id) => (by.has(id) ? [by.get(id)!] : []));
  return { train: pick(splits.train), val: pick(splits.val), test: pick(splits.test) };
}
