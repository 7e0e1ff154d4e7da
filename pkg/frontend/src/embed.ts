/**
 * Embedding file writer matching the evaluator's text format:
 * header line "n dim", then one line per item: id<TAB>label<TAB>v1 ... v_dim.
 */

import { writeFileSync } from "node:fs";

export interface EmbeddingRow {
  id: string;
  label: string;
  vector: Float32Array | number[];
}

export function writeEmbeddings(rows: EmbeddingRow[], path: string): void {
  if (rows.length === 0) throw new Error("no embedding rows to write");
  const dim = rows[0].vector.length;
  const lines = [`${rows.length} ${dim}`];
  for (const r of rows) {
    if (r.vector.length !== dim) {
      throw new Error(`inconsistent vector dimension for ${r.id}`);
    }
    const vec = Array.from(r.vector, (v) => {
      if (!Number.isFinite(v)) throw new Error(`non-finite value for ${r.id}`);
      return v.toString();
    }).join(" ");
    lines.push(`${r.id}\t${r.label}\t${vec}`);
  }
  writeFileSync(path, lines.join("\n") + "\n");
}

export function writePredictions(
  rows: { id: string; label: string; predicted: string }[],
  path: string,
): void {
  const lines = ["id,label,predicted"];
  for (const r of rows) lines.push(`${r.id},${r.label},${r.predicted}`);
  writeFileSync(path, lines.join("\n") + "\n");
}
