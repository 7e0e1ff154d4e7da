/**
 * Code tokenizer with a budgeted truncation policy.
 *
 * Record text is `source` followed by zero or more rendered input/output
 * pairs, each introduced by the literal "[SEP]" marker.  When a record
 * exceeds the token budget, whole pairs are dropped from the end first;
 * the source is truncated only after every pair is gone.
 */

export const PAD = "<pad>";
export const UNK = "<unk>";
export const SEP = "[SEP]";

const TOKEN_RE = /\[SEP\]|[A-Za-z_][A-Za-z0-9_]*|\d+(?:\.\d+)?|\\x[0-9a-fA-F]{2}|[^\sA-Za-z0-9_]/g;

export function tokenize(text: string): string[] {
  return text.match(TOKEN_RE) ?? [];
}

/** Split record text into [source, pair1, pair2, ...] at [SEP] markers. */
export function segments(text: string): string[] {
  const parts = text.split(SEP);
  return [parts[0], ...parts.slice(1).map((p) => SEP + p)];
}

/** Apply the drop-whole-pairs-then-truncate policy at `maxTokens`. */
export function truncateRecord(
  text: string,
  maxTokens: number,
): { tokens: string[]; pairsKept: number; sourceTruncated: boolean } {
  const segs = segments(text);
  const tokenized = segs.map(tokenize);
  let kept = tokenized.length - 1;
  const total = () =>
    tokenized.slice(0, kept + 1).reduce((n, t) => n + t.length, 0);
  while (kept > 0 && total() > maxTokens) kept--;
  let tokens = tokenized.slice(0, kept + 1).flat();
  let sourceTruncated = false;
  if (tokens.length > maxTokens) {
    tokens = tokens.slice(0, maxTokens);
    sourceTruncated = true;
  }
  return { tokens, pairsKept: kept, sourceTruncated };
}

export class Vocab {
  readonly index = new Map<string, number>();

  constructor(maxSize = 4096) {
    this.index.set(PAD, 0);
    this.index.set(UNK, 1);
    this.index.set(SEP, 2);
    this.maxSize = maxSize;
  }

  private readonly maxSize: number;

  /** Build from training texts: most frequent tokens first (stable order). */
  fit(texts: string[]): void {
    const freq = new Map<string, number>();
    for (const t of texts) {
      for (const tok of tokenize(t)) freq.set(tok, (freq.get(tok) ?? 0) + 1);
    }
    const ranked = [...freq.entries()].sort(
      (a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1),
    );
    for (const [tok] of ranked) {
      if (this.index.size >= this.maxSize) break;
      if (!this.index.has(tok)) this.index.set(tok, this.index.size);
    }
  }

  get size(): number {
    return this.index.size;
  }

  encode(tokens: string[]): Int32Array {
    const ids = new Int32Array(tokens.length);
    for (let i = 0; i < tokens.length; i++) {
      ids[i] = this.index.get(tokens[i]) ?? 1;
    }
    return ids;
  }
}
