import { describe, expect, it } from "vitest";

import {
  SEP, Vocab, segments, tokenize, truncateRecord,
} from "../src/tokenizer.js";

const SOURCE = Array.from({ length: 50 }, (_, i) => `tok${i}`).join(" ");
// each rendered pair tokenizes to exactly 30 tokens: [SEP] cin > > p0..p26
const PAIR = (n: number) =>
  `${SEP}cin>>${Array.from({ length: 26 }, (_, i) => `p${n}_${i}`).join(" ")}`;

describe("tokenize", () => {
  it("splits identifiers, numbers, and punctuation", () => {
    expect(tokenize("int main() { return x1+2.5; }")).toEqual([
      "int", "main", "(", ")", "{", "return", "x1", "+", "2.5", ";", "}",
    ]);
  });

  it("keeps [SEP] and hex escapes as single tokens", () => {
    expect(tokenize("a[SEP]b \\xff c")).toEqual(["a", "[SEP]", "b", "\\xff", "c"]);
  });
});

describe("truncateRecord", () => {
  const text = SOURCE + PAIR(1) + PAIR(2) + PAIR(3);

  it("keeps everything under a generous budget", () => {
    const r = truncateRecord(text, 400);
    expect(r.pairsKept).toBe(3);
    expect(r.sourceTruncated).toBe(false);
    expect(r.tokens.length).toBe(50 + 3 * 30); // 30 tokens per rendered pair
  });

  it("drops whole pairs from the end before touching the source", () => {
    const r = truncateRecord(text, 120);
    expect(r.pairsKept).toBe(2);
    expect(r.sourceTruncated).toBe(false);
    expect(r.tokens.length).toBe(110);
    expect(r.tokens.slice(0, 50)).toEqual(tokenize(SOURCE));
  });

  it("truncates the source only after all pairs are gone", () => {
    const r = truncateRecord(text, 30);
    expect(r.pairsKept).toBe(0);
    expect(r.sourceTruncated).toBe(true);
    expect(r.tokens).toEqual(tokenize(SOURCE).slice(0, 30));
  });

  it("never exceeds the budget", () => {
    for (const budget of [1, 30, 49, 50, 51, 80, 110, 140, 1000]) {
      expect(truncateRecord(text, budget).tokens.length)
        .toBeLessThanOrEqual(budget);
    }
  });

  it("handles records with no pairs", () => {
    const r = truncateRecord(SOURCE, 400);
    expect(r.pairsKept).toBe(0);
    expect(r.sourceTruncated).toBe(false);
  });
});

describe("segments", () => {
  it("splits source and pairs at [SEP] markers", () => {
    const segs = segments(`src a b${SEP}p one${SEP}q two`);
    expect(segs).toEqual(["src a b", `${SEP}p one`, `${SEP}q two`]);
  });
});

describe("Vocab", () => {
  it("reserves pad/unk/sep and maps unknown tokens to unk", () => {
    const v = new Vocab(100);
    v.fit(["int main int"]);
    const ids = v.encode(["int", "main", "zzz", "[SEP]"]);
    expect(ids[0]).toBeGreaterThan(2);
    expect(ids[2]).toBe(1); // unk
    expect(ids[3]).toBe(2); // sep
  });

  it("caps vocabulary size keeping the most frequent tokens", () => {
    const v = new Vocab(5);
    v.fit(["a a a b b c d e f"]);
    expect(v.size).toBe(5);
    expect(v.encode(["a", "b"])[0]).not.toBe(1);
    expect(v.encode(["f"])[0]).toBe(1);
  });
});
