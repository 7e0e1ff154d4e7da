/**
 * Training harness: consumes an emitted dataset + splits manifest, trains
 * the tiny encoder, and produces embeddings (clone retrieval task) or
 * class predictions (classification task).
 *
 * The two arms differ only in their input text: `finet` trains on records
 * rendered with template `none` (source only); `fuzzt` trains on records
 * whose text appends rendered input/output pairs. Program sets, splits,
 * seeds, and schedules are identical across arms.
 */

import { DatasetRecord, SplitsManifest, partition } from "./data.js";
import { Encoder, ForwardCache } from "./model.js";
import { Rng } from "./rng.js";
import { Vocab, truncateRecord } from "./tokenizer.js";

export type Arm = "finet" | "fuzzt";
export type Task = "clone" | "classification";
export type ModelScale = "tiny" | "pretrained_small";

export interface TuneConfig {
  maxTokens: number;
  learningRate: number;
  batchSize: number;
  epochs: number;
  arm: Arm;
  task: Task;
  modelScale: ModelScale;
  seed: number;
  dModel: number;
  dFf: number;
  dOut: number;
  vocabSize: number;
  temperature: number;
}

export const DEFAULT_CONFIG: Omit<TuneConfig, "arm" | "task"> = {
  maxTokens: 400,
  learningRate: 3e-3,
  batchSize: 8,
  epochs: 10,
  modelScale: "tiny",
  seed: 0,
  dModel: 32,
  dFf: 64,
  dOut: 32,
  vocabSize: 4096,
  temperature: 0.1,
};

export interface TuneResult {
  embeddings: { id: string; label: string; vector: Float32Array }[];
  predictions: { id: string; label: string; predicted: string }[];
  bestEpoch: number;
  valHistory: number[];
}

interface Sample {
  id: string;
  label: string;
  ids: Int32Array;
}

function checkArm(records: DatasetRecord[], arm: Arm): void {
  for (const r of records) {
    const augmented = r.template_kind !== "none";
    if (arm === "finet" && augmented) {
      throw new Error(
        `arm finet requires template none, got ${r.template_kind} (${r.program_id})`);
    }
    if (arm === "fuzzt" && !augmented) {
      throw new Error(`arm fuzzt requires augmented records, got none (${r.program_id})`);
    }
  }
}

function prepare(
  records: DatasetRecord[], vocab: Vocab, maxTokens: number,
): Sample[] {
  return records.map((r) => ({
    id: r.program_id,
    label: r.problem_id,
    ids: vocab.encode(truncateRecord(r.text, maxTokens).tokens),
  }));
}

/** Supervised contrastive loss over a batch of L2-normalized embeddings. */
function supConGrads(
  zs: Float32Array[], labels: string[], temperature: number,
): { loss: number; grads: Float32Array[] } {
  const n = zs.length, dim = zs[0].length;
  const sim = new Float32Array(n * n);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      if (i === j) continue;
      let s = 0;
      for (let k = 0; k < dim; k++) s += zs[i][k] * zs[j][k];
      sim[i * n + j] = s / temperature;
    }
  }
  const grads = zs.map(() => new Float32Array(dim));
  let loss = 0, anchors = 0;
  for (let i = 0; i < n; i++) {
    const pos: number[] = [];
    for (let j = 0; j < n; j++) {
      if (j !== i && labels[j] === labels[i]) pos.push(j);
    }
    if (pos.length === 0) continue;
    anchors++;
    let mx = -Infinity;
    for (let j = 0; j < n; j++) {
      if (j !== i && sim[i * n + j] > mx) mx = sim[i * n + j];
    }
    let z = 0;
    const p = new Float32Array(n);
    for (let j = 0; j < n; j++) {
      if (j === i) continue;
      p[j] = Math.exp(sim[i * n + j] - mx);
      z += p[j];
    }
    for (let j = 0; j < n; j++) p[j] /= z;
    for (const j of pos) {
      loss -= (sim[i * n + j] - mx - Math.log(z)) / pos.length;
    }
    // dL_i/ds_ij = p_ij - [j in pos]/|pos|; s_ij touches both z_i and z_j
    for (let j = 0; j < n; j++) {
      if (j === i) continue;
      const ds = (p[j] - (labels[j] === labels[i] ? 1 / pos.length : 0))
        / temperature;
      for (let k = 0; k < dim; k++) {
        grads[i][k] += ds * zs[j][k];
        grads[j][k] += ds * zs[i][k];
      }
    }
  }
  if (anchors > 0) {
    loss /= anchors;
    for (const g of grads) for (let k = 0; k < dim; k++) g[k] /= anchors;
  }
  return { loss, grads };
}

function embedAll(model: Encoder, samples: Sample[]) {
  return samples.map((s) => ({
    id: s.id,
    label: s.label,
    vector: model.project(model.forward(s.ids).pooled),
  }));
}

/** Fraction of items whose nearest neighbor shares their label. */
function precisionAt1(
  rows: { label: string; vector: Float32Array }[],
): number {
  if (rows.length < 2) return 0;
  let hits = 0;
  for (let i = 0; i < rows.length; i++) {
    let best = -Infinity, bestJ = -1;
    for (let j = 0; j < rows.length; j++) {
      if (j === i) continue;
      let s = 0;
      for (let k = 0; k < rows[i].vector.length; k++) {
        s += rows[i].vector[k] * rows[j].vector[k];
      }
      if (s > best) {
        best = s;
        bestJ = j;
      }
    }
    if (rows[bestJ].label === rows[i].label) hits++;
  }
  return hits / rows.length;
}

/** Contrastive batches: groups of classes with two members each. */
function contrastiveBatches(
  samples: Sample[], batchSize: number, rng: Rng,
): Sample[][] {
  const byLabel = new Map<string, Sample[]>();
  for (const s of samples) {
    if (!byLabel.has(s.label)) byLabel.set(s.label, []);
    byLabel.get(s.label)!.push(s);
  }
  const perBatch = Math.max(2, Math.floor(batchSize / 2));
  const nBatches = Math.ceil(samples.length / batchSize);
  const batches: Sample[][] = [];
  const labels = [...byLabel.keys()].sort();
  for (let b = 0; b < nBatches; b++) {
    const picked = rng.shuffle([...labels]).slice(0, perBatch);
    const batch: Sample[] = [];
    for (const lab of picked) {
      const members = byLabel.get(lab)!;
      const i = rng.int(members.length);
      let j = rng.int(members.length - 1);
      if (j >= i) j++;
      batch.push(members[i], members[Math.min(j, members.length - 1)]);
    }
    batches.push(batch);
  }
  return batches;
}

export function trainAndEmbed(
  records: DatasetRecord[], splits: SplitsManifest, config: TuneConfig,
): TuneResult {
  if (config.modelScale === "pretrained_small") {
    throw new Error("pretrained_small requires a local pretrained encoder, "
      + "which is not available; use modelScale=tiny");
  }
  checkArm(records, config.arm);
  const parts = partition(records, splits);
  if (parts.train.length === 0 || parts.val.length === 0) {
    throw new Error("splits manifest selects no train/val records");
  }
  const vocab = new Vocab(config.vocabSize);
  vocab.fit(parts.train.map((r) => r.text));
  const train = prepare(parts.train, vocab, config.maxTokens);
  const val = prepare(parts.val, vocab, config.maxTokens);
  const test = prepare(parts.test, vocab, config.maxTokens);
  const classes = [...new Set(train.map((s) => s.label))].sort();
  const classIndex = new Map(classes.map((c, i) => [c, i]));
  const rng = new Rng(config.seed);
  const model = new Encoder({
    vocab: vocab.size,
    dModel: config.dModel,
    dFf: config.dFf,
    maxLen: config.maxTokens,
    dOut: config.dOut,
    nClasses: config.task === "classification" ? classes.length : 0,
  }, rng.fork("init"));
  const order = rng.fork("batches");

  let best = -Infinity, bestEpoch = -1;
  let bestWeights = model.snapshot();
  const valHistory: number[] = [];

  for (let epoch = 0; epoch < config.epochs; epoch++) {
    if (config.task === "clone") {
      for (const batch of contrastiveBatches(train, config.batchSize, order)) {
        const caches: ForwardCache[] = [];
        const zs: Float32Array[] = [];
        for (const s of batch) {
          const c = model.forward(s.ids);
          caches.push(c);
          zs.push(model.project(c.pooled));
        }
        const { grads } = supConGrads(
          zs, batch.map((s) => s.label), config.temperature);
        for (let i = 0; i < batch.length; i++) {
          model.backward(
            caches[i], model.projectBackward(caches[i].pooled, grads[i]));
        }
        model.applyGradients(config.learningRate);
      }
    } else {
      const shuffled = order.shuffle([...train]);
      for (let o = 0; o < shuffled.length; o += config.batchSize) {
        const batch = shuffled.slice(o, o + config.batchSize);
        for (const s of batch) {
          const c = model.forward(s.ids);
          const logits = model.logits(c.pooled);
          let mx = -Infinity;
          for (const v of logits) if (v > mx) mx = v;
          let z = 0;
          const p = Float32Array.from(logits, (v) => {
            const e = Math.exp(v - mx);
            z += e;
            return e;
          });
          const y = classIndex.get(s.label)!;
          const dLogits = new Float32Array(p.length);
          for (let j = 0; j < p.length; j++) {
            dLogits[j] = (p[j] / z - (j === y ? 1 : 0)) / batch.length;
          }
          model.backward(c, model.logitsBackward(c.pooled, dLogits));
        }
        model.applyGradients(config.learningRate);
      }
    }
    // best-on-validation checkpoint selection
    let metric: number;
    if (config.task === "clone") {
      metric = precisionAt1(embedAll(model, val));
    } else {
      let ok = 0;
      for (const s of val) {
        const logits = model.logits(model.forward(s.ids).pooled);
        let arg = 0;
        for (let j = 1; j < logits.length; j++) if (logits[j] > logits[arg]) arg = j;
        if (classes[arg] === s.label) ok++;
      }
      metric = val.length ? ok / val.length : 0;
    }
    valHistory.push(metric);
    if (metric > best) {
      best = metric;
      bestEpoch = epoch;
      bestWeights = model.snapshot();
    }
  }
  model.restore(bestWeights);

  const embeddings = embedAll(model, test);
  const predictions: TuneResult["predictions"] = [];
  if (config.task === "classification") {
    for (const s of test) {
      const logits = model.logits(model.forward(s.ids).pooled);
      let arg = 0;
      for (let j = 1; j < logits.length; j++) if (logits[j] > logits[arg]) arg = j;
      predictions.push({ id: s.id, label: s.label, predicted: classes[arg] });
    }
  }
  return { embeddings, predictions, bestEpoch, valHistory };
}
