/**
 * Tiny from-scratch transformer encoder (2 pre-LN layers, single head)
 * with explicit forward/backward passes and an Adam optimizer.
 *
 * Small enough to train on a CPU in seconds; the point of the experiments
 * is the marginal value of the training data, not absolute scores.
 */

import { Rng } from "./rng.js";

export interface ModelDims {
  vocab: number;
  dModel: number;
  dFf: number;
  maxLen: number;
  dOut: number; // embedding projection size
  nClasses: number; // classification head size (0 = no head)
}

export class Param {
  g: Float32Array;
  private m: Float32Array;
  private v: Float32Array;

  constructor(
    public name: string,
    public w: Float32Array,
  ) {
    this.g = new Float32Array(w.length);
    this.m = new Float32Array(w.length);
    this.v = new Float32Array(w.length);
  }

  adamStep(lr: number, t: number): void {
    const b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const c1 = 1 - Math.pow(b1, t), c2 = 1 - Math.pow(b2, t);
    for (let i = 0; i < this.w.length; i++) {
      const g = this.g[i];
      this.m[i] = b1 * this.m[i] + (1 - b1) * g;
      this.v[i] = b2 * this.v[i] + (1 - b2) * g * g;
      this.w[i] -= (lr * (this.m[i] / c1)) / (Math.sqrt(this.v[i] / c2) + eps);
    }
    this.g.fill(0);
  }
}

function randInit(rng: Rng, n: number, scale: number): Float32Array {
  const a = new Float32Array(n);
  for (let i = 0; i < n; i++) a[i] = rng.gauss() * scale;
  return a;
}

// row-major (m x k) * (k x n) -> (m x n), accumulated into out
function matmul(
  a: Float32Array, b: Float32Array, out: Float32Array,
  m: number, k: number, n: number,
): void {
  out.fill(0);
  for (let i = 0; i < m; i++) {
    for (let p = 0; p < k; p++) {
      const av = a[i * k + p];
      if (av === 0) continue;
      const bo = p * n, co = i * n;
      for (let j = 0; j < n; j++) out[co + j] += av * b[bo + j];
    }
  }
}

// (m x k) * (n x k)^T -> (m x n)
function matmulBT(
  a: Float32Array, b: Float32Array, out: Float32Array,
  m: number, k: number, n: number,
): void {
  out.fill(0);
  for (let i = 0; i < m; i++) {
    for (let j = 0; j < n; j++) {
      let s = 0;
      const ao = i * k, bo = j * k;
      for (let p = 0; p < k; p++) s += a[ao + p] * b[bo + p];
      out[i * n + j] = s;
    }
  }
}

// (k x m)^T * (k x n) -> accumulate into out (m x n)
function matmulATacc(
  a: Float32Array, b: Float32Array, out: Float32Array,
  k: number, m: number, n: number,
): void {
  for (let p = 0; p < k; p++) {
    const ao = p * m, bo = p * n;
    for (let i = 0; i < m; i++) {
      const av = a[ao + i];
      if (av === 0) continue;
      const co = i * n;
      for (let j = 0; j < n; j++) out[co + j] += av * b[bo + j];
    }
  }
}

interface LayerCache {
  xIn: Float32Array;
  aLn: Float32Array; aMu: Float32Array; aSig: Float32Array;
  q: Float32Array; k: Float32Array; v: Float32Array;
  att: Float32Array; ctx: Float32Array;
  xMid: Float32Array;
  bLn: Float32Array; bMu: Float32Array; bSig: Float32Array;
  h: Float32Array;
}

export interface ForwardCache {
  len: number;
  ids: Int32Array;
  layers: LayerCache[];
  pooled: Float32Array;
}

export class Encoder {
  readonly params: Param[] = [];
  readonly emb: Param;
  readonly pos: Param;
  readonly layers: {
    g1: Param; b1: Param; wq: Param; wk: Param; wv: Param; wo: Param;
    g2: Param; b2: Param; w1: Param; bf1: Param; w2: Param; bf2: Param;
  }[] = [];
  readonly proj: Param;
  readonly clsW: Param | null;
  readonly clsB: Param | null;
  private step = 0;

  constructor(readonly dims: ModelDims, rng: Rng) {
    const d = dims.dModel;
    const reg = (name: string, w: Float32Array) => {
      const p = new Param(name, w);
      this.params.push(p);
      return p;
    };
    this.emb = reg("emb", randInit(rng, dims.vocab * d, 0.05));
    this.pos = reg("pos", randInit(rng, dims.maxLen * d, 0.05));
    const ws = 1 / Math.sqrt(d);
    for (let l = 0; l < 2; l++) {
      this.layers.push({
        g1: reg(`l${l}.g1`, new Float32Array(d).fill(1)),
        b1: reg(`l${l}.b1`, new Float32Array(d)),
        wq: reg(`l${l}.wq`, randInit(rng, d * d, ws)),
        wk: reg(`l${l}.wk`, randInit(rng, d * d, ws)),
        wv: reg(`l${l}.wv`, randInit(rng, d * d, ws)),
        wo: reg(`l${l}.wo`, randInit(rng, d * d, ws)),
        g2: reg(`l${l}.g2`, new Float32Array(d).fill(1)),
        b2: reg(`l${l}.b2`, new Float32Array(d)),
        w1: reg(`l${l}.w1`, randInit(rng, d * dims.dFf, ws)),
        bf1: reg(`l${l}.bf1`, new Float32Array(dims.dFf)),
        w2: reg(`l${l}.w2`, randInit(rng, dims.dFf * d, 1 / Math.sqrt(dims.dFf))),
        bf2: reg(`l${l}.bf2`, new Float32Array(d)),
      });
    }
    this.proj = reg("proj", randInit(rng, d * dims.dOut, ws));
    if (dims.nClasses > 0) {
      this.clsW = reg("clsW", randInit(rng, d * dims.nClasses, ws));
      this.clsB = reg("clsB", new Float32Array(dims.nClasses));
    } else {
      this.clsW = null;
      this.clsB = null;
    }
  }

  private layerNorm(
    x: Float32Array, gain: Float32Array, bias: Float32Array,
    len: number, out: Float32Array, mu: Float32Array, sig: Float32Array,
  ): void {
    const d = this.dims.dModel;
    for (let i = 0; i < len; i++) {
      const o = i * d;
      let m = 0;
      for (let j = 0; j < d; j++) m += x[o + j];
      m /= d;
      let v = 0;
      for (let j = 0; j < d; j++) {
        const c = x[o + j] - m;
        v += c * c;
      }
      const s = Math.sqrt(v / d + 1e-5);
      mu[i] = m;
      sig[i] = s;
      for (let j = 0; j < d; j++) {
        out[o + j] = ((x[o + j] - m) / s) * gain[j] + bias[j];
      }
    }
  }

  private layerNormBackward(
    dOut: Float32Array, x: Float32Array, gain: Float32Array,
    mu: Float32Array, sig: Float32Array, len: number,
    dx: Float32Array, dGain: Float32Array, dBias: Float32Array,
  ): void {
    const d = this.dims.dModel;
    for (let i = 0; i < len; i++) {
      const o = i * d, s = sig[i], m = mu[i];
      let sumDy = 0, sumDyXhat = 0;
      for (let j = 0; j < d; j++) {
        const xhat = (x[o + j] - m) / s;
        const dy = dOut[o + j] * gain[j];
        dGain[j] += dOut[o + j] * xhat;
        dBias[j] += dOut[o + j];
        sumDy += dy;
        sumDyXhat += dy * xhat;
      }
      for (let j = 0; j < d; j++) {
        const xhat = (x[o + j] - m) / s;
        const dy = dOut[o + j] * gain[j];
        dx[o + j] += (dy - sumDy / d - (xhat * sumDyXhat) / d) / s;
      }
    }
  }

  /** Encode one sequence; returns the mean-pooled hidden state. */
  forward(ids: Int32Array): ForwardCache {
    const d = this.dims.dModel;
    const len = Math.min(ids.length, this.dims.maxLen);
    let x = new Float32Array(len * d);
    for (let i = 0; i < len; i++) {
      const eo = ids[i] * d, po = i * d;
      for (let j = 0; j < d; j++) {
        x[po + j] = this.emb.w[eo + j] + this.pos.w[po + j];
      }
    }
    const caches: LayerCache[] = [];
    const scale = 1 / Math.sqrt(d);
    for (const L of this.layers) {
      const c: LayerCache = {
        xIn: x,
        aLn: new Float32Array(len * d),
        aMu: new Float32Array(len), aSig: new Float32Array(len),
        q: new Float32Array(len * d), k: new Float32Array(len * d),
        v: new Float32Array(len * d),
        att: new Float32Array(len * len), ctx: new Float32Array(len * d),
        xMid: new Float32Array(len * d),
        bLn: new Float32Array(len * d),
        bMu: new Float32Array(len), bSig: new Float32Array(len),
        h: new Float32Array(len * this.dims.dFf),
      };
      this.layerNorm(x, L.g1.w, L.b1.w, len, c.aLn, c.aMu, c.aSig);
      matmul(c.aLn, L.wq.w, c.q, len, d, d);
      matmul(c.aLn, L.wk.w, c.k, len, d, d);
      matmul(c.aLn, L.wv.w, c.v, len, d, d);
      matmulBT(c.q, c.k, c.att, len, d, len);
      for (let i = 0; i < len; i++) {
        const o = i * len;
        let mx = -Infinity;
        for (let j = 0; j < len; j++) {
          c.att[o + j] *= scale;
          if (c.att[o + j] > mx) mx = c.att[o + j];
        }
        let z = 0;
        for (let j = 0; j < len; j++) {
          c.att[o + j] = Math.exp(c.att[o + j] - mx);
          z += c.att[o + j];
        }
        for (let j = 0; j < len; j++) c.att[o + j] /= z;
      }
      matmul(c.att, c.v, c.ctx, len, len, d);
      const attOut = new Float32Array(len * d);
      matmul(c.ctx, L.wo.w, attOut, len, d, d);
      for (let i = 0; i < len * d; i++) c.xMid[i] = x[i] + attOut[i];
      this.layerNorm(c.xMid, L.g2.w, L.b2.w, len, c.bLn, c.bMu, c.bSig);
      matmul(c.bLn, L.w1.w, c.h, len, d, this.dims.dFf);
      for (let i = 0; i < len; i++) {
        const o = i * this.dims.dFf;
        for (let j = 0; j < this.dims.dFf; j++) {
          c.h[o + j] = Math.max(0, c.h[o + j] + L.bf1.w[j]);
        }
      }
      const ffOut = new Float32Array(len * d);
      matmul(c.h, L.w2.w, ffOut, len, this.dims.dFf, d);
      const xNext = new Float32Array(len * d);
      for (let i = 0; i < len; i++) {
        const o = i * d;
        for (let j = 0; j < d; j++) {
          xNext[o + j] = c.xMid[o + j] + ffOut[o + j] + L.bf2.w[j];
        }
      }
      caches.push(c);
      x = xNext;
    }
    const pooled = new Float32Array(d);
    for (let i = 0; i < len; i++) {
      const o = i * d;
      for (let j = 0; j < d; j++) pooled[j] += x[o + j];
    }
    for (let j = 0; j < d; j++) pooled[j] /= len;
    return { len, ids: ids.subarray(0, len), layers: caches, pooled };
  }

  /** Backpropagate a gradient w.r.t. the pooled vector. */
  backward(cache: ForwardCache, dPooled: Float32Array): void {
    const d = this.dims.dModel, dFf = this.dims.dFf;
    const len = cache.len, scale = 1 / Math.sqrt(d);
    let dx = new Float32Array(len * d);
    for (let i = 0; i < len; i++) {
      const o = i * d;
      for (let j = 0; j < d; j++) dx[o + j] = dPooled[j] / len;
    }
    for (let l = this.layers.length - 1; l >= 0; l--) {
      const L = this.layers[l], c = cache.layers[l];
      // feed-forward block
      const dFfOut = dx; // residual: gradient flows both ways
      for (let i = 0; i < len; i++) {
        const o = i * d;
        for (let j = 0; j < d; j++) L.bf2.g[j] += dFfOut[o + j];
      }
      const dh = new Float32Array(len * dFf);
      matmulBT(dFfOut, L.w2.w, dh, len, d, dFf);
      matmulATacc(c.h, dFfOut, L.w2.g, len, dFf, d);
      for (let i = 0; i < len * dFf; i++) if (c.h[i] === 0) dh[i] = 0;
      for (let i = 0; i < len; i++) {
        const o = i * dFf;
        for (let j = 0; j < dFf; j++) L.bf1.g[j] += dh[o + j];
      }
      const dbLn = new Float32Array(len * d);
      matmulBT(dh, L.w1.w, dbLn, len, dFf, d);
      matmulATacc(c.bLn, dh, L.w1.g, len, d, dFf);
      const dxMid = new Float32Array(len * d);
      dxMid.set(dx); // residual branch
      this.layerNormBackward(
        dbLn, c.xMid, L.g2.w, c.bMu, c.bSig, len, dxMid, L.g2.g, L.b2.g);
      // attention block
      const dAttOut = dxMid;
      const dCtx = new Float32Array(len * d);
      matmulBT(dAttOut, L.wo.w, dCtx, len, d, d);
      matmulATacc(c.ctx, dAttOut, L.wo.g, len, d, d);
      const dAtt = new Float32Array(len * len);
      matmulBT(dCtx, c.v, dAtt, len, d, len);
      const dV = new Float32Array(len * d);
      matmulATacc(c.att, dCtx, dV, len, len, d);
      // softmax backward per row
      for (let i = 0; i < len; i++) {
        const o = i * len;
        let dot = 0;
        for (let j = 0; j < len; j++) dot += dAtt[o + j] * c.att[o + j];
        for (let j = 0; j < len; j++) {
          dAtt[o + j] = c.att[o + j] * (dAtt[o + j] - dot) * scale;
        }
      }
      const dQ = new Float32Array(len * d);
      matmul(dAtt, c.k, dQ, len, len, d);
      const dK = new Float32Array(len * d);
      matmulATacc(dAtt, c.q, dK, len, len, d);
      const daLn = new Float32Array(len * d);
      matmulBT(dQ, L.wq.w, daLn, len, d, d);
      matmulATacc(c.aLn, dQ, L.wq.g, len, d, d);
      const tmp = new Float32Array(len * d);
      matmulBT(dK, L.wk.w, tmp, len, d, d);
      for (let i = 0; i < len * d; i++) daLn[i] += tmp[i];
      matmulATacc(c.aLn, dK, L.wk.g, len, d, d);
      matmulBT(dV, L.wv.w, tmp, len, d, d);
      for (let i = 0; i < len * d; i++) daLn[i] += tmp[i];
      matmulATacc(c.aLn, dV, L.wv.g, len, d, d);
      const dxIn = new Float32Array(len * d);
      dxIn.set(dxMid); // residual branch
      this.layerNormBackward(
        daLn, c.xIn, L.g1.w, c.aMu, c.aSig, len, dxIn, L.g1.g, L.b1.g);
      dx = dxIn;
    }
    for (let i = 0; i < len; i++) {
      const eo = cache.ids[i] * d, po = i * d;
      for (let j = 0; j < d; j++) {
        this.emb.g[eo + j] += dx[po + j];
        this.pos.g[po + j] += dx[po + j];
      }
    }
  }

  /** L2-normalized embedding of a pooled vector. */
  project(pooled: Float32Array): Float32Array {
    const { dModel: d, dOut } = this.dims;
    const z = new Float32Array(dOut);
    for (let i = 0; i < d; i++) {
      const v = pooled[i];
      if (v === 0) continue;
      const o = i * dOut;
      for (let j = 0; j < dOut; j++) z[j] += v * this.proj.w[o + j];
    }
    let n = 0;
    for (let j = 0; j < dOut; j++) n += z[j] * z[j];
    n = Math.sqrt(n) || 1;
    for (let j = 0; j < dOut; j++) z[j] /= n;
    return z;
  }

  /**
   * Backward through project+normalize; accumulates proj grad and returns
   * the gradient w.r.t. the pooled vector.
   */
  projectBackward(pooled: Float32Array, dz: Float32Array): Float32Array {
    const { dModel: d, dOut } = this.dims;
    const y = new Float32Array(dOut);
    for (let i = 0; i < d; i++) {
      const v = pooled[i], o = i * dOut;
      for (let j = 0; j < dOut; j++) y[j] += v * this.proj.w[o + j];
    }
    let n = 0;
    for (let j = 0; j < dOut; j++) n += y[j] * y[j];
    n = Math.sqrt(n) || 1;
    const z = y.map((v) => v / n);
    let zdz = 0;
    for (let j = 0; j < dOut; j++) zdz += z[j] * dz[j];
    const dy = new Float32Array(dOut);
    for (let j = 0; j < dOut; j++) dy[j] = (dz[j] - z[j] * zdz) / n;
    const dPooled = new Float32Array(d);
    for (let i = 0; i < d; i++) {
      const o = i * dOut;
      let s = 0;
      for (let j = 0; j < dOut; j++) {
        s += dy[j] * this.proj.w[o + j];
        this.proj.g[o + j] += pooled[i] * dy[j];
      }
      dPooled[i] = s;
    }
    return dPooled;
  }

  /** Class logits from the pooled vector (classification head). */
  logits(pooled: Float32Array): Float32Array {
    if (!this.clsW || !this.clsB) throw new Error("model has no class head");
    const { dModel: d, nClasses: C } = this.dims;
    const out = new Float32Array(C);
    out.set(this.clsB.w);
    for (let i = 0; i < d; i++) {
      const v = pooled[i], o = i * C;
      for (let j = 0; j < C; j++) out[j] += v * this.clsW.w[o + j];
    }
    return out;
  }

  logitsBackward(pooled: Float32Array, dLogits: Float32Array): Float32Array {
    if (!this.clsW || !this.clsB) throw new Error("model has no class head");
    const { dModel: d, nClasses: C } = this.dims;
    for (let j = 0; j < C; j++) this.clsB.g[j] += dLogits[j];
    const dPooled = new Float32Array(d);
    for (let i = 0; i < d; i++) {
      const o = i * C;
      let s = 0;
      for (let j = 0; j < C; j++) {
        s += dLogits[j] * this.clsW.w[o + j];
        this.clsW.g[o + j] += pooled[i] * dLogits[j];
      }
      dPooled[i] = s;
    }
    return dPooled;
  }

  applyGradients(lr: number): void {
    this.step += 1;
    for (const p of this.params) p.adamStep(lr, this.step);
  }

  snapshot(): Float32Array[] {
    return this.params.map((p) => p.w.slice());
  }

  restore(weights: Float32Array[]): void {
    weights.forEach((w, i) => this.params[i].w.set(w));
  }
}
