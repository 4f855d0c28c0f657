/**
 * Deterministic stub encoder: hash-based tokenizer over a seeded
 * pseudo-random embedding table, masked mean pooling, float32 outputs.
 *
 * The stub stands in for real checkpoints so the pipeline and the
 * interchange formats can be exercised hermetically. Everything is a pure
 * function of (model spec, sentence text).
 */

export interface ModelSpec {
  modelId: string;
  family: "encoder" | "decoder";
  pooling: "mean";
  dim: number;
  revision: string;
  seed: number;
}

export class EmptyInput extends Error {}
export class UnknownModel extends Error {}

export const STUB_MODELS: Record<string, ModelSpec> = {
  "stub-small": {
    modelId: "stub-small",
    family: "encoder",
    pooling: "mean",
    dim: 16,
    revision: "r1",
    seed: 0x5eed,
  },
  "stub-base": {
    modelId: "stub-base",
    family: "encoder",
    pooling: "mean",
    dim: 64,
    revision: "r1",
    seed: 0xbead,
  },
};

export function resolveModel(modelId: string): ModelSpec {
  const spec = STUB_MODELS[modelId];
  if (!spec) {
    throw new UnknownModel(`unknown model: ${modelId}`);
  }
  return spec;
}

/** FNV-1a 32-bit hash, the token-to-id function of the stub tokenizer. */
function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

/** mulberry32: small seeded PRNG, enough randomness for a weight table. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function tokenize(sentence: string): string[] {
  return sentence.split(/\s+/).filter((t) => t.length > 0);
}

/** Final-layer representation of one token: seeded PRNG keyed by token id. */
export function tokenEmbedding(spec: ModelSpec, token: string): Float32Array {
  const next = mulberry32((fnv1a(token) ^ spec.seed) >>> 0);
  const vec = new Float32Array(spec.dim);
  for (let i = 0; i < spec.dim; i++) {
    vec[i] = Math.fround(next() * 2 - 1);
  }
  return vec;
}

/**
 * Mean pooling over the attention-masked token positions only. Batches are
 * padded to the longest sentence; padding rows carry mask 0 and contribute
 * nothing to the mean. BOS/EOS style special tokens are not added.
 */
export function embedBatch(spec: ModelSpec, sentences: string[]): Float32Array[] {
  if (sentences.length === 0) {
    throw new EmptyInput("batch must be nonempty");
  }
  const tokenized = sentences.map((s) => {
    const tokens = tokenize(s);
    if (tokens.length === 0) {
      throw new EmptyInput("cannot embed an empty sentence");
    }
    return tokens;
  });
  const maxLen = Math.max(...tokenized.map((t) => t.length));
  return tokenized.map((tokens) => {
    const rows: Float32Array[] = [];
    const mask: number[] = [];
    for (let i = 0; i < maxLen; i++) {
      if (i < tokens.length) {
        rows.push(tokenEmbedding(spec, tokens[i]));
        mask.push(1);
      } else {
        rows.push(new Float32Array(spec.dim));
        mask.push(0);
      }
    }
    return maskedMean(rows, mask, spec.dim);
  });
}

/** Sum of mask-selected rows divided by the mask total, rounded to float32. */
export function maskedMean(
  rows: Float32Array[],
  mask: number[],
  dim: number,
): Float32Array {
  const sum = new Float64Array(dim);
  let count = 0;
  for (let i = 0; i < rows.length; i++) {
    if (mask[i] === 0) continue;
    count += 1;
    for (let j = 0; j < dim; j++) {
      sum[j] += rows[i][j];
    }
  }
  if (count === 0) {
    throw new EmptyInput("mask selects no tokens");
  }
  const out = new Float32Array(dim);
  for (let j = 0; j < dim; j++) {
    out[j] = Math.fround(sum[j] / count);
  }
  return out;
}
