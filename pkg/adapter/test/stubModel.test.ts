import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import {
  embedBatch,
  EmptyInput,
  maskedMean,
  resolveModel,
  tokenEmbedding,
  tokenize,
  UnknownModel,
} from "../src/stubModel.js";

const spec = resolveModel("stub-small");

describe("stub model", () => {
  it("rejects unknown models and empty input", () => {
    expect(() => resolveModel("nope")).toThrow(UnknownModel);
    expect(() => embedBatch(spec, [])).toThrow(EmptyInput);
    expect(() => embedBatch(spec, ["hello", "   "])).toThrow(EmptyInput);
  });

  it("pools with a masked mean equal to the arithmetic token mean", () => {
    const sentence = "the quick brown fox jumps";
    const tokens = tokenize(sentence);
    const [pooled] = embedBatch(spec, [sentence]);
    for (let j = 0; j < spec.dim; j++) {
      let sum = 0;
      for (const token of tokens) {
        sum += tokenEmbedding(spec, token)[j];
      }
      expect(Math.abs(pooled[j] - sum / tokens.length)).toBeLessThan(1e-6);
    }
  });

  it("ignores padding rows under the attention mask", () => {
    // short sentence batched with a long one gets padded; the pad rows must
    // not move its mean
    const [aloneVec] = embedBatch(spec, ["tiny sentence"]);
    const [paddedVec] = embedBatch(spec, [
      "tiny sentence",
      "a much longer sentence with many more words than the first one",
    ]);
    expect(paddedVec).toEqual(aloneVec);
  });

  it("gives bitwise-identical vectors for duplicate sentences", () => {
    const [v1, v2] = embedBatch(spec, ["same text here", "same text here"]);
    expect(Buffer.from(v1.buffer)).toEqual(Buffer.from(v2.buffer));
    const [v3] = embedBatch(spec, ["same text here"]);
    expect(Buffer.from(v3.buffer)).toEqual(Buffer.from(v1.buffer));
  });

  it("raises on an all-zero mask", () => {
    expect(() => maskedMean([new Float32Array(4)], [0], 4)).toThrow(EmptyInput);
  });

  it("matches the frozen golden vectors", () => {
    const fixture = JSON.parse(
      readFileSync(new URL("./fixtures/stub_golden.json", import.meta.url), "utf-8"),
    ) as { model: string; sentences: string[]; vectors: number[][] };
    const golden = resolveModel(fixture.model);
    const vectors = embedBatch(golden, fixture.sentences);
    fixture.vectors.forEach((want, i) => {
      expect(Array.from(vectors[i])).toEqual(want);
    });
  });
});
