/** CLI: embed every line of a sentences file and write a binary store.
 *
 * Usage: tsx src/exportStore.ts <model-id> <sentences.txt> <out.scev>
 */

import { readFileSync } from "node:fs";

import { addSentence, exportFile, type Store } from "./scev.js";
import { embedBatch, resolveModel } from "./stubModel.js";

export function exportStore(modelId: string, sentencesPath: string, outPath: string): number {
  const spec = resolveModel(modelId);
  const sentences = readFileSync(sentencesPath, "utf-8")
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0);
  const unique = [...new Set(sentences)];
  const store: Store = { modelId: spec.modelId, dim: spec.dim, vectors: new Map() };
  const vectors = embedBatch(spec, unique);
  unique.forEach((text, i) => addSentence(store, text, vectors[i]));
  exportFile(store, outPath);
  return store.vectors.size;
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop()!);

if (invokedDirectly) {
  const [modelId, sentencesPath, outPath] = process.argv.slice(2);
  if (!modelId || !sentencesPath || !outPath) {
    console.error("usage: exportStore <model-id> <sentences.txt> <out.scev>");
    process.exit(2);
  }
  const count = exportStore(modelId, sentencesPath, outPath);
  console.log(`wrote ${count} vectors to ${outPath}`);
}
