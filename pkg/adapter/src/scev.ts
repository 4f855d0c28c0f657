/**
 * Reader/writer for the binary sentence-embedding store format (SCEV).
 *
 * Layout, little-endian throughout:
 *
 *     magic   4 bytes  "SCEV"
 *     version u32      1
 *     dim     u32
 *     count   u64
 *     mlen    u32      byte length of model_id
 *     model   mlen bytes of UTF-8
 *     records count * (32-byte SHA-256 key + dim float32)
 *
 * Records are written in ascending key order so re-exporting an unchanged
 * store is byte-identical. Keys hash the exact UTF-8 bytes of the sentence.
 */

import { createHash } from "node:crypto";
import { readFileSync, writeFileSync } from "node:fs";

export const MAGIC = "SCEV";
export const VERSION = 1;
export const KEY_BYTES = 32;

export class StoreError extends Error {}
export class BadMagic extends StoreError {}
export class VersionUnsupported extends StoreError {}
export class TruncatedFile extends StoreError {}

export interface Store {
  modelId: string;
  dim: number;
  /** hex key -> float32 vector */
  vectors: Map<string, Float32Array>;
}

export function sentenceKey(text: string): string {
  return createHash("sha256").update(text, "utf-8").digest("hex");
}

export function addSentence(store: Store, text: string, vec: Float32Array): void {
  if (vec.length !== store.dim) {
    throw new StoreError(`vector length ${vec.length} != ${store.dim}`);
  }
  store.vectors.set(sentenceKey(text), vec);
}

export function serialize(store: Store): Buffer {
  const modelBytes = Buffer.from(store.modelId, "utf-8");
  const header = Buffer.alloc(4 + 4 + 4 + 8 + 4);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(VERSION, 4);
  header.writeUInt32LE(store.dim, 8);
  header.writeBigUInt64LE(BigInt(store.vectors.size), 12);
  header.writeUInt32LE(modelBytes.length, 20);

  const keys = [...store.vectors.keys()].sort();
  const parts: Buffer[] = [header, modelBytes];
  for (const key of keys) {
    parts.push(Buffer.from(key, "hex"));
    const vec = store.vectors.get(key)!;
    parts.push(Buffer.from(vec.buffer, vec.byteOffset, vec.byteLength));
  }
  return Buffer.concat(parts);
}

export function deserialize(data: Buffer): Store {
  const need = (offset: number, n: number, what: string) => {
    if (offset + n > data.length) {
      throw new TruncatedFile(`file truncated while reading ${what}`);
    }
  };
  need(0, 20, "header");
  if (data.toString("ascii", 0, 4) !== MAGIC) {
    throw new BadMagic("bad magic; not an embedding store file");
  }
  const version = data.readUInt32LE(4);
  if (version !== VERSION) {
    throw new VersionUnsupported(`unsupported version ${version}`);
  }
  const dim = data.readUInt32LE(8);
  if (dim < 2) {
    throw new StoreError(`dim must be >= 2, got ${dim}`);
  }
  const count = Number(data.readBigUInt64LE(12));
  need(20, 4, "model id length");
  const mlen = data.readUInt32LE(20);
  need(24, mlen, "model id");
  const modelId = data.toString("utf-8", 24, 24 + mlen);

  const store: Store = { modelId, dim, vectors: new Map() };
  const recBytes = KEY_BYTES + 4 * dim;
  let offset = 24 + mlen;
  for (let i = 0; i < count; i++) {
    need(offset, recBytes, `record ${i}`);
    const key = data.toString("hex", offset, offset + KEY_BYTES);
    const vecBytes = data.subarray(offset + KEY_BYTES, offset + recBytes);
    // copy so the vector does not alias the file buffer
    const vec = new Float32Array(
      vecBytes.buffer.slice(vecBytes.byteOffset, vecBytes.byteOffset + vecBytes.byteLength),
    );
    store.vectors.set(key, vec);
    offset += recBytes;
  }
  if (offset !== data.length) {
    throw new StoreError("trailing bytes after last record");
  }
  return store;
}

export function exportFile(store: Store, path: string): void {
  writeFileSync(path, serialize(store));
}

export function importFile(path: string): Store {
  return deserialize(readFileSync(path));
}
