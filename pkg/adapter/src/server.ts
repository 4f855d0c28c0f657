/** HTTP surface of the adapter: /embed, /fuse, /health. */

import express, { type Express } from "express";
import { z } from "zod";

import { fuseUpstream, UpstreamError } from "./fusion.js";
import { embedBatch, EmptyInput, resolveModel, UnknownModel } from "./stubModel.js";

const embedSchema = z.object({
  model: z.string(),
  sentences: z.array(z.string()).min(1),
});

const fuseSchema = z.object({
  a: z.string().min(1),
  b: z.string().min(1),
  max_words: z.number().positive(),
  temperature: z.number().min(0).max(2),
});

export interface ServerOptions {
  /** Chat-completion endpoint that /fuse forwards to. */
  fusionUpstreamUrl?: string;
}

export function createApp(options: ServerOptions = {}): Express {
  const app = express();
  app.use(express.json({ limit: "16mb" }));

  app.get("/health", (_req, res) => {
    res.status(200).send("ok");
  });

  app.post("/embed", (req, res) => {
    const parsed = embedSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.message });
      return;
    }
    try {
      const spec = resolveModel(parsed.data.model);
      const vectors = embedBatch(spec, parsed.data.sentences);
      res.json({ dim: spec.dim, vectors: vectors.map((v) => Array.from(v)) });
    } catch (err) {
      if (err instanceof UnknownModel) {
        res.status(422).json({ error: err.message });
      } else if (err instanceof EmptyInput) {
        res.status(400).json({ error: err.message });
      } else {
        throw err;
      }
    }
  });

  app.post("/fuse", async (req, res) => {
    const parsed = fuseSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.message });
      return;
    }
    if (!options.fusionUpstreamUrl) {
      res.status(502).json({ error: "no fusion upstream configured" });
      return;
    }
    try {
      const text = await fuseUpstream(options.fusionUpstreamUrl, {
        a: parsed.data.a,
        b: parsed.data.b,
        maxWords: parsed.data.max_words,
        temperature: parsed.data.temperature,
      });
      res.json({ text });
    } catch (err) {
      if (err instanceof UpstreamError) {
        res.status(502).json({ error: err.message });
      } else {
        throw err;
      }
    }
  });

  return app;
}
