/** Fusion request proxying: builds the exact paraphraser chat messages and
 * forwards them to an upstream chat-completion endpoint. */

export interface FusionRequest {
  a: string;
  b: string;
  maxWords: number;
  temperature: number;
}

export interface ChatMessage {
  role: "system" | "user";
  content: string;
}

export class UpstreamError extends Error {}

/**
 * Render the word budget the way the Python side prints a float: integral
 * values keep a trailing ".0" ("12.0"), fractional values print as-is
 * ("2.5"). The budget is always a multiple of 0.5.
 */
export function formatMaxWords(maxWords: number): string {
  return Number.isInteger(maxWords) ? `${maxWords}.0` : String(maxWords);
}

export function buildFusionMessages(req: FusionRequest): ChatMessage[] {
  return [
    { role: "system", content: "You are a paraphraser." },
    {
      role: "user",
      content:
        `Fuse the following two sentences in ${formatMaxWords(req.maxWords)} words: ` +
        `${req.a}\n${req.b}`,
    },
  ];
}

/** POST the rendered messages to the upstream and return the fused text. */
export async function fuseUpstream(
  upstreamUrl: string,
  req: FusionRequest,
): Promise<string> {
  let response: Response;
  try {
    response = await fetch(upstreamUrl, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        messages: buildFusionMessages(req),
        temperature: req.temperature,
      }),
    });
  } catch (err) {
    throw new UpstreamError(`upstream unreachable: ${err}`);
  }
  if (!response.ok) {
    throw new UpstreamError(`upstream returned ${response.status}`);
  }
  const body = (await response.json()) as { text?: unknown };
  if (typeof body.text !== "string" || body.text.trim() === "") {
    throw new UpstreamError("upstream returned no text");
  }
  return body.text;
}
