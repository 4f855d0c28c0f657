/** Entry point: serve the adapter on PORT (default 8900).
 *
 * FUSION_UPSTREAM_URL configures the chat-completion endpoint /fuse proxies
 * to; without it /fuse answers 502.
 */

import { createApp } from "./server.js";

const port = Number(process.env.PORT ?? 8900);
const app = createApp({ fusionUpstreamUrl: process.env.FUSION_UPSTREAM_URL });
app.listen(port, () => {
  console.log(`adapter listening on :${port}`);
});
