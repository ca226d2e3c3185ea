import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // The e2e test spawns a gateway process and replays a full scenario.
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
