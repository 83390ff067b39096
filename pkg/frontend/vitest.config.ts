import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    // the integration suite boots the scoring service and runs real
    // time evolutions server-side
    testTimeout: 300_000,
    hookTimeout: 120_000,
  },
});
