import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["test/**/*.test.ts"],
    // the integration test boots the python sim service and its first
    // topology rebuild can take a while on a cold kernel cache
    testTimeout: 180_000,
    hookTimeout: 180_000,
  },
});
