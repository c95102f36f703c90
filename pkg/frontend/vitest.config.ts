import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    globalSetup: ["tests/globalSetup.ts"],
    testTimeout: 30_000,
    hookTimeout: 120_000,
    // the contract suite mutates server state; keep files sequential
    fileParallelism: false,
  },
});
