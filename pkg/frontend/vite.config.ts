import { defineConfig } from "vitest/config";

export default defineConfig({
  build: { outDir: "dist" },
  test: {
    environment: "jsdom",
    include: ["test/**/*.test.ts"],
  },
});
