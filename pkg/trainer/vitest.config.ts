import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: ['test/**/*.test.ts'],
    // single-core sandbox + one WASM heap per worker: run files serially
    fileParallelism: false,
    testTimeout: 600_000,
    hookTimeout: 120_000,
  },
});
