import * as path from 'path';
import { beforeAll, describe, expect, test } from 'vitest';

import { initBackend } from '../src/backend';
import { SLIM_NET } from '../src/model';
import { DEFAULT_TRAIN, train } from '../src/train';
import { synthPair, tempDir } from './helpers';

beforeAll(async () => {
  await initBackend();
});

const TINY = {
  ...SLIM_NET,
  inputFrames: null,
  inputBins: null,
  encoderWidths: [2, 4],
  bottleneckWidth: 8,
  seed: 9,
};

describe('seeded reproducibility', () => {
  test('same seed gives the same first-epoch loss', async () => {
    const dir = tempDir('seed');
    const pairs = [0, 1].map((i) => synthPair(dir, `p${i}`, 40 + i, 32, 32));
    const cfg = { ...DEFAULT_TRAIN, batchSize: 2, maxEpochs: 1, seed: 9 };
    const a = await train({ train: pairs, val: pairs, test: [] }, TINY, cfg,
                          path.join(dir, 'a'));
    const b = await train({ train: pairs, val: pairs, test: [] }, TINY, cfg,
                          path.join(dir, 'b'));
    expect(a.log[0].trainLoss).toBeCloseTo(b.log[0].trainLoss, 7);
    expect(a.log[0].valLoss).toBeCloseTo(b.log[0].valLoss, 7);
  }, 120_000);
});
