import * as fs from 'fs';
import * as path from 'path';
import { describe, expect, test } from 'vitest';

import { loadExample } from '../src/data';
import { readMsk, readSpx, spxRealChannel, writeMsk, writeSpx } from '../src/formats';
import { lcg, tempDir } from './helpers';

describe('spx format', () => {
  test('round trip is bit identical', () => {
    const dir = tempDir('spx');
    const rand = lcg(1);
    const planes = [0, 1].map(() => {
      const p = new Float32Array(5 * 7 * 2);
      for (let i = 0; i < p.length; i++) p[i] = 2 * rand() - 1;
      return p;
    });
    const file = path.join(dir, 'x.spx');
    writeSpx(file, { frames: 5, bins: 7, channels: 2, planes });
    const first = fs.readFileSync(file);
    const back = readSpx(file);
    expect(back.frames).toBe(5);
    expect(back.bins).toBe(7);
    expect(back.channels).toBe(2);
    writeSpx(file, back);
    expect(fs.readFileSync(file).equals(first)).toBe(true);
  });

  test('real-channel view interleaves correctly', () => {
    const plane = new Float32Array([1, -1, 2, -2, 3, -3, 4, -4]);
    const real = spxRealChannel(
      { frames: 2, bins: 2, channels: 1, planes: [plane] }, 0);
    expect(Array.from(real)).toEqual([1, 2, 3, 4]);
  });

  test('bad magic and truncation are rejected', () => {
    const dir = tempDir('spxbad');
    const bad = path.join(dir, 'bad.spx');
    fs.writeFileSync(bad, Buffer.from('NOPE............'));
    expect(() => readSpx(bad)).toThrow(/not an SPX1/);
    const file = path.join(dir, 'short.spx');
    const plane = new Float32Array(2 * 2 * 2);
    writeSpx(file, { frames: 2, bins: 2, channels: 1, planes: [plane] });
    fs.writeFileSync(file, fs.readFileSync(file).subarray(0, 20));
    expect(() => readSpx(file)).toThrow(/expected/);
  });
});

describe('msk format', () => {
  test('round trip is bit identical and keeps provenance', () => {
    const dir = tempDir('msk');
    const rand = lcg(2);
    const irmS = new Float32Array(6 * 4);
    const irmD = new Float32Array(6 * 4);
    for (let i = 0; i < irmS.length; i++) {
      irmS[i] = rand();
      irmD[i] = irmS[i] * rand();
    }
    const file = path.join(dir, 'm.msk');
    writeMsk(file, { frames: 6, bins: 4, provenance: 'estimated', irmS, irmD });
    const first = fs.readFileSync(file);
    expect(first[12]).toBe(1);
    const back = readMsk(file);
    expect(back.provenance).toBe('estimated');
    expect(Array.from(back.irmS)).toEqual(Array.from(irmS));
    writeMsk(file, back);
    expect(fs.readFileSync(file).equals(first)).toBe(true);
  });

  test('bad magic is rejected', () => {
    const dir = tempDir('mskbad');
    const bad = path.join(dir, 'bad.msk');
    fs.writeFileSync(bad, Buffer.from('XXXX.........'));
    expect(() => readMsk(bad)).toThrow(/not an MSK1/);
  });
});

describe('dataset loading', () => {
  test('drops the DC bin when masks carry one extra bin', () => {
    const dir = tempDir('dc');
    const frames = 3;
    const plane = new Float32Array(frames * 4 * 2).fill(0.5);
    const input = path.join(dir, 'x.spx');
    writeSpx(input, { frames, bins: 4, channels: 1, planes: [plane] });
    const irmS = new Float32Array(frames * 5);
    const irmD = new Float32Array(frames * 5);
    for (let t = 0; t < frames; t++) {
      for (let k = 0; k < 5; k++) {
        irmS[t * 5 + k] = k / 10;  // DC column holds 0
        irmD[t * 5 + k] = k / 20;
      }
    }
    const target = path.join(dir, 'y.msk');
    writeMsk(target, { frames, bins: 5, provenance: 'oracle', irmS, irmD });
    const ex = loadExample({ input, target });
    expect(ex.bins).toBe(4);
    // first retained bin is the old bin 1
    expect(ex.yS[0]).toBeCloseTo(0.1, 6);
    expect(ex.yD[0]).toBeCloseTo(0.05, 6);
  });

  test('frame mismatch is rejected', () => {
    const dir = tempDir('mismatch');
    const input = path.join(dir, 'x.spx');
    writeSpx(input, {
      frames: 2, bins: 4, channels: 1, planes: [new Float32Array(16)],
    });
    const target = path.join(dir, 'y.msk');
    writeMsk(target, {
      frames: 3, bins: 4, provenance: 'oracle',
      irmS: new Float32Array(12), irmD: new Float32Array(12),
    });
    expect(() => loadExample({ input, target })).toThrow(/frames/);
  });
});
