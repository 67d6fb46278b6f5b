import * as fs from 'fs';
import * as path from 'path';

import { writeMsk, writeSpx } from '../src/formats';
import { ManifestPair } from '../src/data';

/** Deterministic LCG so fixtures are stable across runs. */
export function lcg(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s * 1664525 + 1013904223) >>> 0;
    return s / 4294967296;
  };
}

/**
 * One synthetic training pair: an input map in [-1, 1] and masks that are
 * a function of it. The default sigmoid target mimics real mask contrast;
 * the near-constant affine target is trivially memorizable.
 */
export function synthPair(dir: string, name: string, seed: number,
                          frames = 256, bins = 256,
                          target: (v: number) => number =
                            (v) => 1 / (1 + Math.exp(-4 * v))): ManifestPair {
  const rand = lcg(seed);
  const n = frames * bins;
  const plane = new Float32Array(n * 2);
  const irmS = new Float32Array(n);
  const irmD = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    const v = 2 * rand() - 1;
    plane[2 * i] = v;
    const t = target(v);
    irmS[i] = t;
    irmD[i] = 0.6 * t;
  }
  const input = path.join(dir, `${name}.spx`);
  const targetPath = path.join(dir, `${name}.msk`);
  writeSpx(input, { frames, bins, channels: 1, planes: [plane] });
  writeMsk(targetPath, { frames, bins, provenance: 'oracle', irmS, irmD });
  return { input, target: targetPath };
}

export const affineTarget = (v: number): number => 0.75 + 0.05 * v;

export function tempDir(tag: string): string {
  const dir = fs.mkdtempSync(path.join('/tmp', `unet-${tag}-`));
  return dir;
}
