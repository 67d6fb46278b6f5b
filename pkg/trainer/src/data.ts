/** Dataset manifests pairing .spx network inputs with .msk targets. */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

import { readMsk, readSpx, spxRealChannel } from './formats';

export interface ManifestPair {
  input: string;
  target: string;
}

export interface DatasetManifest {
  train: ManifestPair[];
  val: ManifestPair[];
  test: ManifestPair[];
}

export function loadManifest(manifestPath: string): DatasetManifest {
  const doc = JSON.parse(fs.readFileSync(manifestPath, 'utf-8'));
  const base = path.dirname(manifestPath);
  const resolve = (pairs: ManifestPair[] | undefined): ManifestPair[] =>
    (pairs ?? []).map((p) => ({
      input: path.resolve(base, p.input),
      target: path.resolve(base, p.target),
    }));
  return { train: resolve(doc.train), val: resolve(doc.val), test: resolve(doc.test) };
}

export interface Example {
  /** (frames, bins) normalized log-magnitude map. */
  x: Float32Array;
  /** (frames, bins) mask targets aligned with the input bins. */
  yS: Float32Array;
  yD: Float32Array;
  frames: number;
  bins: number;
}

/**
 * Load one (.spx, .msk) pair. Mask files from the oracle pipeline carry one
 * extra leading bin (DC) relative to the network map; it is dropped so the
 * planes align bin-for-bin with the input.
 */
export function loadExample(pair: ManifestPair): Example {
  const spx = readSpx(pair.input);
  const x = spxRealChannel(spx, 0);
  const masks = readMsk(pair.target);
  if (masks.frames !== spx.frames) {
    throw new Error(
      `${pair.target}: ${masks.frames} frames vs input ${spx.frames}`);
  }
  let yS = masks.irmS;
  let yD = masks.irmD;
  if (masks.bins === spx.bins + 1) {
    yS = dropLeadingBin(yS, masks.frames, masks.bins);
    yD = dropLeadingBin(yD, masks.frames, masks.bins);
  } else if (masks.bins !== spx.bins) {
    throw new Error(
      `${pair.target}: ${masks.bins} bins vs input ${spx.bins}`);
  }
  return { x, yS, yD, frames: spx.frames, bins: spx.bins };
}

function dropLeadingBin(plane: Float32Array, frames: number, bins: number): Float32Array {
  const out = new Float32Array(frames * (bins - 1));
  for (let t = 0; t < frames; t++) {
    out.set(plane.subarray(t * bins + 1, (t + 1) * bins), t * (bins - 1));
  }
  return out;
}

export interface Batch {
  xs: tf.Tensor4D;
  ys: [tf.Tensor4D, tf.Tensor4D];
}

export function toBatch(examples: Example[]): Batch {
  const { frames, bins } = examples[0];
  for (const ex of examples) {
    if (ex.frames !== frames || ex.bins !== bins) {
      throw new Error('examples in a batch must share one shape');
    }
  }
  const n = examples.length;
  const xs = new Float32Array(n * frames * bins);
  const ysS = new Float32Array(n * frames * bins);
  const ysD = new Float32Array(n * frames * bins);
  examples.forEach((ex, i) => {
    xs.set(ex.x, i * frames * bins);
    ysS.set(ex.yS, i * frames * bins);
    ysD.set(ex.yD, i * frames * bins);
  });
  const shape: [number, number, number, number] = [n, frames, bins, 1];
  return {
    xs: tf.tensor4d(xs, shape),
    ys: [tf.tensor4d(ysS, shape), tf.tensor4d(ysD, shape)],
  };
}
