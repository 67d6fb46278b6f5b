/** Inference: .spx log-magnitude map in, estimated .msk out. */

import * as tf from '@tensorflow/tfjs';

import { initBackend } from './backend';
import { loadModel } from './checkpoint';
import { readSpx, spxRealChannel, writeMsk } from './formats';

export async function loadCheckpoint(dir: string): Promise<tf.LayersModel> {
  await initBackend();
  return loadModel(dir);
}

/**
 * Estimate both masks for one input map and write them as an .msk file.
 *
 * The network works on the DC-free bin axis; the written file prepends a
 * zero DC column so its dims match the toolkit's full one-sided spectrum
 * (the DC bin sits outside the analysis band and is never selected).
 */
export async function predictToMsk(
  model: tf.LayersModel,
  inputPath: string,
  outputPath: string,
): Promise<void> {
  const spx = readSpx(inputPath);
  const x = tf.tensor4d(spxRealChannel(spx, 0), [1, spx.frames, spx.bins, 1]);
  const [predS, predD] = model.predict(x) as tf.Tensor[];
  const s = (await predS.data()) as Float32Array;
  const d = (await predD.data()) as Float32Array;
  tf.dispose([x, predS, predD]);

  const bins = spx.bins + 1;
  const irmS = new Float32Array(spx.frames * bins);
  const irmD = new Float32Array(spx.frames * bins);
  for (let t = 0; t < spx.frames; t++) {
    for (let k = 0; k < spx.bins; k++) {
      irmS[t * bins + k + 1] = clamp01(s[t * spx.bins + k]);
      irmD[t * bins + k + 1] = clamp01(d[t * spx.bins + k]);
    }
  }
  writeMsk(outputPath, {
    frames: spx.frames,
    bins,
    provenance: 'estimated',
    irmS,
    irmD,
  });
}

function clamp01(v: number): number {
  return v < 0 ? 0 : v > 1 ? 1 : v;
}
