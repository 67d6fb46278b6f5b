import * as tf from '@tensorflow/tfjs';
import { beforeAll, describe, expect, test } from 'vitest';

import { initBackend } from '../src/backend';
import { buildModel, maskLoss, SLIM_NET } from '../src/model';

beforeAll(async () => {
  await initBackend();
});

const TINY = {
  ...SLIM_NET,
  inputFrames: null,
  inputBins: null,
  encoderWidths: [2, 4],
  bottleneckWidth: 8,
};

describe('model shapes', () => {
  test('forward on 256x256 yields two 256x256 maps in [0,1]', async () => {
    const model = buildModel(SLIM_NET);
    const x = tf.randomNormal([1, 256, 256, 1], 0, 1, 'float32', 1);
    const [s, d] = model.predict(x) as tf.Tensor[];
    expect(s.shape).toEqual([1, 256, 256, 1]);
    expect(d.shape).toEqual([1, 256, 256, 1]);
    for (const out of [s, d]) {
      const data = await out.data();
      let lo = 1, hi = 0;
      for (const v of data) {
        lo = Math.min(lo, v);
        hi = Math.max(hi, v);
      }
      expect(lo).toBeGreaterThanOrEqual(0);
      expect(hi).toBeLessThanOrEqual(1);
    }
    tf.dispose([x, s, d]);
    model.dispose();
  });

  test('batch forward keeps the batch dimension', () => {
    const model = buildModel(TINY);
    const x = tf.zeros([32, 64, 64, 1]);
    const [s, d] = model.predict(x) as tf.Tensor[];
    expect(s.shape).toEqual([32, 64, 64, 1]);
    expect(d.shape).toEqual([32, 64, 64, 1]);
    tf.dispose([x, s, d]);
    model.dispose();
  });

  test('fully convolutional: any pool-aligned input size works', () => {
    const model = buildModel(TINY);
    const x = tf.zeros([1, 32, 48, 1]);
    const [s, d] = model.predict(x) as tf.Tensor[];
    expect(s.shape).toEqual([1, 32, 48, 1]);
    expect(d.shape).toEqual([1, 32, 48, 1]);
    tf.dispose([x, s, d]);
    model.dispose();
  });

  test('empty width list is rejected', () => {
    expect(() => buildModel({ ...SLIM_NET, encoderWidths: [] })).toThrow();
  });
});

describe('mask loss', () => {
  test('zero when prediction equals target', async () => {
    const a = tf.randomUniform([2, 8, 8, 1], 0, 1, 'float32', 3);
    const b = tf.randomUniform([2, 8, 8, 1], 0, 1, 'float32', 4);
    const loss = maskLoss(a, b, a, b);
    expect((await loss.data())[0]).toBeCloseTo(0, 7);
    tf.dispose([a, b, loss]);
  });

  test('all-zero prediction against all-one target costs one', async () => {
    const zero = tf.zeros([1, 4, 4, 1]);
    const one = tf.ones([1, 4, 4, 1]);
    const loss = maskLoss(zero, zero, one, one);
    expect((await loss.data())[0]).toBeCloseTo(1.0, 6);
    tf.dispose([zero, one, loss]);
  });

  test('matches a scalar re-evaluation on random tensors', async () => {
    const shape: [number, number, number, number] = [2, 4, 4, 1];
    const t = [1, 2, 3, 4].map((s) =>
      tf.randomUniform(shape, 0, 1, 'float32', s));
    const loss = (await maskLoss(t[0], t[1], t[2], t[3]).data())[0];
    const [ps, pd, ts, ds] = await Promise.all(t.map((x) => x.data()));
    let mseS = 0, mseD = 0;
    for (let i = 0; i < ps.length; i++) {
      mseS += (ps[i] - ts[i]) ** 2;
      mseD += (pd[i] - ds[i]) ** 2;
    }
    const expected = 0.5 * (mseS / ps.length) + 0.5 * (mseD / pd.length);
    expect(Math.abs(loss - expected)).toBeLessThan(1e-6);
    tf.dispose(t);
  });

  test('analytic gradient matches finite differences', async () => {
    // d/dpredS of 0.5*mean((predS-t)^2) = (predS-t)/N
    const predS = tf.tensor4d([0.2, 0.7, 0.4, 0.9], [1, 2, 2, 1]);
    const predD = tf.tensor4d([0.1, 0.3, 0.8, 0.5], [1, 2, 2, 1]);
    const tgtS = tf.tensor4d([0.5, 0.5, 0.5, 0.5], [1, 2, 2, 1]);
    const tgtD = tf.tensor4d([0.25, 0.25, 0.25, 0.25], [1, 2, 2, 1]);
    const gradFn = tf.grads((ps: tf.Tensor, pd: tf.Tensor) =>
      maskLoss(ps, pd, tgtS, tgtD));
    const [gS, gD] = gradFn([predS, predD]);
    const analyticS = await gS.data();
    const analyticD = await gD.data();

    // central differences: exact for a quadratic loss, so only float32
    // rounding remains and the 1e-4 relative tolerance is meaningful
    const eps = 0.05;
    const pData = Array.from(await predS.data());
    for (let i = 0; i < pData.length; i++) {
      const up = pData.slice();
      const dn = pData.slice();
      up[i] += eps;
      dn[i] -= eps;
      const pu = tf.tensor4d(up, [1, 2, 2, 1]);
      const pdn = tf.tensor4d(dn, [1, 2, 2, 1]);
      const lu = (await maskLoss(pu, predD, tgtS, tgtD).data())[0];
      const ld = (await maskLoss(pdn, predD, tgtS, tgtD).data())[0];
      const fd = (lu - ld) / (2 * eps);
      expect(Math.abs(fd - analyticS[i]) / Math.max(Math.abs(fd), 1e-6))
        .toBeLessThan(1e-4);
      tf.dispose([pu, pdn]);
    }
    // direct-path head gradient has the same structure; spot check one entry
    expect(analyticD[0]).toBeCloseTo((0.1 - 0.25) / 4, 5);
    tf.dispose([predS, predD, tgtS, tgtD, gS, gD]);
  });
});
