/**
 * Backend setup: the WASM (XNNPACK) backend plus one polyfilled kernel.
 *
 * The WASM backend ships every forward kernel this model needs but not
 * Conv2DBackpropFilter, which training requires. The polyfill composes it
 * from strided slices and matmuls (one per filter tap), which is exactly
 * the conv filter-gradient contraction and runs on the backend's fast
 * matmul. Dilated convolutions are not supported (the model uses none).
 */

import * as tf from '@tensorflow/tfjs';
import { setWasmPaths } from '@tensorflow/tfjs-backend-wasm';
import * as path from 'path';

let ready: Promise<void> | null = null;

export function initBackend(): Promise<void> {
  if (!ready) {
    ready = (async () => {
      const wasmDist = path.join(
        path.dirname(require.resolve('@tensorflow/tfjs-backend-wasm/package.json')),
        'dist/');
      setWasmPaths(wasmDist);
      await tf.setBackend('wasm');
      await tf.ready();
      registerConvFilterGradKernel();
    })();
  }
  return ready;
}

function convPadAmounts(
  inH: number, inW: number, kH: number, kW: number,
  sH: number, sW: number, pad: unknown,
): [number, number] {
  if (pad === 'valid') return [0, 0];
  if (typeof pad === 'number') return [pad, pad];
  const outH = Math.ceil(inH / sH);
  const outW = Math.ceil(inW / sW);
  return [
    Math.floor(Math.max((outH - 1) * sH + kH - inH, 0) / 2),
    Math.floor(Math.max((outW - 1) * sW + kW - inW, 0) / 2),
  ];
}

/** dW[kh,kw,ci,co] = sum over (n,oh,ow) of x[n,oh*s+kh-pad,...,ci] dy[n,oh,ow,co]. */
export function composedConvFilterGrad(
  x: tf.Tensor4D, dy: tf.Tensor4D,
  kH: number, kW: number, sH: number, sW: number, pad: unknown,
): tf.Tensor4D {
  return tf.tidy(() => {
    const [n, inH, inW, ci] = x.shape;
    const [, outH, outW, co] = dy.shape;
    const [padT, padL] = convPadAmounts(inH, inW, kH, kW, sH, sW, pad);
    const padB = Math.max((outH - 1) * sH + kH - inH - padT, 0);
    const padR = Math.max((outW - 1) * sW + kW - inW - padL, 0);
    const xp = tf.pad(x, [[0, 0], [padT, padB], [padL, padR], [0, 0]]);
    const dyMat = tf.reshape(dy, [n * outH * outW, co]);
    const taps: tf.Tensor2D[] = [];
    for (let kh = 0; kh < kH; kh++) {
      for (let kw = 0; kw < kW; kw++) {
        const xs = tf.stridedSlice(
          xp,
          [0, kh, kw, 0],
          [n, kh + (outH - 1) * sH + 1, kw + (outW - 1) * sW + 1, ci],
          [1, sH, sW, 1]);
        taps.push(tf.matMul(tf.reshape(xs, [n * outH * outW, ci]), dyMat, true, false));
      }
    }
    return tf.reshape(tf.stack(taps, 0), [kH, kW, ci, co]);
  });
}

function registerConvFilterGradKernel(): void {
  tf.registerKernel({
    kernelName: 'Conv2DBackpropFilter',
    backendName: 'wasm',
    kernelFunc: (args) => {
      const { x, dy } = args.inputs as { x: tf.Tensor4D; dy: tf.Tensor4D };
      const attrs = args.attrs as unknown as {
        strides: number | [number, number];
        pad: unknown;
        filterShape: [number, number, number, number];
        dilations?: number | [number, number];
      };
      const [sH, sW] = Array.isArray(attrs.strides)
        ? attrs.strides : [attrs.strides, attrs.strides];
      const dil = attrs.dilations ?? 1;
      const d = Array.isArray(dil) ? dil[0] : dil;
      if (d !== 1) {
        throw new Error('Conv2DBackpropFilter polyfill supports dilation 1 only');
      }
      return composedConvFilterGrad(
        x, dy, attrs.filterShape[0], attrs.filterShape[1], sH, sW, attrs.pad);
    },
  });
}
