/**
 * Multi-task U-net: a shared encoder/decoder with two mask heads.
 *
 * The speech-mask head is a 1x1 convolution + sigmoid on the final decoder
 * features; the direct-path head consumes those features concatenated with
 * the speech head's pre-sigmoid map through two extra conv blocks, so
 * speech-mask information feeds the harder direct-path task.
 */

import * as tf from '@tensorflow/tfjs';

export interface NetConfig {
  /** Spatial input size; null allows any multiple of 2^depth. */
  inputFrames: number | null;
  inputBins: number | null;
  /** Channel width per encoder stage; length sets the depth. */
  encoderWidths: number[];
  bottleneckWidth: number;
  dropoutRate: number;
  seed: number;
}

export const DEFAULT_NET: NetConfig = {
  inputFrames: 256,
  inputBins: 256,
  encoderWidths: [32, 64, 128, 256],
  bottleneckWidth: 512,
  dropoutRate: 0.5,
  seed: 0,
};

/** Slim widths for CPU-budget smoke runs and tests. */
export const SLIM_NET: NetConfig = {
  ...DEFAULT_NET,
  encoderWidths: [4, 8, 16, 32],
  bottleneckWidth: 64,
};

export function buildModel(cfg: NetConfig = DEFAULT_NET): tf.LayersModel {
  if (cfg.encoderWidths.length < 1) {
    throw new Error('encoderWidths must name at least one stage');
  }
  let seed = cfg.seed;
  const init = () => tf.initializers.glorotUniform({ seed: seed++ });

  const convBlock = (x: tf.SymbolicTensor, filters: number): tf.SymbolicTensor => {
    let y = tf.layers
      .conv2d({ filters, kernelSize: 3, padding: 'same', kernelInitializer: init() })
      .apply(x) as tf.SymbolicTensor;
    y = tf.layers.batchNormalization({}).apply(y) as tf.SymbolicTensor;
    return tf.layers.elu().apply(y) as tf.SymbolicTensor;
  };

  const input = tf.input({ shape: [cfg.inputFrames, cfg.inputBins, 1] });
  let x = input;
  const skips: tf.SymbolicTensor[] = [];
  for (const width of cfg.encoderWidths) {
    x = convBlock(x, width);
    x = convBlock(x, width);
    skips.push(x);
    x = tf.layers.maxPooling2d({ poolSize: 2, strides: 2 }).apply(x) as tf.SymbolicTensor;
  }

  x = convBlock(x, cfg.bottleneckWidth);
  x = convBlock(x, cfg.bottleneckWidth);

  for (let i = cfg.encoderWidths.length - 1; i >= 0; i--) {
    const width = cfg.encoderWidths[i];
    x = tf.layers
      .dropout({ rate: cfg.dropoutRate, seed: seed++ })
      .apply(x) as tf.SymbolicTensor;
    x = tf.layers
      .conv2dTranspose({
        filters: width,
        kernelSize: 2,
        strides: 2,
        padding: 'same',
        kernelInitializer: init(),
      })
      .apply(x) as tf.SymbolicTensor;
    x = tf.layers.elu().apply(x) as tf.SymbolicTensor;
    x = tf.layers.concatenate().apply([skips[i], x]) as tf.SymbolicTensor;
    x = convBlock(x, width);
    x = convBlock(x, width);
  }

  const sPre = tf.layers
    .conv2d({ filters: 1, kernelSize: 1, kernelInitializer: init() })
    .apply(x) as tf.SymbolicTensor;
  const irmS = tf.layers
    .activation({ activation: 'sigmoid', name: 'irm_s' })
    .apply(sPre) as tf.SymbolicTensor;

  let d = tf.layers.concatenate().apply([x, sPre]) as tf.SymbolicTensor;
  d = convBlock(d, cfg.encoderWidths[0]);
  d = convBlock(d, cfg.encoderWidths[0]);
  const irmD = tf.layers
    .conv2d({
      filters: 1,
      kernelSize: 1,
      activation: 'sigmoid',
      kernelInitializer: init(),
      name: 'irm_d',
    })
    .apply(d) as tf.SymbolicTensor;

  return tf.model({ inputs: input, outputs: [irmS, irmD] });
}

/** Summed half-MSE over both mask heads. */
export function maskLoss(
  predS: tf.Tensor,
  predD: tf.Tensor,
  targetS: tf.Tensor,
  targetD: tf.Tensor,
): tf.Scalar {
  return tf.tidy(() => {
    const mseS = tf.losses.meanSquaredError(targetS, predS);
    const mseD = tf.losses.meanSquaredError(targetD, predD);
    return mseS.mul(0.5).add(mseD.mul(0.5)) as tf.Scalar;
  });
}
