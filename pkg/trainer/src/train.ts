/**
 * Training loop: Adam at 1e-4, learning-rate halving after 5 stagnant
 * validation epochs, early stop after 30, best-validation checkpointing.
 *
 * Each optimizer step covers a full batch, but gradients are accumulated
 * over micro-batches: the 32-bit WASM heap cannot hold the activation
 * tape of a batch-32 256x256 U-net, and averaged micro-batch gradients
 * realize the same update.
 */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

import { initBackend } from './backend';
import { saveModel } from './checkpoint';
import { DatasetManifest, Example, loadExample, toBatch } from './data';
import { NetConfig, buildModel, maskLoss, DEFAULT_NET } from './model';

const MICRO_BATCH = 8;

export interface TrainConfig {
  batchSize: number;
  learningRate: number;
  /** Halve the learning rate after this many epochs without val improvement. */
  lrPatience: number;
  /** Stop after this many epochs without val improvement. */
  stopPatience: number;
  maxEpochs: number;
  seed: number;
}

export const DEFAULT_TRAIN: TrainConfig = {
  batchSize: 32,
  learningRate: 1e-4,
  lrPatience: 5,
  stopPatience: 30,
  maxEpochs: 1000,
  seed: 0,
};

export interface EpochRecord {
  epoch: number;
  trainLoss: number;
  valLoss: number;
  learningRate: number;
}

export interface TrainResult {
  log: EpochRecord[];
  bestValLoss: number;
  checkpointDir: string;
}

function setLearningRate(optimizer: tf.Optimizer, lr: number): void {
  // tfjs optimizers read this property on every applyGradients call, so
  // assigning it keeps the Adam moment state while changing the step size.
  (optimizer as unknown as { learningRate: number }).learningRate = lr;
}

/**
 * Validation-plateau policy: halve the learning rate every lrPatience
 * epochs without a new best validation loss, stop after stopPatience.
 * "Improvement" means strictly lower than the best seen so far.
 */
export class PlateauSchedule {
  learningRate: number;
  bestLoss = Infinity;
  sinceImprove = 0;

  constructor(
    initialLr: number,
    private readonly lrPatience: number,
    private readonly stopPatience: number,
  ) {
    this.learningRate = initialLr;
  }

  observe(valLoss: number): { improved: boolean; stop: boolean } {
    if (valLoss < this.bestLoss) {
      this.bestLoss = valLoss;
      this.sinceImprove = 0;
      return { improved: true, stop: false };
    }
    this.sinceImprove += 1;
    if (this.sinceImprove % this.lrPatience === 0) {
      this.learningRate /= 2;
    }
    return { improved: false, stop: this.sinceImprove >= this.stopPatience };
  }
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function shuffled(n: number, rand: () => number): number[] {
  const idx = Array.from({ length: n }, (_, i) => i);
  for (let i = n - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [idx[i], idx[j]] = [idx[j], idx[i]];
  }
  return idx;
}

function modelVariables(model: tf.LayersModel): tf.Variable[] {
  return model.trainableWeights.map(
    (w) => (w as unknown as { val: tf.Variable }).val);
}

/** One accumulated optimizer step over a full batch; returns its loss. */
async function batchStep(
  model: tf.LayersModel,
  optimizer: tf.Optimizer,
  batch: Example[],
): Promise<number> {
  const vars = modelVariables(model);
  const accum = new Map<string, tf.Tensor>();
  let lossSum = 0;
  for (let lo = 0; lo < batch.length; lo += MICRO_BATCH) {
    const chunk = batch.slice(lo, lo + MICRO_BATCH);
    const { xs, ys } = toBatch(chunk);
    const frac = chunk.length / batch.length;
    const { value, grads } = tf.variableGrads(() => {
      const [predS, predD] = model.apply(xs, { training: true }) as tf.Tensor[];
      return maskLoss(predS, predD, ys[0], ys[1]);
    }, vars);
    lossSum += (await value.data())[0] * frac;
    for (const [name, grad] of Object.entries(grads)) {
      const scaled = tf.mul(grad, frac);
      const prev = accum.get(name);
      accum.set(name, prev ? tf.add(prev, scaled) : scaled);
      if (prev) tf.dispose(prev);
      if (prev) tf.dispose(scaled);
      tf.dispose(grad);
    }
    tf.dispose([value, xs, ...ys]);
  }
  optimizer.applyGradients(Object.fromEntries(accum));
  for (const g of accum.values()) tf.dispose(g);
  return lossSum;
}

export async function evaluateLoss(
  model: tf.LayersModel,
  examples: Example[],
): Promise<number> {
  let total = 0;
  for (let lo = 0; lo < examples.length; lo += MICRO_BATCH) {
    const chunk = examples.slice(lo, lo + MICRO_BATCH);
    const { xs, ys } = toBatch(chunk);
    const loss = tf.tidy(() => {
      const [predS, predD] = model.apply(xs, { training: false }) as tf.Tensor[];
      return maskLoss(predS, predD, ys[0], ys[1]);
    });
    total += (await loss.data())[0] * chunk.length;
    tf.dispose([loss, xs, ...ys]);
  }
  return total / examples.length;
}

export async function train(
  manifest: DatasetManifest,
  netCfg: NetConfig = DEFAULT_NET,
  trainCfg: TrainConfig = DEFAULT_TRAIN,
  outDir = 'checkpoint',
): Promise<TrainResult> {
  await initBackend();
  if (manifest.train.length === 0 || manifest.val.length === 0) {
    throw new Error('manifest needs non-empty train and val splits');
  }
  const trainSet = manifest.train.map(loadExample);
  const valSet = manifest.val.map(loadExample);

  const model = buildModel(netCfg);
  const optimizer = tf.train.adam(trainCfg.learningRate);
  const schedule = new PlateauSchedule(
    trainCfg.learningRate, trainCfg.lrPatience, trainCfg.stopPatience);
  const rand = mulberry32(trainCfg.seed);

  fs.mkdirSync(outDir, { recursive: true });
  const log: EpochRecord[] = [];

  for (let epoch = 1; epoch <= trainCfg.maxEpochs; epoch++) {
    const order = shuffled(trainSet.length, rand);
    let trainLoss = 0;
    for (let lo = 0; lo < order.length; lo += trainCfg.batchSize) {
      const batch = order.slice(lo, lo + trainCfg.batchSize).map((i) => trainSet[i]);
      trainLoss += (await batchStep(model, optimizer, batch)) * batch.length;
    }
    trainLoss /= trainSet.length;
    const valLoss = await evaluateLoss(model, valSet);

    const { improved, stop } = schedule.observe(valLoss);
    if (improved) {
      await saveModel(model, outDir);
    } else {
      setLearningRate(optimizer, schedule.learningRate);
    }
    log.push({ epoch, trainLoss, valLoss, learningRate: schedule.learningRate });
    if (stop) {
      break;
    }
  }

  fs.writeFileSync(
    path.join(outDir, 'training_log.json'),
    JSON.stringify({ epochs: log, bestValLoss: schedule.bestLoss }, null, 2) + '\n',
  );
  optimizer.dispose();
  model.dispose();
  return { log, bestValLoss: schedule.bestLoss, checkpointDir: outDir };
}
