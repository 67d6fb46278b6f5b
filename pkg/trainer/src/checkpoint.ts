/** Filesystem checkpoints: model.json (topology + weight specs) + weights.bin. */

import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

export async function saveModel(model: tf.LayersModel, dir: string): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(tf.io.withSaveHandler(async (artifacts) => {
    const weightData = artifacts.weightData as ArrayBuffer;
    fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(weightData));
    const meta = {
      modelTopology: artifacts.modelTopology,
      weightSpecs: artifacts.weightSpecs,
      format: 'layers-model',
      generatedBy: 'unet-mask-trainer',
    };
    fs.writeFileSync(path.join(dir, 'model.json'), JSON.stringify(meta) + '\n');
    return {
      modelArtifactsInfo: {
        dateSaved: new Date(),
        modelTopologyType: 'JSON',
      },
    };
  }));
}

export async function loadModel(dir: string): Promise<tf.LayersModel> {
  const metaPath = path.join(dir, 'model.json');
  if (!fs.existsSync(metaPath)) {
    throw new Error(`no checkpoint at ${dir}`);
  }
  const meta = JSON.parse(fs.readFileSync(metaPath, 'utf-8'));
  const weights = fs.readFileSync(path.join(dir, 'weights.bin'));
  const buffer = weights.buffer.slice(
    weights.byteOffset, weights.byteOffset + weights.byteLength);
  return tf.loadLayersModel({
    load: async () => ({
      modelTopology: meta.modelTopology,
      weightSpecs: meta.weightSpecs,
      weightData: buffer,
    }),
  });
}
