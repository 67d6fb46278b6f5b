/** Command line: train on a manifest, or predict masks for one .spx file. */

import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { loadManifest } from './data';
import { DEFAULT_NET, NetConfig } from './model';
import { loadCheckpoint, predictToMsk } from './predict';
import { DEFAULT_TRAIN, train } from './train';

function parseWidths(text: string): number[] {
  const widths = text.split(',').map((w) => parseInt(w.trim(), 10));
  if (widths.some((w) => !Number.isFinite(w) || w < 1)) {
    throw new Error(`bad widths: ${text}`);
  }
  return widths;
}

async function main(): Promise<void> {
  await yargs(hideBin(process.argv))
    .command(
      'train',
      'train the mask estimator on a dataset manifest',
      (y) =>
        y
          .option('manifest', { type: 'string', demandOption: true })
          .option('out', { type: 'string', default: 'checkpoint' })
          .option('epochs', { type: 'number', default: DEFAULT_TRAIN.maxEpochs })
          .option('batch', { type: 'number', default: DEFAULT_TRAIN.batchSize })
          .option('lr', { type: 'number', default: DEFAULT_TRAIN.learningRate })
          .option('seed', { type: 'number', default: 0 })
          .option('widths', {
            type: 'string',
            default: DEFAULT_NET.encoderWidths.join(','),
            describe: 'encoder channel widths, comma separated',
          })
          .option('bottleneck', {
            type: 'number',
            default: DEFAULT_NET.bottleneckWidth,
          }),
      async (argv) => {
        const netCfg: NetConfig = {
          ...DEFAULT_NET,
          encoderWidths: parseWidths(argv.widths),
          bottleneckWidth: argv.bottleneck,
          seed: argv.seed,
        };
        const result = await train(
          loadManifest(argv.manifest),
          netCfg,
          {
            ...DEFAULT_TRAIN,
            batchSize: argv.batch,
            learningRate: argv.lr,
            maxEpochs: argv.epochs,
            seed: argv.seed,
          },
          argv.out,
        );
        for (const rec of result.log) {
          console.log(
            `epoch ${rec.epoch}: train ${rec.trainLoss.toFixed(6)} ` +
              `val ${rec.valLoss.toFixed(6)} lr ${rec.learningRate}`,
          );
        }
        console.log(`best val loss ${result.bestValLoss.toFixed(6)} -> ${result.checkpointDir}`);
      },
    )
    .command(
      'predict',
      'estimate masks for a .spx input',
      (y) =>
        y
          .option('model', { type: 'string', demandOption: true, describe: 'checkpoint directory' })
          .option('input', { type: 'string', demandOption: true })
          .option('out', { type: 'string', demandOption: true }),
      async (argv) => {
        const model = await loadCheckpoint(argv.model);
        await predictToMsk(model, argv.input, argv.out);
        model.dispose();
        console.log(argv.out);
      },
    )
    .demandCommand(1)
    .strict()
    .parseAsync();
}

main().catch((err) => {
  console.error(`unet-mask-trainer: error: ${err.message}`);
  process.exit(2);
});
