#!/usr/bin/env node
/** Command-line surface: manifest in, GCM or Flow JSON out. */

import { writeFileSync } from 'node:fs';
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { loadCheckpoint } from './checkpoint.js';
import { exportGcm } from './export.js';
import { exportFlowJson } from './flow.js';
import { loadManifest } from './manifest.js';

function fail(error: unknown): never {
  console.error(`error: ${error instanceof Error ? error.message : error}`);
  process.exit(1);
}

await yargs(hideBin(process.argv))
  .scriptName('bayesbound-exporter')
  .command(
    'export-gcm',
    'write the Gaussian base-distribution parameters as a GCM file',
    (y) =>
      y
        .option('manifest', { type: 'string', demandOption: true })
        .option('out', { type: 'string', demandOption: true }),
    (argv) => {
      try {
        const manifest = loadManifest(argv.manifest);
        const checkpoint = loadCheckpoint(manifest.checkpoint);
        writeFileSync(argv.out, exportGcm(manifest, checkpoint));
        console.log(`wrote ${argv.out}`);
      } catch (error) {
        fail(error);
      }
    },
  )
  .command(
    'export-flow',
    'write the manifest flow section as Flow JSON',
    (y) =>
      y
        .option('manifest', { type: 'string', demandOption: true })
        .option('out', { type: 'string', demandOption: true })
        .option('max-dim', { type: 'number', default: 64 }),
    (argv) => {
      try {
        const manifest = loadManifest(argv.manifest);
        const checkpoint = loadCheckpoint(manifest.checkpoint);
        const flow = exportFlowJson(manifest, checkpoint, argv.maxDim);
        writeFileSync(argv.out, JSON.stringify(flow));
        console.log(`wrote ${argv.out}`);
      } catch (error) {
        fail(error);
      }
    },
  )
  .demandCommand(1)
  .strict()
  .help()
  .parse();
