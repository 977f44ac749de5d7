import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

export interface WeightFixture {
  name: string;
  shape: number[];
  dtype: 'float32' | 'float64' | 'int32';
  values: number[];
}

export function tempDir(): string {
  return mkdtempSync(join(tmpdir(), 'exporter-test-'));
}

function encode(weights: WeightFixture[]): Buffer {
  const parts: Buffer[] = [];
  for (const w of weights) {
    if (w.dtype === 'float32') {
      parts.push(Buffer.from(new Float32Array(w.values).buffer));
    } else if (w.dtype === 'float64') {
      parts.push(Buffer.from(new Float64Array(w.values).buffer));
    } else {
      parts.push(Buffer.from(new Int32Array(w.values).buffer));
    }
  }
  return Buffer.concat(parts);
}

/** Write a one-group checkpoint (model.json + shards); returns its path. */
export function writeCheckpoint(
  dir: string,
  weights: WeightFixture[],
  shards = 1,
): string {
  const blob = encode(weights);
  const per = Math.ceil(blob.length / shards);
  const paths: string[] = [];
  for (let i = 0; i < shards; i++) {
    const name = `group1-shard${i + 1}of${shards}.bin`;
    writeFileSync(join(dir, name), blob.subarray(i * per, (i + 1) * per));
    paths.push(name);
  }
  const modelJson = {
    modelTopology: {},
    weightsManifest: [
      {
        paths,
        weights: weights.map(({ name, shape, dtype }) => ({ name, shape, dtype })),
      },
    ],
  };
  const path = join(dir, 'model.json');
  writeFileSync(path, JSON.stringify(modelJson));
  return path;
}

export function writeManifest(dir: string, manifest: object): string {
  const path = join(dir, 'manifest.json');
  writeFileSync(path, JSON.stringify(manifest));
  return path;
}
