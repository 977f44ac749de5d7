/**
 * Reader for tfjs-style checkpoint artifacts: a model JSON with a weights
 * manifest plus binary shard files holding the raw parameter data.
 */

import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { z } from 'zod';

const WeightSpecSchema = z.object({
  name: z.string(),
  shape: z.array(z.number().int().nonnegative()),
  dtype: z.string(),
});

const ManifestGroupSchema = z.object({
  paths: z.array(z.string()).min(1),
  weights: z.array(WeightSpecSchema),
});

const ModelJsonSchema = z.object({
  weightsManifest: z.array(ManifestGroupSchema).min(1),
});

export interface Tensor {
  shape: number[];
  /** values widened to f64; exact for float32 and float64 sources */
  data: Float64Array;
}

const BYTES_PER = new Map<string, number>([
  ['float32', 4],
  ['float64', 8],
  ['int32', 4],
]);

function sizeOf(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

function widen(dtype: string, bytes: Uint8Array, count: number): Float64Array {
  // slice() realigns the buffer for the typed-array views
  const copy = bytes.slice().buffer;
  switch (dtype) {
    case 'float32':
      return Float64Array.from(new Float32Array(copy, 0, count));
    case 'float64':
      return new Float64Array(copy, 0, count);
    case 'int32':
      return Float64Array.from(new Int32Array(copy, 0, count));
    default:
      throw new Error(`unsupported dtype ${dtype}`);
  }
}

export class Checkpoint {
  private tensors = new Map<string, Tensor>();

  constructor(entries: Iterable<[string, Tensor]>) {
    this.tensors = new Map(entries);
  }

  has(name: string): boolean {
    return this.tensors.has(name);
  }

  names(): string[] {
    return [...this.tensors.keys()];
  }

  get(name: string): Tensor {
    const tensor = this.tensors.get(name);
    if (!tensor) throw new Error(`missing parameter ${name}`);
    return tensor;
  }
}

/** Load every named tensor referenced by the checkpoint's weights manifest. */
export function loadCheckpoint(modelJsonPath: string): Checkpoint {
  const doc = ModelJsonSchema.parse(
    JSON.parse(readFileSync(modelJsonPath, 'utf-8')),
  );
  const base = dirname(modelJsonPath);
  const entries: [string, Tensor][] = [];
  for (const group of doc.weightsManifest) {
    const shards = group.paths.map((p) => readFileSync(join(base, p)));
    const blob = Buffer.concat(shards);
    let offset = 0;
    for (const spec of group.weights) {
      const per = BYTES_PER.get(spec.dtype);
      if (per === undefined) throw new Error(`unsupported dtype ${spec.dtype}`);
      const count = sizeOf(spec.shape);
      const nbytes = count * per;
      if (offset + nbytes > blob.length) {
        throw new Error(`shard data exhausted while reading ${spec.name}`);
      }
      const data = widen(
        spec.dtype,
        new Uint8Array(blob.buffer, blob.byteOffset + offset, nbytes),
        count,
      );
      entries.push([spec.name, { shape: spec.shape, data }]);
      offset += nbytes;
    }
    if (offset !== blob.length) {
      throw new Error(
        `shard group has ${blob.length - offset} trailing bytes after the manifest`,
      );
    }
  }
  return new Checkpoint(entries);
}
