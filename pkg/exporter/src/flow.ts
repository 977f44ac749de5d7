/**
 * Coupling-flow extraction into the Flow JSON format consumed by the
 * estimation package: additive and affine coupling layers only; anything
 * else (1x1 convolutions, actnorm, squeezes) is rejected explicitly.
 */

import { Checkpoint, Tensor } from './checkpoint.js';
import { CheckpointManifest, FlowLayerRef } from './manifest.js';

const SUPPORTED = new Set(['additive', 'affine']);

export interface FlowJsonLayer {
  mask_a: number[];
  w: number[][];
  b: number[];
  log_s: number[] | null;
}

export interface FlowJson {
  d: number;
  layers: FlowJsonLayer[];
}

function toMatrix(tensor: Tensor): number[][] {
  const [rows, cols] = tensor.shape;
  const out: number[][] = [];
  for (let r = 0; r < rows; r++) {
    out.push(Array.from(tensor.data.subarray(r * cols, (r + 1) * cols)));
  }
  return out;
}

function requireName(layer: FlowLayerRef, field: 'w' | 'b' | 'log_s' | 'mask_a') {
  const value = layer[field];
  if (value === undefined) {
    throw new Error(`layer of kind ${layer.kind} is missing ${field}`);
  }
  return value;
}

function extractLayer(
  layer: FlowLayerRef,
  checkpoint: Checkpoint,
  d: number,
): FlowJsonLayer {
  if (!SUPPORTED.has(layer.kind)) {
    throw new Error(`unsupported layer: ${layer.kind}`);
  }
  const maskA = requireName(layer, 'mask_a') as number[];
  if (maskA.length === 0 || maskA.length >= d) {
    throw new Error('active set must be a proper nonempty subset of the coordinates');
  }
  if (maskA.some((i) => i < 0 || i >= d)) {
    throw new Error('active index out of range');
  }
  const nA = maskA.length;
  const nB = d - nA;
  const w = checkpoint.get(requireName(layer, 'w') as string);
  if (w.shape.length !== 2 || w.shape[0] !== nA || w.shape[1] !== nB) {
    throw new Error(
      `shape mismatch for ${layer.w}: got [${w.shape}], expected [${nA}, ${nB}]`,
    );
  }
  const b = checkpoint.get(requireName(layer, 'b') as string);
  if (b.shape.length !== 1 || b.shape[0] !== nA) {
    throw new Error(`shape mismatch for ${layer.b}: got [${b.shape}], expected [${nA}]`);
  }
  let logS: number[] | null = null;
  if (layer.kind === 'affine') {
    const s = checkpoint.get(requireName(layer, 'log_s') as string);
    if (s.shape.length !== 1 || s.shape[0] !== nA) {
      throw new Error(
        `shape mismatch for ${layer.log_s}: got [${s.shape}], expected [${nA}]`,
      );
    }
    logS = Array.from(s.data);
  }
  return {
    mask_a: maskA,
    w: toMatrix(w),
    b: Array.from(b.data),
    log_s: logS,
  };
}

/** Extract the manifest's flow section, bounded by maxDim (an empty layer
 * list exports the identity flow). */
export function exportFlowJson(
  manifest: CheckpointManifest,
  checkpoint: Checkpoint,
  maxDim: number,
): FlowJson {
  if (!manifest.flow) throw new Error('manifest has no flow section');
  const { d, layers } = manifest.flow;
  if (d > maxDim) {
    throw new Error(`flow dimension ${d} exceeds the limit ${maxDim}`);
  }
  return { d, layers: layers.map((layer) => extractLayer(layer, checkpoint, d)) };
}
