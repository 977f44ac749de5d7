/**
 * Parameter extraction: checkpoint tensors to a GCM model.
 *
 * The exporter translates formats only; it never estimates or computes
 * error quantities itself.
 */

import { Checkpoint, Tensor } from './checkpoint.js';
import { COV_DIAG, COV_FULL, COV_SCALAR, GcmModel, encodeGcm } from './gcm.js';
import { CheckpointManifest, readLabelCounts } from './manifest.js';

function expectShape(name: string, tensor: Tensor, shape: number[]): void {
  const ok =
    tensor.shape.length === shape.length &&
    tensor.shape.every((s, i) => s === shape[i]);
  if (!ok) {
    throw new Error(
      `shape mismatch for ${name}: got [${tensor.shape}], expected [${shape}]`,
    );
  }
}

function covarianceFrom(
  manifest: CheckpointManifest,
  checkpoint: Checkpoint,
  d: number,
): { covKind: number; cov: Float64Array } {
  if (manifest.cov && manifest.log_scales) {
    throw new Error('provide cov or log_scales, not both');
  }
  if (manifest.cov) {
    const tensor = checkpoint.get(manifest.cov);
    expectShape(manifest.cov, tensor, [d, d]);
    return { covKind: COV_FULL, cov: tensor.data };
  }
  if (manifest.log_scales) {
    const tensor = checkpoint.get(manifest.log_scales);
    const variance = Float64Array.from(tensor.data, (s) => Math.exp(2 * s));
    const size = tensor.shape.reduce((a, b) => a * b, 1);
    if (tensor.shape.length === 0 || size === 1) {
      return { covKind: COV_SCALAR, cov: variance.subarray(0, 1) };
    }
    expectShape(manifest.log_scales, tensor, [d]);
    return { covKind: COV_DIAG, cov: variance };
  }
  return { covKind: COV_SCALAR, cov: Float64Array.of(1.0) };
}

/** Build the GCM model from the named checkpoint parameters. */
export function extractGcm(
  manifest: CheckpointManifest,
  checkpoint: Checkpoint,
): GcmModel {
  const means = checkpoint.get(manifest.means);
  if (means.shape.length !== 2) {
    throw new Error(
      `shape mismatch for ${manifest.means}: got [${means.shape}], expected [K, d]`,
    );
  }
  const [k, d] = means.shape;
  if (k < 1 || d < 1) throw new Error('means must be a nonempty [K, d] matrix');

  const counts = readLabelCounts(manifest);
  if (counts.length !== k) {
    throw new Error(`label counts length ${counts.length} != ${k} classes`);
  }
  const total = counts.reduce((a, b) => a + b, 0);
  if (total <= 0) throw new Error('label counts must sum to a positive value');
  const priors = Float64Array.from(counts, (c) => c / total);

  const { covKind, cov } = covarianceFrom(manifest, checkpoint, d);
  return { k, d, covKind, priors, means: means.data, cov };
}

export function exportGcm(
  manifest: CheckpointManifest,
  checkpoint: Checkpoint,
): Uint8Array {
  return encodeGcm(extractGcm(manifest, checkpoint));
}
