/**
 * Export manifest: names the checkpoint parameters holding the Gaussian
 * base-distribution pieces (and optionally a coupling-flow stack), plus the
 * label-frequency source for class priors.
 */

import { readFileSync } from 'node:fs';
import { dirname, isAbsolute, join } from 'node:path';
import { z } from 'zod';

export const FlowLayerRefSchema = z.object({
  kind: z.string(),
  mask_a: z.array(z.number().int().nonnegative()).optional(),
  w: z.string().optional(),
  b: z.string().optional(),
  log_s: z.string().optional(),
});

export const ManifestSchema = z
  .object({
    checkpoint: z.string(),
    means: z.string(),
    log_scales: z.string().optional(),
    cov: z.string().optional(),
    label_counts: z.array(z.number().nonnegative()).optional(),
    label_counts_path: z.string().optional(),
    flow: z
      .object({
        d: z.number().int().positive(),
        layers: z.array(FlowLayerRefSchema),
      })
      .optional(),
  })
  .strict();

export type FlowLayerRef = z.infer<typeof FlowLayerRefSchema>;
export type CheckpointManifest = z.infer<typeof ManifestSchema>;

/** Parse a manifest file; relative paths resolve against its directory. */
export function loadManifest(path: string): CheckpointManifest {
  const manifest = ManifestSchema.parse(JSON.parse(readFileSync(path, 'utf-8')));
  const base = dirname(path);
  const resolve = (p: string) => (isAbsolute(p) ? p : join(base, p));
  return {
    ...manifest,
    checkpoint: resolve(manifest.checkpoint),
    label_counts_path: manifest.label_counts_path
      ? resolve(manifest.label_counts_path)
      : undefined,
  };
}

export function readLabelCounts(manifest: CheckpointManifest): number[] {
  if (manifest.label_counts && manifest.label_counts_path) {
    throw new Error('provide label_counts or label_counts_path, not both');
  }
  if (manifest.label_counts) return manifest.label_counts;
  if (manifest.label_counts_path) {
    const counts = z
      .array(z.number().nonnegative())
      .parse(JSON.parse(readFileSync(manifest.label_counts_path, 'utf-8')));
    return counts;
  }
  throw new Error('missing label counts (label_counts or label_counts_path)');
}
