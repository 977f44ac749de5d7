/**
 * GCM binary interchange format.
 *
 * Layout (little-endian): magic "GCM1", u32 version = 1, u32 K, u32 d,
 * u8 covKind (0 full d*d, 1 diagonal, 2 scalar), then f64 priors[K],
 * f64 means[K*d] row-major, f64 covariance payload.
 */

export const COV_FULL = 0;
export const COV_DIAG = 1;
export const COV_SCALAR = 2;

const MAGIC = 'GCM1';
const VERSION = 1;
const HEADER_BYTES = 4 + 4 + 4 + 4 + 1;

export interface GcmModel {
  k: number;
  d: number;
  covKind: number;
  /** length K */
  priors: Float64Array;
  /** length K*d, row-major */
  means: Float64Array;
  /** length d*d, d, or 1 depending on covKind */
  cov: Float64Array;
}

function covLength(covKind: number, d: number): number {
  switch (covKind) {
    case COV_FULL:
      return d * d;
    case COV_DIAG:
      return d;
    case COV_SCALAR:
      return 1;
    default:
      throw new Error(`unknown covariance kind ${covKind}`);
  }
}

export function encodeGcm(model: GcmModel): Uint8Array {
  const { k, d, covKind, priors, means, cov } = model;
  if (k < 1 || d < 1) throw new Error('need at least one class and one dimension');
  if (priors.length !== k) throw new Error(`priors length ${priors.length} != ${k}`);
  if (means.length !== k * d) throw new Error(`means length ${means.length} != ${k * d}`);
  const payload = covLength(covKind, d);
  if (cov.length !== payload) {
    throw new Error(`covariance payload length ${cov.length} != ${payload}`);
  }

  const doubles = k + k * d + payload;
  const bytes = new Uint8Array(HEADER_BYTES + 8 * doubles);
  const view = new DataView(bytes.buffer);
  for (let i = 0; i < 4; i++) bytes[i] = MAGIC.charCodeAt(i);
  view.setUint32(4, VERSION, true);
  view.setUint32(8, k, true);
  view.setUint32(12, d, true);
  view.setUint8(16, covKind);

  let offset = HEADER_BYTES;
  for (const arr of [priors, means, cov]) {
    for (const value of arr) {
      view.setFloat64(offset, value, true);
      offset += 8;
    }
  }
  return bytes;
}

/** Parse GCM bytes; used to verify written files independently. */
export function decodeGcm(bytes: Uint8Array): GcmModel {
  if (bytes.length < HEADER_BYTES) throw new Error('file too short for header');
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const magic = String.fromCharCode(...bytes.subarray(0, 4));
  if (magic !== MAGIC) throw new Error('bad magic bytes');
  const version = view.getUint32(4, true);
  if (version !== VERSION) throw new Error(`unsupported version ${version}`);
  const k = view.getUint32(8, true);
  const d = view.getUint32(12, true);
  const covKind = view.getUint8(16);
  const payload = covLength(covKind, d);
  const doubles = k + k * d + payload;
  if (bytes.length !== HEADER_BYTES + 8 * doubles) {
    throw new Error(`file length ${bytes.length} != expected ${HEADER_BYTES + 8 * doubles}`);
  }
  const read = (start: number, count: number): Float64Array => {
    const out = new Float64Array(count);
    for (let i = 0; i < count; i++) {
      out[i] = view.getFloat64(HEADER_BYTES + 8 * (start + i), true);
    }
    return out;
  };
  return {
    k,
    d,
    covKind,
    priors: read(0, k),
    means: read(k, k * d),
    cov: read(k + k * d, payload),
  };
}
