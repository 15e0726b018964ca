/**
 * Minimal NPY v1.0 serializer (plus a reader used by the tests).
 *
 * The byte layout matches the consumer exactly: \x93NUMPY magic, version
 * 1.0, little-endian u16 header length, a Python dict literal header
 * ({'descr': '<f8', 'fortran_order': False, 'shape': (2, 3), }) padded
 * with spaces so the whole preamble is a multiple of 64 bytes, then the
 * raw little-endian payload. Only '<f4'/'<f8', C order, 1-4 dims.
 */

const MAGIC = Uint8Array.from([0x93, 0x4e, 0x55, 0x4d, 0x50, 0x59]); // \x93NUMPY

export type NpyDtype = '<f4' | '<f8';

function headerLiteral(dtype: NpyDtype, shape: number[]): string {
  const dims = shape.length === 1 ? `(${shape[0]},)` : `(${shape.join(', ')})`;
  return `{'descr': '${dtype}', 'fortran_order': False, 'shape': ${dims}, }`;
}

export function serializeNpy(data: Float64Array, shape: number[], dtype: NpyDtype = '<f8'): Uint8Array {
  if (shape.length < 1 || shape.length > 4) {
    throw new Error(`shape must have 1-4 dims, got ${shape.length}`);
  }
  const count = shape.reduce((a, b) => a * b, 1);
  if (count !== data.length) {
    throw new Error(`shape ${JSON.stringify(shape)} does not match ${data.length} values`);
  }
  let header = headerLiteral(dtype, shape);
  const base = MAGIC.length + 2 + 2; // magic + version + header length field
  let pad = 64 - ((base + header.length + 1) % 64);
  if (pad === 64) pad = 0;
  header = header + ' '.repeat(pad) + '\n';

  const itemSize = dtype === '<f8' ? 8 : 4;
  const out = new Uint8Array(base + header.length + count * itemSize);
  out.set(MAGIC, 0);
  out[6] = 1; // version 1.0
  out[7] = 0;
  const view = new DataView(out.buffer);
  view.setUint16(8, header.length, true);
  for (let i = 0; i < header.length; i++) {
    out[10 + i] = header.charCodeAt(i);
  }
  const payloadStart = base + header.length;
  if (dtype === '<f8') {
    for (let i = 0; i < count; i++) {
      view.setFloat64(payloadStart + 8 * i, data[i], true);
    }
  } else {
    for (let i = 0; i < count; i++) {
      view.setFloat32(payloadStart + 4 * i, Math.fround(data[i]), true);
    }
  }
  return out;
}

export interface ParsedNpy {
  dtype: NpyDtype;
  shape: number[];
  data: Float64Array;
}

export function parseNpy(bytes: Uint8Array): ParsedNpy {
  for (let i = 0; i < MAGIC.length; i++) {
    if (bytes[i] !== MAGIC[i]) throw new Error('missing NPY magic');
  }
  if (bytes[6] !== 1 || bytes[7] !== 0) {
    throw new Error(`unsupported NPY version ${bytes[6]}.${bytes[7]}`);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const headerLen = view.getUint16(8, true);
  const header = new TextDecoder('latin1').decode(bytes.subarray(10, 10 + headerLen));
  const descr = /'descr':\s*'([^']+)'/.exec(header)?.[1];
  const fortran = /'fortran_order':\s*(True|False)/.exec(header)?.[1];
  const shapeText = /'shape':\s*\(([^)]*)\)/.exec(header)?.[1];
  if (descr !== '<f4' && descr !== '<f8') throw new Error(`unsupported dtype ${descr}`);
  if (fortran !== 'False') throw new Error('fortran order not supported');
  const shape = (shapeText ?? '')
    .split(',')
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map(Number);
  const count = shape.reduce((a, b) => a * b, 1);
  const start = 10 + headerLen;
  const itemSize = descr === '<f8' ? 8 : 4;
  if (bytes.length - start !== count * itemSize) {
    throw new Error(`payload is ${bytes.length - start} bytes, expected ${count * itemSize}`);
  }
  const data = new Float64Array(count);
  for (let i = 0; i < count; i++) {
    data[i] =
      descr === '<f8' ? view.getFloat64(start + 8 * i, true) : view.getFloat32(start + 4 * i, true);
  }
  return { dtype: descr, shape, data };
}
