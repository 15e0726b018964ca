/**
 * Deterministic offline encoder ("local:hash").
 *
 * Each token gets a fixed pseudo-random embedding derived from an FNV-1a
 * hash of its bytes via a splitmix64 stream, and deeper layers apply a
 * fixed neighbor-smoothing pass, so repeated runs (and runs on other
 * machines) produce byte-identical stacks. This is the hermetic stand-in
 * encoder; hub-backed models go through hub.ts.
 */

import { tokenize } from './tokenize.js';

const MASK64 = 0xffffffffffffffffn;
const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const GOLDEN = 0x9e3779b97f4a7c15n;

function fnv1a64(text: string): bigint {
  let h = FNV_OFFSET;
  for (const byte of new TextEncoder().encode(text)) {
    h ^= BigInt(byte);
    h = (h * FNV_PRIME) & MASK64;
  }
  return h;
}

function splitmix64(state: bigint): bigint {
  let z = (state + GOLDEN) & MASK64;
  z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
  z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
  return (z ^ (z >> 31n)) & MASK64;
}

/** Uniform draw in [-1, 1) from the i-th step of a seeded stream. */
function draw(seed: bigint, index: number): number {
  const z = splitmix64((seed + BigInt(index + 1) * GOLDEN) & MASK64);
  return Number(z >> 11n) * 2 ** -52 - 1.0;
}

export function tokenVector(token: string, dim: number): Float64Array {
  const seed = fnv1a64(token);
  const out = new Float64Array(dim);
  for (let j = 0; j < dim; j++) {
    out[j] = draw(seed, j);
  }
  return out;
}

export interface HashEncoderOptions {
  dim: number;
  layers: number;
}

export interface EncodedStack {
  /** Row-major (layers, tokens, dim) values. */
  data: Float64Array;
  shape: [number, number, number];
  tokens: string[];
}

/** One neighbor-smoothing pass: y_i = 0.5 x_i + 0.25 x_{i-1} + 0.25 x_{i+1}. */
function smooth(layer: Float64Array, n: number, dim: number) {
  const out = new Float64Array(layer.length);
  for (let i = 0; i < n; i++) {
    const left = Math.max(i - 1, 0);
    const right = Math.min(i + 1, n - 1);
    for (let j = 0; j < dim; j++) {
      out[i * dim + j] =
        0.5 * layer[i * dim + j] + 0.25 * layer[left * dim + j] + 0.25 * layer[right * dim + j];
    }
  }
  return out;
}

export function encodeText(text: string, opts: HashEncoderOptions): EncodedStack {
  const tokens = tokenize(text);
  const { dim, layers } = opts;
  if (tokens.length === 0) {
    throw new Error('no tokens in input');
  }
  const n = tokens.length;
  const data = new Float64Array(layers * n * dim);
  let current = new Float64Array(n * dim);
  tokens.forEach((tok, i) => current.set(tokenVector(tok, dim), i * dim));
  data.set(current, 0);
  for (let l = 1; l < layers; l++) {
    current = smooth(current, n, dim);
    data.set(current, l * n * dim);
  }
  return { data, shape: [layers, n, dim], tokens };
}
