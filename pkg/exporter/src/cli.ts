/**
 * stack-export: run a named frozen encoder over text inputs and write one
 * L x N x D NPY stack per input line plus a JSON manifest.
 *
 * Exit codes: 0 success, 2 usage/input error, 1 model/fetch error.
 */

import { mkdirSync, readFileSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';
import process from 'node:process';

import { encodeText, type EncodedStack } from './hashEncoder.js';
import { encodeWithHub } from './hub.js';
import { emptyManifest, preview } from './manifest.js';
import { serializeNpy, type NpyDtype } from './npy.js';

const USAGE = `usage: stack-export --input <text-file> --out-dir <dir> [options]
  --model <id>            encoder: 'local:hash' (default) or a hub model id
  --dtype <f8|f4>         payload precision (default f8)
  --dim <int>             embedding width for local:hash (default 32)
  --layers <int>          layer count for local:hash (default 4)
  --capture-layers <csv>  subset of layer indices to keep (default all)
  --max-tokens <int>      skip inputs longer than this (default 512)`;

interface Args {
  model: string;
  input: string;
  outDir: string;
  dtype: NpyDtype;
  dim: number;
  layers: number;
  captureLayers: number[] | null;
  maxTokens: number;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    model: 'local:hash',
    input: '',
    outDir: '',
    dtype: '<f8',
    dim: 32,
    layers: 4,
    captureLayers: null,
    maxTokens: 512,
  };
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (value === undefined) throw new Error(`missing value for ${flag}`);
    switch (flag) {
      case '--model':
        args.model = value;
        break;
      case '--input':
        args.input = value;
        break;
      case '--out-dir':
        args.outDir = value;
        break;
      case '--dtype':
        if (value !== 'f8' && value !== 'f4') throw new Error(`--dtype must be f8 or f4, got ${value}`);
        args.dtype = value === 'f8' ? '<f8' : '<f4';
        break;
      case '--dim':
        args.dim = parsePositive(flag, value);
        break;
      case '--layers':
        args.layers = parsePositive(flag, value);
        break;
      case '--capture-layers':
        args.captureLayers = value.split(',').map((v) => parsePositive('--capture-layers', v, 0));
        break;
      case '--max-tokens':
        args.maxTokens = parsePositive(flag, value);
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!args.input || !args.outDir) throw new Error('--input and --out-dir are required');
  return args;
}

function parsePositive(flag: string, value: string, min = 1): number {
  const n = Number(value);
  if (!Number.isInteger(n) || n < min) throw new Error(`${flag} expects an integer >= ${min}, got ${value}`);
  return n;
}

function selectLayers(stack: EncodedStack, capture: number[] | null): EncodedStack {
  if (capture === null) return stack;
  const [layers, n, dim] = stack.shape;
  for (const idx of capture) {
    if (idx >= layers) throw new Error(`capture layer ${idx} out of range (model has ${layers})`);
  }
  const data = new Float64Array(capture.length * n * dim);
  capture.forEach((src, dst) => {
    data.set(stack.data.subarray(src * n * dim, (src + 1) * n * dim), dst * n * dim);
  });
  return { data, shape: [capture.length, n, dim], tokens: stack.tokens };
}

export async function run(argv: string[]): Promise<number> {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`stack-export: ${(err as Error).message}\n${USAGE}`);
    return 2;
  }

  let lines: string[];
  try {
    lines = readFileSync(args.input, 'utf-8')
      .split('\n')
      .map((l) => l.trim())
      .filter((l) => l.length > 0);
  } catch (err) {
    console.error(`stack-export: cannot read ${args.input}: ${(err as Error).message}`);
    return 2;
  }

  mkdirSync(args.outDir, { recursive: true });
  const layerIndices =
    args.captureLayers ?? Array.from({ length: args.model === 'local:hash' ? args.layers : 1 }, (_, i) => i);
  const manifest = emptyManifest(args.model, args.dtype, layerIndices);

  for (const [index, text] of lines.entries()) {
    let stack: EncodedStack;
    try {
      if (args.model === 'local:hash') {
        const full = encodeText(text, { dim: args.dim, layers: args.layers });
        if (full.shape[1] > args.maxTokens) {
          manifest.skipped.push({ index, reason: `token overflow (${full.shape[1]} > ${args.maxTokens})`, text: preview(text) });
          continue;
        }
        stack = selectLayers(full, args.captureLayers);
      } else {
        stack = await encodeWithHub(args.model, text);
      }
    } catch (err) {
      const message = (err as Error).message;
      if (message.includes('no tokens')) {
        manifest.skipped.push({ index, reason: 'empty after tokenization', text: preview(text) });
        continue;
      }
      console.error(`stack-export: ${message}`);
      return 1;
    }
    const file = `item_${String(index).padStart(3, '0')}.npy`;
    writeFileSync(join(args.outDir, file), serializeNpy(stack.data, stack.shape, args.dtype));
    manifest.items.push({
      index,
      file,
      shape: stack.shape,
      tokens: stack.shape[1],
      text: preview(text),
    });
  }

  writeFileSync(join(args.outDir, 'manifest.json'), JSON.stringify(manifest, null, 2) + '\n');
  console.log(`exported ${manifest.items.length} stack(s) to ${args.outDir} (${manifest.skipped.length} skipped)`);
  return 0;
}

const invokedDirectly = process.argv[1]?.endsWith('cli.js') || process.argv[1]?.endsWith('stack-export');
if (invokedDirectly) {
  run(process.argv.slice(2)).then(
    (code) => process.exit(code),
    (err) => {
      console.error(`stack-export: ${err}`);
      process.exit(1);
    }
  );
}
