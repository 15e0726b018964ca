import assert from 'node:assert/strict';
import { execFileSync } from 'node:child_process';
import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join, dirname } from 'node:path';
import { fileURLToPath } from 'node:url';
import { test } from 'node:test';

import { parseNpy } from './npy.js';

const CLI = join(dirname(fileURLToPath(import.meta.url)), 'cli.js');

function runCli(args: string[]): { code: number; stdout: string; stderr: string } {
  try {
    const stdout = execFileSync('node', [CLI, ...args], { encoding: 'utf-8' });
    return { code: 0, stdout, stderr: '' };
  } catch (err: any) {
    return { code: err.status ?? 1, stdout: err.stdout ?? '', stderr: err.stderr ?? '' };
  }
}

function freshDir(): string {
  return mkdtempSync(join(tmpdir(), 'stack-export-'));
}

test('exports one stack per input line with a matching manifest', () => {
  const dir = freshDir();
  const input = join(dir, 'input.txt');
  writeFileSync(input, 'the quick brown fox\nhello world\n');
  const out = join(dir, 'export');
  const result = runCli(['--input', input, '--out-dir', out, '--dim', '8', '--layers', '3']);
  assert.equal(result.code, 0, result.stderr);
  const manifest = JSON.parse(readFileSync(join(out, 'manifest.json'), 'utf-8'));
  assert.equal(manifest.model, 'local:hash');
  assert.equal(manifest.items.length, 2);
  for (const item of manifest.items) {
    const parsed = parseNpy(readFileSync(join(out, item.file)));
    assert.deepEqual(parsed.shape, item.shape);
    assert.equal(parsed.shape.length, 3);
  }
  assert.deepEqual(manifest.items[0].shape, [3, 4, 8]);
});

test('empty input list produces an empty manifest and exit 0', () => {
  const dir = freshDir();
  const input = join(dir, 'empty.txt');
  writeFileSync(input, '\n\n');
  const out = join(dir, 'export');
  const result = runCli(['--input', input, '--out-dir', out]);
  assert.equal(result.code, 0, result.stderr);
  const manifest = JSON.parse(readFileSync(join(out, 'manifest.json'), 'utf-8'));
  assert.deepEqual(manifest.items, []);
});

test('token overflow is recorded as a per-item skip', () => {
  const dir = freshDir();
  const input = join(dir, 'long.txt');
  writeFileSync(input, 'one two three four five\nshort one\n');
  const out = join(dir, 'export');
  const result = runCli(['--input', input, '--out-dir', out, '--max-tokens', '3']);
  assert.equal(result.code, 0, result.stderr);
  const manifest = JSON.parse(readFileSync(join(out, 'manifest.json'), 'utf-8'));
  assert.equal(manifest.items.length, 1);
  assert.equal(manifest.skipped.length, 1);
  assert.match(manifest.skipped[0].reason, /token overflow/);
});

test('capture-layers subsets the stack', () => {
  const dir = freshDir();
  const input = join(dir, 'input.txt');
  writeFileSync(input, 'alpha beta gamma\n');
  const out = join(dir, 'export');
  const result = runCli([
    '--input', input, '--out-dir', out, '--layers', '4', '--dim', '6', '--capture-layers', '0,3',
  ]);
  assert.equal(result.code, 0, result.stderr);
  const manifest = JSON.parse(readFileSync(join(out, 'manifest.json'), 'utf-8'));
  assert.deepEqual(manifest.layerIndices, [0, 3]);
  assert.deepEqual(manifest.items[0].shape, [2, 3, 6]);
});

test('f4 exports parse with float32 values', () => {
  const dir = freshDir();
  const input = join(dir, 'input.txt');
  writeFileSync(input, 'alpha beta\n');
  const out = join(dir, 'export');
  const result = runCli(['--input', input, '--out-dir', out, '--dtype', 'f4', '--dim', '4', '--layers', '2']);
  assert.equal(result.code, 0, result.stderr);
  const manifest = JSON.parse(readFileSync(join(out, 'manifest.json'), 'utf-8'));
  const parsed = parseNpy(readFileSync(join(out, manifest.items[0].file)));
  assert.equal(parsed.dtype, '<f4');
});

test('missing flags exit 2 with usage', () => {
  const result = runCli(['--input', 'nowhere.txt']);
  assert.equal(result.code, 2);
  assert.match(result.stderr, /usage/);
});

test('unreadable input exits 2', () => {
  const result = runCli(['--input', '/nonexistent/input.txt', '--out-dir', freshDir()]);
  assert.equal(result.code, 2);
});

test('unavailable hub model reports a clear fetch error', () => {
  const dir = freshDir();
  const input = join(dir, 'input.txt');
  writeFileSync(input, 'hello there\n');
  const result = runCli(['--input', input, '--out-dir', join(dir, 'out'), '--model', 'org/unavailable-model']);
  assert.equal(result.code, 1);
  assert.match(result.stderr, /@huggingface\/transformers|could not fetch/);
});

test('identical runs produce byte-identical stacks', () => {
  const dir = freshDir();
  const input = join(dir, 'input.txt');
  writeFileSync(input, 'determinism check line\n');
  const outs = ['a', 'b'].map((tag) => {
    const out = join(dir, tag);
    const result = runCli(['--input', input, '--out-dir', out, '--dim', '8', '--layers', '2']);
    assert.equal(result.code, 0, result.stderr);
    return readFileSync(join(out, 'item_000.npy'));
  });
  assert.deepEqual([...outs[0]], [...outs[1]]);
});
