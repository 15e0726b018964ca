/**
 * Hub-backed encoder path. Loaded lazily: the runtime dependency
 * (@huggingface/transformers) is optional, and model downloads need
 * network access, so every failure is surfaced as a clear fetch error
 * rather than a stack trace.
 */

import type { EncodedStack } from './hashEncoder.js';

const HUB_PACKAGE = '@huggingface/transformers';

export async function encodeWithHub(modelId: string, text: string): Promise<EncodedStack> {
  let transformers: any;
  try {
    // non-literal specifier: the package is optional and may be absent
    transformers = await import(HUB_PACKAGE);
  } catch {
    throw new Error(
      `model '${modelId}' needs the optional @huggingface/transformers package; ` +
        'install it or use the built-in local:hash encoder'
    );
  }
  let extractor: any;
  try {
    extractor = await transformers.pipeline('feature-extraction', modelId);
  } catch (err) {
    throw new Error(`could not fetch model '${modelId}': ${(err as Error).message}`);
  }
  const output = await extractor(text, { pooling: 'none' });
  const [n, dim] = output.dims.slice(-2);
  const data = new Float64Array(output.data.length);
  for (let i = 0; i < data.length; i++) data[i] = Number(output.data[i]);
  // token-level last hidden state as a single-layer stack
  return { data, shape: [1, n, dim], tokens: [] };
}
