/** Manifest document written next to the exported stacks. */

export interface ManifestItem {
  index: number;
  file: string;
  shape: number[]; // [layers, tokens, dim]
  tokens: number;
  text: string;
}

export interface SkippedItem {
  index: number;
  reason: string;
  text: string;
}

export interface Manifest {
  model: string;
  dtype: string;
  layerIndices: number[];
  items: ManifestItem[];
  skipped: SkippedItem[];
}

export function emptyManifest(model: string, dtype: string, layerIndices: number[]): Manifest {
  return { model, dtype, layerIndices, items: [], skipped: [] };
}

export function preview(text: string, limit = 80): string {
  return text.length <= limit ? text : text.slice(0, limit) + '…';
}
