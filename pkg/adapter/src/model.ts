/**
 * Deterministic stand-in for a contrastive image-text dual encoder.
 *
 * Token embeddings and the image projection matrix are derived from
 * hash streams seeded by the model identifier, so the "weights" are
 * fixed by the id alone: no downloads, no files, no run-to-run drift.
 * The alignment score is the cosine similarity of the pooled,
 * normalized text and image embeddings, the scoring rule of a dual
 * encoder.
 */

import { HashStream } from "./hash.js";
import { DecodedImage, imageFeatures } from "./image.js";

export const EMBED_DIM = 64;

export class DualEncoder {
  readonly modelId: string;
  private tokenVectors = new Map<number, Float64Array>();
  private projection: Float64Array[] | null = null;

  constructor(modelId: string) {
    this.modelId = modelId;
  }

  private tokenVector(id: number): Float64Array {
    let vec = this.tokenVectors.get(id);
    if (vec === undefined) {
      vec = new HashStream(`${this.modelId}|token|${id}`).fill(
        new Float64Array(EMBED_DIM)
      );
      this.tokenVectors.set(id, vec);
    }
    return vec;
  }

  /** Mean-pooled token embeddings, L2 normalized. */
  embedText(ids: readonly number[]): Float64Array {
    const out = new Float64Array(EMBED_DIM);
    for (const id of ids) {
      const vec = this.tokenVector(id);
      for (let d = 0; d < EMBED_DIM; d++) {
        out[d] += vec[d];
      }
    }
    if (ids.length > 0) {
      for (let d = 0; d < EMBED_DIM; d++) {
        out[d] /= ids.length;
      }
    }
    return normalize(out);
  }

  /** Random projection of the feature grid, L2 normalized. */
  embedImage(image: DecodedImage): Float64Array {
    const features = imageFeatures(image);
    const rows = this.projectionRows(features.length);
    const out = new Float64Array(EMBED_DIM);
    for (let d = 0; d < EMBED_DIM; d++) {
      const row = rows[d];
      let sum = 0;
      for (let k = 0; k < features.length; k++) {
        sum += row[k] * features[k];
      }
      out[d] = sum;
    }
    return normalize(out);
  }

  private projectionRows(width: number): Float64Array[] {
    if (this.projection === null) {
      this.projection = [];
      for (let d = 0; d < EMBED_DIM; d++) {
        this.projection.push(
          new HashStream(`${this.modelId}|proj|${d}`).fill(new Float64Array(width))
        );
      }
    }
    return this.projection;
  }

  /** Cosine similarity in [-1, 1]; 0 when either embedding is all zero. */
  score(ids: readonly number[], image: DecodedImage): number {
    const t = this.embedText(ids);
    const v = this.embedImage(image);
    let dot = 0;
    for (let d = 0; d < EMBED_DIM; d++) {
      dot += t[d] * v[d];
    }
    return dot;
  }
}

function normalize(vec: Float64Array): Float64Array {
  let sq = 0;
  for (let d = 0; d < vec.length; d++) {
    sq += vec[d] * vec[d];
  }
  const norm = Math.sqrt(sq);
  if (norm === 0) {
    return vec;
  }
  for (let d = 0; d < vec.length; d++) {
    vec[d] /= norm;
  }
  return vec;
}
