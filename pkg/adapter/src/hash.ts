/**
 * Deterministic hashing and derived float streams.
 *
 * Everything the stand-in model carries as "weights" is generated from
 * these streams, so identical inputs give identical scores on every run
 * and platform: integer hashing plus IEEE double arithmetic only, no
 * RNG state, no files.
 */

const FNV64_OFFSET = 0xcbf29ce484222325n;
const FNV64_PRIME = 0x100000001b3n;
const MASK64 = 0xffffffffffffffffn;

export function fnv1a64(text: string): bigint {
  const bytes = Buffer.from(text, "utf8");
  let hash = FNV64_OFFSET;
  for (const byte of bytes) {
    hash ^= BigInt(byte);
    hash = (hash * FNV64_PRIME) & MASK64;
  }
  return hash;
}

export function fnv1a32(text: string): number {
  const bytes = Buffer.from(text, "utf8");
  let hash = 0x811c9dc5 >>> 0;
  for (const byte of bytes) {
    hash = (hash ^ byte) >>> 0;
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

/** splitmix64 sequence seeded by the FNV-1a hash of a seed string. */
export class HashStream {
  private state: bigint;

  constructor(seed: string) {
    this.state = fnv1a64(seed);
  }

  nextU64(): bigint {
    this.state = (this.state + 0x9e3779b97f4a7c15n) & MASK64;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
    return z ^ (z >> 31n);
  }

  /** Uniform double in [0, 1) from the top 53 bits. */
  nextUnit(): number {
    return Number(this.nextU64() >> 11n) / 9007199254740992;
  }

  /** Uniform double in [-1, 1). */
  nextSigned(): number {
    return 2 * this.nextUnit() - 1;
  }

  fill(out: Float64Array): Float64Array {
    for (let i = 0; i < out.length; i++) {
      out[i] = this.nextSigned();
    }
    return out;
  }
}
