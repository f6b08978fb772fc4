/**
 * Deterministic subword tokenizer for the stand-in dual encoder.
 *
 * Five fixed special tokens own ids 0..4; every other piece hashes into
 * a closed id range (a hashing-trick vocabulary), so any caption
 * tokenizes without a vocabulary file and the same text always yields
 * the same ids.  Long words split into fixed-width chunks; pieces after
 * the first carry a "##" continuation prefix.
 */

import { fnv1a32 } from "./hash.js";

export interface RealizedToken {
  label: string;
  special: boolean;
}

export interface Encoded {
  ids: number[];
  realized: RealizedToken[];
}

const SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];
const HASHED_IDS = 8192;
// Words up to MAX_SINGLE characters stay whole; longer ones split into
// CHUNK-character pieces.
const MAX_SINGLE = 5;
const CHUNK = 4;

export class Tokenizer {
  readonly vocabSize = SPECIALS.length + HASHED_IDS;

  idOf(special: string): number {
    const id = SPECIALS.indexOf(special);
    if (id < 0) {
      throw new Error(`not a special token: ${special}`);
    }
    return id;
  }

  get maskTokenId(): number {
    return this.idOf("[MASK]");
  }

  hasId(id: number): boolean {
    return Number.isInteger(id) && id >= 0 && id < this.vocabSize;
  }

  /** NFKC, lowercase, punctuation separated into its own tokens. */
  private words(text: string): string[] {
    const flat = text
      .normalize("NFKC")
      .toLowerCase()
      .replace(/(\p{P})/gu, " $1 ");
    return flat.split(/\s+/).filter((word) => word.length > 0);
  }

  private pieces(word: string): string[] {
    if (word.length <= MAX_SINGLE) {
      return [word];
    }
    const out = [word.slice(0, CHUNK)];
    for (let start = CHUNK; start < word.length; start += CHUNK) {
      out.push("##" + word.slice(start, start + CHUNK));
    }
    return out;
  }

  private pieceId(piece: string): number {
    return SPECIALS.length + (fnv1a32(piece) % HASHED_IDS);
  }

  encode(text: string): Encoded {
    const ids = [this.idOf("[CLS]")];
    const realized: RealizedToken[] = [{ label: "[CLS]", special: true }];
    for (const word of this.words(text)) {
      for (const piece of this.pieces(word)) {
        ids.push(this.pieceId(piece));
        realized.push({ label: piece, special: false });
      }
    }
    ids.push(this.idOf("[SEP]"));
    realized.push({ label: "[SEP]", special: true });
    return { ids, realized };
  }
}
