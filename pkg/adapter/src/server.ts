/**
 * Protocol session: one JSON frame in, one JSON frame out.
 *
 * Frames, matching the engine side byte for byte:
 *
 *   {"type":"hello","protocol":1}
 *     -> {"type":"ready","batch_limit":B,"score_type":T}
 *   {"type":"register","sample":{...},"assets":{...}}
 *     -> {"type":"registered","sample_id":S,"realized_tokens":[...]}
 *   {"type":"eval","requests":[{"request_id":K,"sample_id":S,"mask":HEX}]}
 *     -> {"type":"values","responses":[{"request_id":K,"value":V}]}
 *   anything failing
 *     -> {"type":"error","code":C,"message":M[,"request_id":K]}
 *
 * Masks are lowercase minimal hex of the token presence bits, token 0 in
 * the least significant bit.  A masked text token has its id replaced by
 * the mask token; a masked image patch has its rectangle zeroed in
 * original pixel space before the model's preprocessing runs.
 */

import { AdapterConfig } from "./config.js";
import {
  DecodedImage,
  ImageDecodeError,
  Rect,
  loadImageAssets,
  zeroPatches,
} from "./image.js";
import { DualEncoder } from "./model.js";
import { RealizedToken, Tokenizer } from "./tokenizer.js";

export const PROTOCOL_VERSION = 1;

/** One sample token flattened to what evaluation needs, in index order. */
type Entry =
  | { modality: "text"; id: number }
  | { modality: "image"; rect: Rect };

interface Registered {
  /**
   * Null until the engine's text tokens equal the realized tokenization.
   * The first registration usually differs (the engine guesses tokens by
   * whitespace); it rebuilds from realized_tokens and registers again.
   */
  entries: Entry[] | null;
  image: DecodedImage;
}

interface Frame {
  [key: string]: unknown;
}

class FrameError extends Error {
  readonly code: string;
  readonly requestId: number | null;

  constructor(code: string, message: string, requestId: number | null = null) {
    super(message);
    this.code = code;
    this.requestId = requestId;
  }
}

export class Session {
  private readonly config: AdapterConfig;
  private readonly tokenizer: Tokenizer;
  private readonly model: DualEncoder;
  private readonly samples = new Map<string, Registered>();

  constructor(config: AdapterConfig, tokenizer: Tokenizer, model: DualEncoder) {
    this.config = config;
    this.tokenizer = tokenizer;
    this.model = model;
  }

  /** One raw input line to one encoded reply line (no trailing newline). */
  handleLine(line: string): string {
    let frame: unknown;
    try {
      frame = JSON.parse(line);
    } catch (err) {
      return encode(
        errorFrame("bad_frame", `frame is not valid JSON: ${(err as Error).message}`)
      );
    }
    return encode(this.handleFrame(frame));
  }

  handleFrame(frame: unknown): Frame {
    if (typeof frame !== "object" || frame === null || Array.isArray(frame)) {
      return errorFrame("bad_frame", "frame is not a JSON object");
    }
    const typed = frame as Frame;
    try {
      switch (typed["type"]) {
        case "hello":
          return this.onHello(typed);
        case "register":
          return this.onRegister(typed);
        case "eval":
          return this.onEval(typed);
        default:
          return errorFrame("bad_frame", `unknown frame type ${String(typed["type"])}`);
      }
    } catch (err) {
      if (err instanceof FrameError) {
        return errorFrame(err.code, err.message, err.requestId);
      }
      if (err instanceof ImageDecodeError) {
        return errorFrame("image_decode_error", err.message);
      }
      return errorFrame("internal_error", (err as Error).message);
    }
  }

  private onHello(frame: Frame): Frame {
    if (frame["protocol"] !== PROTOCOL_VERSION) {
      throw new FrameError(
        "unsupported_protocol",
        `this adapter speaks protocol ${PROTOCOL_VERSION}, got ${String(frame["protocol"])}`
      );
    }
    return {
      type: "ready",
      batch_limit: this.config.batchLimit,
      score_type: this.config.scoreType,
    };
  }

  private onRegister(frame: Frame): Frame {
    const sample = frame["sample"];
    if (typeof sample !== "object" || sample === null) {
      throw new FrameError("bad_register", "register frame lacks a sample object");
    }
    const sampleId = (sample as Frame)["sample_id"];
    if (typeof sampleId !== "string") {
      throw new FrameError("bad_register", "sample lacks a string sample_id");
    }
    const tokens = parseTokens((sample as Frame)["tokens"]);
    const assets = frame["assets"];
    if (typeof assets !== "object" || assets === null) {
      throw new FrameError("bad_register", "register frame lacks assets");
    }
    const text = (assets as Frame)["text"];
    if (typeof text !== "string") {
      throw new FrameError(
        "bad_register",
        "register assets lack the raw text; this adapter tokenizes itself"
      );
    }
    const encoded = this.tokenizer.encode(text);
    const image = loadImageAssets(assets as Record<string, unknown>);
    this.samples.set(sampleId, {
      entries: buildEntries(tokens, encoded.realized, encoded.ids),
      image,
    });
    return {
      type: "registered",
      sample_id: sampleId,
      realized_tokens: encoded.realized,
    };
  }

  private onEval(frame: Frame): Frame {
    const requests = frame["requests"];
    if (!Array.isArray(requests)) {
      throw new FrameError("bad_frame", "eval frame lacks a requests array");
    }
    const responses: { request_id: number; value: number }[] = [];
    for (const raw of requests) {
      const { requestId, sampleId, mask } = parseRequest(raw);
      const registered = this.samples.get(sampleId);
      if (registered === undefined) {
        throw new FrameError("unknown_sample", sampleId, requestId);
      }
      if (registered.entries === null) {
        throw new FrameError(
          "tokenization_mismatch",
          `sample ${sampleId} was registered with engine tokens that do not ` +
            "match the realized tokenization; rebuild from realized_tokens " +
            "and register again",
          requestId
        );
      }
      const bits = parseMask(mask, registered.entries.length, requestId);
      const value = this.evaluateOne(registered.entries, registered.image, bits);
      if (!Number.isFinite(value)) {
        throw new FrameError(
          "non_finite_value",
          `evaluation produced a non-finite value for request ${requestId}`,
          requestId
        );
      }
      responses.push({ request_id: requestId, value });
    }
    return { type: "values", responses };
  }

  private evaluateOne(entries: Entry[], image: DecodedImage, bits: bigint): number {
    const ids: number[] = [];
    const rects: Rect[] = [];
    for (let index = 0; index < entries.length; index++) {
      const entry = entries[index];
      const present = (bits >> BigInt(index)) & 1n;
      if (entry.modality === "text") {
        ids.push(present === 1n ? entry.id : this.config.maskTokenId);
      } else if (present === 0n) {
        rects.push(entry.rect);
      }
    }
    const masked = rects.length > 0 ? zeroPatches(image, rects) : image;
    const cosine = this.model.score(ids, masked);
    return this.config.scoreType === "probability" ? (1 + cosine) / 2 : cosine;
  }
}

function encode(frame: Frame): string {
  return JSON.stringify(frame);
}

function errorFrame(code: string, message: string, requestId: number | null = null): Frame {
  const frame: Frame = { type: "error", code, message };
  if (requestId !== null) {
    frame["request_id"] = requestId;
  }
  return frame;
}

interface SampleToken {
  modality: string;
  maskable: boolean;
  label: string;
  payload_ref: unknown;
}

function parseTokens(raw: unknown): SampleToken[] {
  if (!Array.isArray(raw) || raw.length === 0) {
    throw new FrameError("bad_register", "sample lacks a non-empty tokens array");
  }
  const tokens: SampleToken[] = [];
  for (const item of raw) {
    const token = item as Frame;
    const index = token["index"];
    const modality = token["modality"];
    const label = token["label"];
    if (typeof index !== "number" || typeof modality !== "string" || typeof label !== "string") {
      throw new FrameError("bad_register", `malformed token entry ${JSON.stringify(item)}`);
    }
    if (index !== tokens.length) {
      throw new FrameError(
        "bad_register",
        `token indices must be contiguous from 0, got ${index} at position ${tokens.length}`
      );
    }
    tokens.push({
      modality,
      maskable: token["maskable"] === true,
      label,
      payload_ref: token["payload_ref"],
    });
  }
  return tokens;
}

/**
 * Evaluation entries in token-index order, or null when the engine's
 * text tokens do not yet match the realized tokenization.  Image tokens
 * must carry their patch rectangle either way.
 */
function buildEntries(
  tokens: SampleToken[],
  realized: RealizedToken[],
  ids: number[]
): Entry[] | null {
  const text = tokens.filter((t) => t.modality === "text");
  let match = text.length === realized.length;
  for (let i = 0; match && i < text.length; i++) {
    match =
      text[i].label === realized[i].label &&
      !text[i].maskable === realized[i].special;
  }
  const entries: Entry[] = [];
  let textPos = 0;
  for (const token of tokens) {
    if (token.modality === "text") {
      entries.push({ modality: "text", id: ids[textPos] ?? 0 });
      textPos++;
    } else {
      entries.push({ modality: "image", rect: parseRect(token.payload_ref) });
    }
  }
  return match ? entries : null;
}

function parseRequest(raw: unknown): { requestId: number; sampleId: string; mask: string } {
  const frame = raw as Frame;
  const requestId = frame?.["request_id"];
  const sampleId = frame?.["sample_id"];
  const mask = frame?.["mask"];
  if (typeof requestId !== "number" || typeof sampleId !== "string" || typeof mask !== "string") {
    throw new FrameError("bad_frame", `malformed eval request ${JSON.stringify(raw)}`);
  }
  return { requestId, sampleId, mask };
}

function parseMask(mask: string, nTokens: number, requestId: number): bigint {
  if (!/^[0-9a-f]+$/.test(mask)) {
    throw new FrameError("bad_mask", `invalid mask hex ${mask}`, requestId);
  }
  const bits = BigInt("0x" + mask);
  if (bits >= 1n << BigInt(nTokens)) {
    throw new FrameError(
      "bad_mask",
      `mask ${mask} does not fit a ${nTokens}-token sample`,
      requestId
    );
  }
  return bits;
}

function parseRect(payload: unknown): Rect {
  if (
    !Array.isArray(payload) ||
    payload.length !== 4 ||
    payload.some((v) => typeof v !== "number" || !Number.isInteger(v))
  ) {
    throw new FrameError(
      "bad_register",
      `image token carries no patch rectangle: ${JSON.stringify(payload)}`
    );
  }
  return [payload[0], payload[1], payload[2], payload[3]] as const;
}
