/** Adapter configuration: defaults, parsing, and validation. */

import { Tokenizer } from "./tokenizer.js";

export class ConfigError extends Error {}

export interface AdapterConfig {
  modelId: string;
  device: "cpu";
  maskTokenId: number;
  transport: "stdio" | "http";
  port: number;
  batchLimit: number;
  scoreType: "unbounded" | "probability";
}

export interface RawOptions {
  model?: string;
  device?: string;
  maskTokenId?: string;
  transport?: string;
  port?: string;
  batchLimit?: string;
  scoreType?: string;
}

function parseIntAtLeast(text: string, flag: string, floor: number): number {
  const value = Number(text);
  if (!Number.isInteger(value) || value < floor) {
    throw new ConfigError(`${flag} must be an integer >= ${floor}, got ${text}`);
  }
  return value;
}

export function resolveConfig(raw: RawOptions, tokenizer: Tokenizer): AdapterConfig {
  const device = raw.device ?? "cpu";
  if (device !== "cpu") {
    throw new ConfigError(`device ${device} is not available; this build is cpu-only`);
  }
  const transport = raw.transport ?? "stdio";
  if (transport !== "stdio" && transport !== "http") {
    throw new ConfigError(`transport must be stdio or http, got ${transport}`);
  }
  const scoreType = raw.scoreType ?? "unbounded";
  if (scoreType !== "unbounded" && scoreType !== "probability") {
    throw new ConfigError(`score type must be unbounded or probability, got ${scoreType}`);
  }
  const maskTokenId =
    raw.maskTokenId === undefined
      ? tokenizer.maskTokenId
      : parseIntAtLeast(raw.maskTokenId, "--mask-token-id", 0);
  if (!tokenizer.hasId(maskTokenId)) {
    throw new ConfigError(
      `mask token id ${maskTokenId} is outside the tokenizer vocabulary ` +
        `(size ${tokenizer.vocabSize})`
    );
  }
  const batchLimit =
    raw.batchLimit === undefined
      ? 1
      : parseIntAtLeast(raw.batchLimit, "--batch-limit", 1);
  const port = raw.port === undefined ? 8976 : parseIntAtLeast(raw.port, "--port", 1);
  if (port > 65535) {
    throw new ConfigError(`--port must be at most 65535, got ${port}`);
  }
  return {
    modelId: raw.model ?? "dual-encoder-base",
    device: "cpu",
    maskTokenId,
    transport,
    port,
    batchLimit,
    scoreType,
  };
}
