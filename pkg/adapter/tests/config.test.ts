import { describe, expect, it } from "vitest";

import { ConfigError, resolveConfig } from "../src/config.js";
import { Tokenizer } from "../src/tokenizer.js";

const tokenizer = new Tokenizer();

describe("resolveConfig", () => {
  it("fills defaults: cpu, stdio, single-request batches, mask token", () => {
    const config = resolveConfig({}, tokenizer);
    expect(config).toEqual({
      modelId: "dual-encoder-base",
      device: "cpu",
      maskTokenId: tokenizer.maskTokenId,
      transport: "stdio",
      port: 8976,
      batchLimit: 1,
      scoreType: "unbounded",
    });
  });

  it("accepts explicit valid options", () => {
    const config = resolveConfig(
      {
        model: "dual-encoder-large",
        device: "cpu",
        maskTokenId: "0",
        transport: "http",
        port: "9000",
        batchLimit: "32",
        scoreType: "probability",
      },
      tokenizer
    );
    expect(config.modelId).toBe("dual-encoder-large");
    expect(config.maskTokenId).toBe(0);
    expect(config.transport).toBe("http");
    expect(config.port).toBe(9000);
    expect(config.batchLimit).toBe(32);
    expect(config.scoreType).toBe("probability");
  });

  it("rejects a mask token id outside the vocabulary", () => {
    expect(() =>
      resolveConfig({ maskTokenId: String(tokenizer.vocabSize) }, tokenizer)
    ).toThrow(ConfigError);
    expect(() => resolveConfig({ maskTokenId: "-1" }, tokenizer)).toThrow(
      ConfigError
    );
    expect(() => resolveConfig({ maskTokenId: "4.5" }, tokenizer)).toThrow(
      ConfigError
    );
  });

  it("rejects devices this build does not have", () => {
    expect(() => resolveConfig({ device: "cuda" }, tokenizer)).toThrow(
      /cpu-only/
    );
  });

  it("rejects unknown transports and score types", () => {
    expect(() => resolveConfig({ transport: "carrier-pigeon" }, tokenizer)).toThrow(
      ConfigError
    );
    expect(() => resolveConfig({ scoreType: "vibes" }, tokenizer)).toThrow(
      ConfigError
    );
  });

  it("rejects non-positive batch limits and bad ports", () => {
    expect(() => resolveConfig({ batchLimit: "0" }, tokenizer)).toThrow(ConfigError);
    expect(() => resolveConfig({ batchLimit: "two" }, tokenizer)).toThrow(ConfigError);
    expect(() => resolveConfig({ port: "70000" }, tokenizer)).toThrow(ConfigError);
  });
});
