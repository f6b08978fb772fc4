#!/usr/bin/env node
/** Command line entry: configure the adapter and serve one transport. */

import { parseArgs } from "node:util";

import { ConfigError, resolveConfig } from "./config.js";
import { serveHttp } from "./http.js";
import { DualEncoder } from "./model.js";
import { Session } from "./server.js";
import { serveStdio } from "./stdio.js";
import { Tokenizer } from "./tokenizer.js";

function main(): void {
  let values: Record<string, string | undefined>;
  try {
    values = parseArgs({
      options: {
        model: { type: "string" },
        device: { type: "string" },
        "mask-token-id": { type: "string" },
        transport: { type: "string" },
        port: { type: "string" },
        "batch-limit": { type: "string" },
        "score-type": { type: "string" },
      },
    }).values;
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    process.exit(2);
  }

  const tokenizer = new Tokenizer();
  let config;
  try {
    config = resolveConfig(
      {
        model: values["model"],
        device: values["device"],
        maskTokenId: values["mask-token-id"],
        transport: values["transport"],
        port: values["port"],
        batchLimit: values["batch-limit"],
        scoreType: values["score-type"],
      },
      tokenizer
    );
  } catch (err) {
    if (err instanceof ConfigError) {
      process.stderr.write(`${err.message}\n`);
      process.exit(2);
    }
    throw err;
  }

  const session = new Session(config, tokenizer, new DualEncoder(config.modelId));
  // stdout carries protocol frames; diagnostics go to stderr only.
  if (config.transport === "http") {
    serveHttp(session, config.port);
    process.stderr.write(`adapter ${config.modelId} listening on port ${config.port}\n`);
  } else {
    process.stderr.write(`adapter ${config.modelId} ready on stdio\n`);
    serveStdio(session);
  }
}

main();
