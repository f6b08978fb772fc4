import { ChildProcessWithoutNullStreams, spawn } from "node:child_process";
import readline from "node:readline";
import { fileURLToPath } from "node:url";

import { afterEach, describe, expect, it } from "vitest";

const CLI = fileURLToPath(new URL("../dist/cli.js", import.meta.url));
const FIXTURE = fileURLToPath(new URL("fixtures/grad_96x64.png", import.meta.url));

let children: ChildProcessWithoutNullStreams[] = [];

afterEach(() => {
  for (const child of children) {
    child.kill();
  }
  children = [];
});

function start(...args: string[]): ChildProcessWithoutNullStreams {
  const child = spawn(process.execPath, [CLI, ...args], {
    stdio: ["pipe", "pipe", "pipe"],
  });
  children.push(child);
  return child;
}

function rpc(
  child: ChildProcessWithoutNullStreams,
  lines: AsyncIterableIterator<string>,
  frame: unknown
): Promise<Record<string, unknown>> {
  child.stdin.write(JSON.stringify(frame) + "\n");
  return lines.next().then((result) => {
    expect(result.done).toBe(false);
    return JSON.parse(result.value as string);
  });
}

function exitCode(child: ChildProcessWithoutNullStreams): Promise<number | null> {
  return new Promise((resolve) => child.on("exit", (code) => resolve(code)));
}

const REGISTER = {
  type: "register",
  sample: {
    sample_id: "demo::caption",
    tokens: [
      { index: 0, modality: "text", maskable: false, label: "[CLS]", payload_ref: null },
      { index: 1, modality: "text", maskable: true, label: "a", payload_ref: null },
      { index: 2, modality: "text", maskable: true, label: "red", payload_ref: null },
      { index: 3, modality: "text", maskable: true, label: "kite", payload_ref: null },
      { index: 4, modality: "text", maskable: false, label: "[SEP]", payload_ref: null },
      { index: 5, modality: "image", maskable: true, label: "patch[0,0]", payload_ref: [0, 0, 48, 32] },
      { index: 6, modality: "image", maskable: true, label: "patch[0,1]", payload_ref: [48, 0, 96, 32] },
      { index: 7, modality: "image", maskable: true, label: "patch[1,0]", payload_ref: [0, 32, 48, 64] },
      { index: 8, modality: "image", maskable: true, label: "patch[1,1]", payload_ref: [48, 32, 96, 64] },
    ],
    metadata: {},
  },
  assets: { image_path: FIXTURE, text: "a red kite" },
};

describe("stdio transport", () => {
  it("serves handshake, registration, and evaluation", async () => {
    const child = start("--batch-limit", "2");
    const lines = readline.createInterface({ input: child.stdout })[
      Symbol.asyncIterator
    ]();

    const ready = await rpc(child, lines, { type: "hello", protocol: 1 });
    expect(ready).toEqual({ type: "ready", batch_limit: 2, score_type: "unbounded" });

    const registered = await rpc(child, lines, REGISTER);
    expect(registered["type"]).toBe("registered");
    expect(Array.isArray(registered["realized_tokens"])).toBe(true);

    const values = await rpc(child, lines, {
      type: "eval",
      requests: [
        { request_id: 1, sample_id: "demo::caption", mask: "1ff" },
        { request_id: 2, sample_id: "demo::caption", mask: "1fb" },
      ],
    });
    expect(values["type"]).toBe("values");
    const responses = values["responses"] as { request_id: number; value: number }[];
    expect(responses.map((r) => r.request_id)).toEqual([1, 2]);
    for (const response of responses) {
      expect(Number.isFinite(response.value)).toBe(true);
    }
  });

  it("exits with status 2 on a device this build lacks", async () => {
    const child = start("--device", "cuda");
    expect(await exitCode(child)).toBe(2);
  });

  it("exits with status 2 on an unknown transport", async () => {
    const child = start("--transport", "smoke-signals");
    expect(await exitCode(child)).toBe(2);
  });

  it("exits with status 2 on a mask token outside the vocabulary", async () => {
    const child = start("--mask-token-id", "999999");
    expect(await exitCode(child)).toBe(2);
  });
});

describe("http transport", () => {
  async function post(port: number, frame: unknown): Promise<Record<string, unknown>> {
    const response = await fetch(`http://127.0.0.1:${port}/`, {
      method: "POST",
      headers: { "Content-Type": "application/x-ndjson" },
      body: JSON.stringify(frame) + "\n",
    });
    expect(response.status).toBe(200);
    return JSON.parse(await response.text());
  }

  async function waitForListen(child: ChildProcessWithoutNullStreams): Promise<void> {
    await new Promise<void>((resolve, reject) => {
      let stderr = "";
      child.stderr.setEncoding("utf8");
      child.stderr.on("data", (chunk: string) => {
        stderr += chunk;
        if (stderr.includes("listening")) {
          resolve();
        }
      });
      child.on("exit", () => reject(new Error(`adapter exited: ${stderr}`)));
    });
  }

  it("answers one frame per POST", async () => {
    const port = 18976;
    const child = start("--transport", "http", "--port", String(port));
    await waitForListen(child);

    const ready = await post(port, { type: "hello", protocol: 1 });
    expect(ready).toEqual({ type: "ready", batch_limit: 1, score_type: "unbounded" });

    const registered = await post(port, REGISTER);
    expect(registered["type"]).toBe("registered");

    const values = await post(port, {
      type: "eval",
      requests: [{ request_id: 1, sample_id: "demo::caption", mask: "1ff" }],
    });
    expect(values["type"]).toBe("values");

    const error = await post(port, {
      type: "eval",
      requests: [{ request_id: 2, sample_id: "ghost::caption", mask: "1" }],
    });
    expect(error["code"]).toBe("unknown_sample");
  });
});
