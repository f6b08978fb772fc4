/** Line-buffered stdio transport: one frame per line, replies on stdout. */

import { Session } from "./server.js";

export function serveStdio(session: Session): void {
  let buffer = "";
  process.stdin.setEncoding("utf8");
  process.stdin.on("data", (chunk: string) => {
    buffer += chunk;
    let index = buffer.indexOf("\n");
    while (index >= 0) {
      const line = buffer.slice(0, index).trim();
      buffer = buffer.slice(index + 1);
      if (line.length > 0) {
        process.stdout.write(session.handleLine(line) + "\n");
      }
      index = buffer.indexOf("\n");
    }
  });
  process.stdin.on("end", () => {
    process.exit(0);
  });
}
