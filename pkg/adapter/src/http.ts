/** HTTP transport: one frame per POST body, the reply frame is the body. */

import http from "node:http";

import { Session } from "./server.js";

export function serveHttp(session: Session, port: number): http.Server {
  const server = http.createServer((req, res) => {
    if (req.method !== "POST") {
      res.writeHead(405, { "Content-Type": "text/plain" });
      res.end("POST one frame per request\n");
      return;
    }
    let body = "";
    req.setEncoding("utf8");
    req.on("data", (chunk: string) => {
      body += chunk;
    });
    req.on("end", () => {
      const reply = session.handleLine(body.trim());
      res.writeHead(200, { "Content-Type": "application/x-ndjson" });
      res.end(reply + "\n");
    });
  });
  server.listen(port);
  return server;
}
