/**
 * Minimal in-process stand-in for the editing service. It speaks the same
 * HTTP shapes (/health, /models, /edit, /probe, structured error bodies)
 * and records every request so tests can replay the traffic as an oracle.
 *
 * Response images are unique, deterministic tokens, so a test can map any
 * image in a session back to the exact request that produced it.
 */

import { createServer, IncomingMessage, Server, ServerResponse } from "node:http";
import { AddressInfo } from "node:net";

export interface RecordedRequest {
  method: string;
  path: string;
  body: any;
}

export interface StubModel {
  id: string;
  kind: "bucket" | "e2e" | "filterbank" | "identity";
  K: number;
}

interface InjectedError {
  status: number;
  code: string;
  message: string;
}

function token(text: string): string {
  return Buffer.from(text, "utf-8").toString("base64");
}

export class StubService {
  readonly requests: RecordedRequest[] = [];
  readonly models: StubModel[];
  private server: Server | null = null;
  private editCounter = 0;
  private failNext: InjectedError | null = null;

  constructor(models?: StubModel[]) {
    this.models = models ?? [
      { id: "fb-demo", kind: "filterbank", K: 5 },
      { id: "bk-demo", kind: "bucket", K: 5 },
      { id: "e2e-demo", kind: "e2e", K: 1 },
    ];
  }

  /** Make the next /edit or /probe call fail with a structured error. */
  failNextRequest(status: number, code: string, message: string): void {
    this.failNext = { status, code, message };
  }

  async start(): Promise<string> {
    this.server = createServer((req, res) => void this.handle(req, res));
    await new Promise<void>((resolve) => this.server!.listen(0, "127.0.0.1", resolve));
    const { port } = this.server!.address() as AddressInfo;
    return `http://127.0.0.1:${port}`;
  }

  async close(): Promise<void> {
    if (!this.server) return;
    await new Promise<void>((resolve, reject) =>
      this.server!.close((err) => (err ? reject(err) : resolve())),
    );
    this.server = null;
  }

  /** The /edit request that produced the given response image, if any. */
  requestForImage(image: string): RecordedRequest | undefined {
    return this.requests.find(
      (r) => r.path === "/edit" && r.body && token(editPayloadTag(r.body)) === image,
    );
  }

  private async handle(req: IncomingMessage, res: ServerResponse): Promise<void> {
    const path = (req.url ?? "").split("?")[0] ?? "";
    let body: any = null;
    if (req.method === "POST") {
      const chunks: Buffer[] = [];
      for await (const chunk of req) chunks.push(chunk as Buffer);
      try {
        body = JSON.parse(Buffer.concat(chunks).toString("utf-8"));
      } catch {
        return sendError(res, 400, "bad_json", "request body is not valid JSON");
      }
      if (!body || typeof body !== "object") {
        return sendError(res, 400, "bad_request", "request body must be a JSON object");
      }
    }
    this.requests.push({ method: req.method ?? "", path, body });

    if (req.method === "GET" && path === "/health") {
      return sendJson(res, 200, { status: "ok" });
    }
    if (req.method === "GET" && path === "/models") {
      return sendJson(res, 200, this.models);
    }
    if (req.method === "POST" && path === "/edit") return this.handleEdit(res, body);
    if (req.method === "POST" && path === "/probe") return this.handleProbe(res, body);
    return sendError(res, 404, "not_found", `no route for ${req.method} ${path}`);
  }

  private handleEdit(res: ServerResponse, body: any): void {
    if (this.failNext) {
      const err = this.failNext;
      this.failNext = null;
      return sendError(res, err.status, err.code, err.message);
    }
    const model = this.models.find((m) => m.id === body?.model);
    if (!model) return sendError(res, 404, "unknown_model", `no model named ${body?.model}`);
    if (!body.text) return sendError(res, 400, "invalid_text", "instruction text must be non-empty");
    if (!body.image_base64) return sendError(res, 400, "invalid_image", "no image supplied");
    this.editCounter += 1;
    const image = token(editPayloadTag({ ...body, _n: this.editCounter }));
    // remember which call this was so requestForImage can invert the token
    this.requests[this.requests.length - 1]!.body._n = this.editCounter;
    const weights =
      model.K > 1 ? Array.from({ length: model.K }, (_, i) => (i + 1) / ((model.K * (model.K + 1)) / 2)) : null;
    sendJson(res, 200, {
      image_base64: image,
      weights,
      model: model.id,
      milliseconds: 1.0,
    });
  }

  private handleProbe(res: ServerResponse, body: any): void {
    if (this.failNext) {
      const err = this.failNext;
      this.failNext = null;
      return sendError(res, err.status, err.code, err.message);
    }
    const model = this.models.find((m) => m.id === body?.model);
    if (!model) return sendError(res, 404, "unknown_model", `no model named ${body?.model}`);
    if (model.kind !== "filterbank") {
      return sendError(res, 400, "not_filterbank", `model ${model.id} has no filter bank`);
    }
    const k = body?.k;
    if (typeof k !== "number" || k < 0 || k >= model.K) {
      return sendError(res, 400, "invalid_filter_index", `k=${k} outside 0..${model.K - 1}`);
    }
    sendJson(res, 200, {
      image_base64: token(`probe|${model.id}|${k}|${body.image_base64}`),
      model: model.id,
      k,
    });
  }
}

/** Canonical tag an /edit call is hashed from; includes the call counter. */
function editPayloadTag(body: any): string {
  return `edit|${body.model}|${body._n}|${body.text}|${body.image_base64}`;
}

function sendJson(res: ServerResponse, status: number, payload: unknown): void {
  const data = JSON.stringify(payload);
  res.writeHead(status, { "Content-Type": "application/json" });
  res.end(data);
}

function sendError(res: ServerResponse, status: number, code: string, message: string): void {
  sendJson(res, status, { error: { code, message } });
}
