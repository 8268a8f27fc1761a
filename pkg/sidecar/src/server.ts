/**
 * Request handling and the serve loops.
 *
 * One frame in, one frame out, strictly in order; the client keeps at
 * most one request in flight per session, and parallel clients open
 * parallel sessions. Protocol violations become error frames - the
 * process never exits on bad input. TCP mode serves connections one at
 * a time; models persist across connections, and a shutdown op ends the
 * server.
 */

import * as net from "node:net";

import { BACKENDS, FittedModel } from "./backends";
import {
  FrameReader,
  PROTOCOL_VERSION,
  SidecarError,
  encodeFrame,
  matrixFromWire,
  vectorFromWire,
  vectorToWire,
} from "./wire";

/** Live models keyed by model_id with least-recently-used eviction. */
export class ModelStore {
  private readonly models = new Map<string, FittedModel>();

  constructor(readonly capacity: number = 32) {}

  set(id: string, model: FittedModel): void {
    this.models.delete(id);
    this.models.set(id, model);
    while (this.models.size > this.capacity) {
      const oldest = this.models.keys().next().value as string;
      this.models.delete(oldest);
    }
  }

  /** Lookup counts as use: the entry moves to the fresh end. */
  get(id: string): FittedModel | undefined {
    const model = this.models.get(id);
    if (model !== undefined) {
      this.models.delete(id);
      this.models.set(id, model);
    }
    return model;
  }

  delete(id: string): void {
    this.models.delete(id);
  }

  get size(): number {
    return this.models.size;
  }
}

export interface ServerOptions {
  maxRows: number;
  maxModels: number;
  /** Testing knob: sleep this long before every reply. */
  delayMs: number;
  deterministic: boolean;
  device: string;
}

export const DEFAULT_OPTIONS: ServerOptions = {
  maxRows: 50_000,
  maxModels: 32,
  delayMs: 0,
  deterministic: false,
  device: "cpu",
};

function errorBody(id: unknown, code: string, message: string): Record<string, unknown> {
  return { op: "error", id: id ?? null, code, message };
}

export class RequestHandler {
  readonly store: ModelStore;

  constructor(readonly options: ServerOptions = DEFAULT_OPTIONS) {
    this.store = new ModelStore(options.maxModels);
  }

  /** One response body per request body; never throws. */
  handle(request: unknown): Record<string, unknown> {
    const req = (typeof request === "object" && request !== null ? request : {}) as Record<
      string,
      unknown
    >;
    const id = req.id ?? null;
    try {
      return this.dispatch(req, id);
    } catch (err) {
      if (err instanceof SidecarError) return errorBody(id, err.code, err.message);
      return errorBody(id, "BACKEND_FAILURE", String(err).slice(0, 500));
    }
  }

  private dispatch(req: Record<string, unknown>, id: unknown): Record<string, unknown> {
    const op = req.op;
    if (op === "hello") return this.hello(req, id);
    if (op === "fit") return this.fit(req, id);
    if (op === "predict") return this.predict(req, id);
    if (op === "release") {
      this.store.delete(String(req.model_id));
      return { op: "release", id, model_id: req.model_id ?? null };
    }
    if (op === "shutdown") return { op: "shutdown", id };
    throw new SidecarError("BACKEND_FAILURE", `unknown op ${JSON.stringify(op)}`);
  }

  private hello(req: Record<string, unknown>, id: unknown): Record<string, unknown> {
    if (req.protocol_version !== PROTOCOL_VERSION) {
      throw new SidecarError(
        "VERSION",
        `sidecar speaks protocol ${PROTOCOL_VERSION}, client sent ${JSON.stringify(
          req.protocol_version,
        )}`,
      );
    }
    return {
      op: "hello",
      id,
      protocol_version: PROTOCOL_VERSION,
      capabilities: {
        backends: [...BACKENDS.keys()].sort(),
        missing_values: [...BACKENDS.values()].some((b) => b.supportsMissing),
        max_rows: this.options.maxRows,
      },
    };
  }

  private fit(req: Record<string, unknown>, id: unknown): Record<string, unknown> {
    const name = String(req.backend ?? "");
    const backend = BACKENDS.get(name);
    if (backend === undefined) {
      throw new SidecarError("BACKEND_FAILURE", `unknown backend '${name}'`);
    }
    if (typeof req.model_id !== "string" || req.model_id === "") {
      throw new SidecarError("SHAPE", "fit needs a model_id string");
    }
    const X = matrixFromWire(req.X, "X");
    const y = vectorFromWire(req.y, "y");
    if (X.length !== y.length) {
      throw new SidecarError("SHAPE", "X and y row counts differ");
    }
    const cap =
      backend.maxContext === null
        ? this.options.maxRows
        : Math.min(this.options.maxRows, backend.maxContext);
    if (X.length > cap) {
      throw new SidecarError("OVER_CONTEXT", `${X.length} context rows exceed the limit of ${cap}`);
    }
    const raw = req.ensemble_size;
    const ensemble =
      typeof raw === "number" && Number.isInteger(raw) && raw >= 1 ? raw : backend.defaultEnsemble;
    this.store.set(req.model_id, backend.fit(X, y, ensemble));
    return { op: "fit", id, model_id: req.model_id };
  }

  private predict(req: Record<string, unknown>, id: unknown): Record<string, unknown> {
    const model = this.store.get(String(req.model_id));
    if (model === undefined) {
      throw new SidecarError("UNKNOWN_MODEL", `no model ${JSON.stringify(req.model_id)}`);
    }
    const X = matrixFromWire(req.X, "X");
    return { op: "predict", id, predictions: vectorToWire(model.predict(X)) };
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export type StopReason = "shutdown" | "eof";

/**
 * Serve frames arriving on `input`, writing responses with `write`.
 * Resolves "shutdown" after answering a shutdown op, "eof" when the
 * stream ends first.
 */
export function serveStream(
  input: NodeJS.ReadableStream,
  write: (data: Buffer) => void,
  handler: RequestHandler,
  delayMs = 0,
): Promise<StopReason> {
  return new Promise((resolve, reject) => {
    const reader = new FrameReader();
    const queue: Buffer[] = [];
    let stopped = false;
    let pumping = false;

    const finish = (reason: StopReason) => {
      if (!stopped) {
        stopped = true;
        resolve(reason);
      }
    };

    const pump = async () => {
      if (pumping) return;
      pumping = true;
      while (queue.length > 0 && !stopped) {
        const payload = queue.shift()!;
        let response: Record<string, unknown>;
        let isShutdown = false;
        try {
          const req: unknown = JSON.parse(payload.toString("utf8"));
          isShutdown =
            typeof req === "object" &&
            req !== null &&
            (req as Record<string, unknown>).op === "shutdown";
          response = handler.handle(req);
        } catch {
          response = errorBody(null, "BACKEND_FAILURE", "unparseable frame body");
        }
        if (delayMs > 0) await sleep(delayMs);
        if (stopped) return;
        write(encodeFrame(response));
        if (isShutdown) {
          finish("shutdown");
          return;
        }
      }
      pumping = false;
    };

    input.on("data", (chunk: Buffer) => {
      if (stopped) return;
      reader.push(chunk);
      try {
        let payload: Buffer | null;
        while ((payload = reader.next()) !== null) queue.push(payload);
      } catch (err) {
        // framing is unrecoverable past an oversized header
        const message = err instanceof Error ? err.message : String(err);
        write(encodeFrame(errorBody(null, "BACKEND_FAILURE", message)));
        finish("eof");
        return;
      }
      void pump();
    });
    input.on("end", () => finish("eof"));
    input.on("close", () => finish("eof"));
    input.on("error", (err: Error) => {
      if (!stopped) {
        stopped = true;
        reject(err);
      }
    });
  });
}

export async function serveStdio(handler: RequestHandler, delayMs = 0): Promise<StopReason> {
  return serveStream(process.stdin, (data) => void process.stdout.write(data), handler, delayMs);
}

/**
 * Listen on 127.0.0.1:port (0 picks a free one) and serve connections
 * sequentially against one shared handler. Resolves once a connection
 * ends with a shutdown op.
 */
export function serveTcp(
  port: number,
  handler: RequestHandler,
  delayMs = 0,
  onListening?: (boundPort: number) => void,
): Promise<void> {
  return new Promise((resolve, reject) => {
    let busy = false;
    const server = net.createServer((socket) => {
      if (busy) {
        socket.destroy();
        return;
      }
      busy = true;
      serveStream(socket, (data) => void socket.write(data), handler, delayMs)
        .then((reason) => {
          socket.end();
          busy = false;
          if (reason === "shutdown") {
            server.close(() => resolve());
          }
        })
        .catch(() => {
          // client vanished mid-connection; keep listening
          socket.destroy();
          busy = false;
        });
    });
    server.on("error", reject);
    server.listen(port, "127.0.0.1", () => {
      const address = server.address() as net.AddressInfo;
      onListening?.(address.port);
    });
  });
}
