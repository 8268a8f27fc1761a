/**
 * Framing and canonical JSON for the fit/predict wire protocol.
 *
 * Each message is a 4-byte big-endian length followed by that many bytes
 * of UTF-8 JSON. Bodies are canonical - keys sorted, no whitespace,
 * shortest round-trip number formatting - so a fixed exchange is
 * byte-reproducible. Missing values travel as the literal string "NaN";
 * infinities never cross the wire.
 */

export const PROTOCOL_VERSION = 1;
export const HEADER_BYTES = 4;
export const MAX_FRAME_BYTES = 1 << 28;

/** Failure that maps to a wire error frame with the given code. */
export class SidecarError extends Error {
  constructor(
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "SidecarError";
  }
}

/** Key-sorted, whitespace-free JSON. Rejects non-finite numbers. */
export function canonicalJson(value: unknown): string {
  if (value === null) return "null";
  if (typeof value === "boolean" || typeof value === "string") {
    return JSON.stringify(value);
  }
  if (typeof value === "number") {
    if (!Number.isFinite(value)) {
      throw new SidecarError("SHAPE", "non-finite numbers cannot cross the bridge");
    }
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  if (typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .filter(([, v]) => v !== undefined)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0));
    const parts = entries.map(([k, v]) => JSON.stringify(k) + ":" + canonicalJson(v));
    return "{" + parts.join(",") + "}";
  }
  throw new SidecarError("BACKEND_FAILURE", `cannot serialize a ${typeof value}`);
}

export function encodeFrame(body: unknown): Buffer {
  const payload = Buffer.from(canonicalJson(body), "utf8");
  const header = Buffer.allocUnsafe(HEADER_BYTES);
  header.writeUInt32BE(payload.length, 0);
  return Buffer.concat([header, payload]);
}

/** Incremental frame splitter: push arbitrary chunks, pull payloads. */
export class FrameReader {
  private buffer: Buffer = Buffer.alloc(0);

  push(chunk: Buffer): void {
    this.buffer = this.buffer.length === 0 ? chunk : Buffer.concat([this.buffer, chunk]);
  }

  /** Next complete payload, or null until more bytes arrive. */
  next(): Buffer | null {
    if (this.buffer.length < HEADER_BYTES) return null;
    const length = this.buffer.readUInt32BE(0);
    if (length > MAX_FRAME_BYTES) {
      throw new SidecarError("BACKEND_FAILURE", `frame of ${length} bytes exceeds limit`);
    }
    if (this.buffer.length < HEADER_BYTES + length) return null;
    const payload = this.buffer.subarray(HEADER_BYTES, HEADER_BYTES + length);
    this.buffer = this.buffer.subarray(HEADER_BYTES + length);
    return payload;
  }
}

function cellToNumber(x: unknown, what: string): number {
  if (x === "NaN") return NaN;
  if (typeof x === "number" && Number.isFinite(x)) return x;
  throw new SidecarError("SHAPE", `${what} entries must be finite numbers or "NaN"`);
}

/** Nested lists off the wire; "NaN" becomes NaN. Rows must be rectangular. */
export function matrixFromWire(rows: unknown, what = "X"): number[][] {
  if (!Array.isArray(rows)) {
    throw new SidecarError("SHAPE", `${what} must be a list of rows`);
  }
  const width = rows.length > 0 && Array.isArray(rows[0]) ? (rows[0] as unknown[]).length : 0;
  const out: number[][] = [];
  for (const row of rows) {
    if (!Array.isArray(row) || row.length !== width) {
      throw new SidecarError("SHAPE", `${what} rows must share one width`);
    }
    out.push(row.map((x) => cellToNumber(x, what)));
  }
  return out;
}

export function vectorFromWire(values: unknown, what = "y"): number[] {
  if (!Array.isArray(values)) {
    throw new SidecarError("SHAPE", `${what} must be a list`);
  }
  return values.map((x) => cellToNumber(x, what));
}

export function vectorToWire(values: number[]): (number | string)[] {
  return values.map((x) => {
    if (Number.isNaN(x)) return "NaN";
    if (!Number.isFinite(x)) {
      throw new SidecarError("SHAPE", "infinite values cannot cross the bridge");
    }
    return x;
  });
}
