/**
 * CLI entry point.
 *
 *   node dist/main.js --transport stdio [--max-rows N] [--delay-ms N]
 *   node dist/main.js --listen <port>   (0 picks a port; it is printed)
 *
 * --deterministic and --device are accepted for protocol-surface parity;
 * the reference backends are deterministic on CPU regardless.
 */

import { parseArgs } from "node:util";

import { DEFAULT_OPTIONS, RequestHandler, serveStdio, serveTcp } from "./server";

function positiveInt(raw: string | undefined, fallback: number, flag: string): number {
  if (raw === undefined) return fallback;
  const value = Number(raw);
  if (!Number.isInteger(value) || value < 0) {
    throw new Error(`${flag} expects a non-negative integer, got '${raw}'`);
  }
  return value;
}

async function main(): Promise<number> {
  let values: {
    transport?: string;
    listen?: string;
    "max-rows"?: string;
    "delay-ms"?: string;
    deterministic?: boolean;
    device?: string;
  };
  try {
    values = parseArgs({
      args: process.argv.slice(2),
      options: {
        transport: { type: "string", default: "stdio" },
        listen: { type: "string" },
        "max-rows": { type: "string" },
        "delay-ms": { type: "string" },
        deterministic: { type: "boolean", default: false },
        device: { type: "string", default: "cpu" },
      },
    }).values;
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 2;
  }

  let handler: RequestHandler;
  try {
    handler = new RequestHandler({
      ...DEFAULT_OPTIONS,
      maxRows: positiveInt(values["max-rows"], DEFAULT_OPTIONS.maxRows, "--max-rows"),
      delayMs: positiveInt(values["delay-ms"], DEFAULT_OPTIONS.delayMs, "--delay-ms"),
      deterministic: values.deterministic ?? false,
      device: values.device ?? "cpu",
    });
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    return 2;
  }

  if (values.listen !== undefined) {
    const port = Number(values.listen);
    if (!Number.isInteger(port) || port < 0 || port > 65535) {
      console.error(`--listen expects a port number, got '${values.listen}'`);
      return 2;
    }
    // stdout is free in TCP mode; report the bound port for port-0 runs
    await serveTcp(port, handler, handler.options.delayMs, (bound) => console.log(bound));
    return 0;
  }

  if (values.transport !== "stdio") {
    console.error(`unknown transport '${values.transport}'; use --transport stdio or --listen`);
    return 2;
  }
  await serveStdio(handler, handler.options.delayMs);
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(String(err));
    process.exit(1);
  },
);
