"""Minimal model server speaking the fit/predict wire protocol over stdio
or TCP. Used by the client tests; real deployments use the sidecar package.

Backends: ols-ref (least squares with intercept), mean (constant mean).
Misbehavior flags make failure modes reproducible:
  --bad-version     advertise an unsupported protocol version
  --kill-on OP      exit(9) without replying when OP arrives
  --delay-ms N      sleep before every reply
  --corrupt-id      reply with a wrong request id
  --max-models N    live-model cap with oldest-first eviction (default 32)
"""

import argparse
import json
import os
import socket
import struct
import sys
import time

import numpy as np

HEADER = struct.Struct(">I")
PROTOCOL_VERSION = 1


def to_wire_vector(values):
    return ["NaN" if np.isnan(v) else float(v) for v in values]


def from_wire_matrix(rows):
    out = np.empty((len(rows), len(rows[0]) if rows else 0))
    for i, row in enumerate(rows):
        for j, x in enumerate(row):
            out[i, j] = np.nan if x == "NaN" else float(x)
    return out


class OlsRef:
    def __init__(self, X, y):
        if np.isnan(X).any():
            raise ValueError("MISSING_UNSUPPORTED: ols-ref cannot take NaN features")
        A = np.hstack([np.ones((X.shape[0], 1)), X])
        self.coef, *_ = np.linalg.lstsq(A, y, rcond=None)

    def predict(self, X):
        if np.isnan(X).any():
            raise ValueError("MISSING_UNSUPPORTED: ols-ref cannot take NaN features")
        return np.hstack([np.ones((X.shape[0], 1)), X]) @ self.coef


class Mean:
    def __init__(self, X, y):
        self.value = float(np.mean(y))

    def predict(self, X):
        return np.full(X.shape[0], self.value)


BACKENDS = {"ols-ref": OlsRef, "mean": Mean}


class Server:
    def __init__(self, args):
        self.args = args
        self.models = {}

    def error(self, req, code, message):
        return {"op": "error", "id": req.get("id"), "code": code, "message": message}

    def handle(self, req):
        op = req.get("op")
        if self.args.kill_on == op:
            os._exit(9)
        if op == "hello":
            version = 99 if self.args.bad_version else PROTOCOL_VERSION
            return {
                "op": "hello",
                "id": req.get("id"),
                "protocol_version": version,
                "capabilities": {
                    "backends": sorted(BACKENDS),
                    "missing_values": False,
                    "max_rows": self.args.max_rows,
                },
            }
        if op == "fit":
            backend = req.get("backend")
            if backend not in BACKENDS:
                return self.error(req, "BACKEND_FAILURE", f"unknown backend {backend!r}")
            X = from_wire_matrix(req["X"])
            y = np.asarray([np.nan if v == "NaN" else float(v) for v in req["y"]])
            if X.shape[0] != y.shape[0]:
                return self.error(req, "SHAPE", "X and y row counts differ")
            if X.shape[0] > self.args.max_rows:
                return self.error(req, "OVER_CONTEXT", f"{X.shape[0]} rows exceed context")
            try:
                model = BACKENDS[backend](X, y)
            except ValueError as exc:
                code, _, message = str(exc).partition(": ")
                return self.error(req, code, message or str(exc))
            model_id = req["model_id"]
            self.models[model_id] = model
            while len(self.models) > self.args.max_models:
                self.models.pop(next(iter(self.models)))
            return {"op": "fit", "id": req.get("id"), "model_id": model_id}
        if op == "predict":
            model = self.models.get(req.get("model_id"))
            if model is None:
                return self.error(req, "UNKNOWN_MODEL", f"no model {req.get('model_id')!r}")
            try:
                preds = model.predict(from_wire_matrix(req["X"]))
            except ValueError as exc:
                code, _, message = str(exc).partition(": ")
                return self.error(req, code, message or str(exc))
            return {
                "op": "predict",
                "id": req.get("id"),
                "predictions": to_wire_vector(preds),
            }
        if op == "release":
            self.models.pop(req.get("model_id"), None)
            return {"op": "release", "id": req.get("id"), "model_id": req.get("model_id")}
        if op == "shutdown":
            return {"op": "shutdown", "id": req.get("id")}
        return self.error(req, "BACKEND_FAILURE", f"unknown op {op!r}")

    def serve(self, read_exactly, write):
        while True:
            header = read_exactly(HEADER.size)
            if header is None:
                return
            (length,) = HEADER.unpack(header)
            payload = read_exactly(length)
            if payload is None:
                return
            req = json.loads(payload.decode())
            resp = self.handle(req)
            if self.args.delay_ms:
                time.sleep(self.args.delay_ms / 1000.0)
            if self.args.corrupt_id:
                resp["id"] = -1
            body = json.dumps(resp, sort_keys=True, separators=(",", ":")).encode()
            write(HEADER.pack(len(body)) + body)
            if req.get("op") == "shutdown":
                return


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--tcp", type=int, default=None, help="listen on this port")
    parser.add_argument("--bad-version", action="store_true")
    parser.add_argument("--kill-on", default=None)
    parser.add_argument("--delay-ms", type=int, default=0)
    parser.add_argument("--corrupt-id", action="store_true")
    parser.add_argument("--max-models", type=int, default=32)
    parser.add_argument("--max-rows", type=int, default=1_000_000)
    args = parser.parse_args()
    server = Server(args)

    if args.tcp is not None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind(("127.0.0.1", args.tcp))
        listener.listen(1)
        # report the bound port for tests that pass port 0
        print(listener.getsockname()[1], flush=True)
        conn, _ = listener.accept()

        def read_exactly(n):
            chunks = b""
            while len(chunks) < n:
                chunk = conn.recv(n - len(chunks))
                if not chunk:
                    return None
                chunks += chunk
            return chunks

        server.serve(read_exactly, conn.sendall)
        conn.close()
        listener.close()
        return

    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer

    def read_exactly(n):
        chunks = b""
        while len(chunks) < n:
            chunk = stdin.read(n - len(chunks))
            if not chunk:
                return None
            chunks += chunk
        return chunks

    def write(data):
        stdout.write(data)
        stdout.flush()

    server.serve(read_exactly, write)


if __name__ == "__main__":
    main()
