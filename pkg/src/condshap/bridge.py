"""Client side of the fit/predict wire protocol for external regressors.

Framing: each message is a 4-byte big-endian length followed by that many
bytes of UTF-8 JSON. Bodies are canonical JSON — keys sorted, no
whitespace — so a fixed exchange is byte-reproducible. Floats use
Python's shortest round-trip repr; missing values travel as the literal
string "NaN".

Message bodies carry "op" (hello | fit | predict | release | shutdown |
error) and an "id" that the single response must echo. A session allows
one in-flight request; parallelism comes from running several sessions.

Error responses carry a code from: VERSION, SHAPE, OVER_CONTEXT,
UNKNOWN_MODEL, MISSING_UNSUPPORTED, BACKEND_FAILURE. The client adds
BACKEND_LOST when the sidecar dies or stops answering within the timeout.
"""

from __future__ import annotations

import json
import math
import os
import select
import shlex
import socket
import struct
import subprocess
import threading
import time

import numpy as np

from .errors import BridgeError, ConfigError

PROTOCOL_VERSION = 1
FRAME_HEADER = struct.Struct(">I")
MAX_FRAME_BYTES = 1 << 28
DEFAULT_TIMEOUT = 30.0
BRIDGE_CMD_ENV = "CONDSHAP_BRIDGE_CMD"


def matrix_to_wire(a: np.ndarray) -> list:
    """Row-major nested lists; NaN becomes the string "NaN"."""
    a = np.asarray(a, dtype=np.float64)
    out = []
    for row in np.atleast_2d(a):
        wire_row = []
        for x in row:
            x = float(x)
            if math.isnan(x):
                wire_row.append("NaN")
            elif math.isinf(x):
                raise BridgeError("SHAPE", "infinite values cannot cross the bridge")
            else:
                wire_row.append(x)
        out.append(wire_row)
    return out


def vector_to_wire(y: np.ndarray) -> list:
    return [row[0] for row in matrix_to_wire(np.asarray(y, dtype=np.float64)[:, None])]


def wire_to_vector(values) -> np.ndarray:
    out = np.empty(len(values))
    for i, x in enumerate(values):
        out[i] = np.nan if x == "NaN" else float(x)
    return out


def encode_body(body: dict) -> bytes:
    return json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def encode_frame(body: dict) -> bytes:
    payload = encode_body(body)
    return FRAME_HEADER.pack(len(payload)) + payload


def decode_frame_body(payload: bytes) -> dict:
    body = json.loads(payload.decode())
    if not isinstance(body, dict) or "op" not in body:
        raise BridgeError("BACKEND_FAILURE", "malformed frame body")
    return body


class _StdioTransport:
    """Spawned subprocess speaking the protocol on stdin/stdout."""

    def __init__(self, cmd: list[str]):
        try:
            self.proc = subprocess.Popen(
                cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
            )
        except OSError as exc:
            raise BridgeError("BACKEND_LOST", f"cannot start sidecar {cmd!r}: {exc}") from exc

    def write(self, data: bytes) -> None:
        try:
            self.proc.stdin.write(data)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeError("BACKEND_LOST", f"sidecar pipe closed: {exc}") from exc

    def read_exactly(self, n: int, timeout: float) -> bytes:
        fd = self.proc.stdout.fileno()
        chunks = []
        remaining = n
        deadline = time.monotonic() + timeout
        while remaining > 0:
            wait = deadline - time.monotonic()
            if wait <= 0:
                raise BridgeError("BACKEND_LOST", f"sidecar silent for {timeout:g}s")
            ready, _, _ = select.select([fd], [], [], wait)
            if not ready:
                continue
            chunk = os.read(fd, remaining)
            if not chunk:
                raise BridgeError("BACKEND_LOST", "sidecar closed its output")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class _TcpTransport:
    """Connection to a sidecar listening on host:port."""

    def __init__(self, host: str, port: int, timeout: float):
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise BridgeError("BACKEND_LOST", f"cannot connect to {host}:{port}: {exc}") from exc

    def write(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise BridgeError("BACKEND_LOST", f"sidecar socket closed: {exc}") from exc

    def read_exactly(self, n: int, timeout: float) -> bytes:
        self.sock.settimeout(timeout)
        chunks = []
        remaining = n
        while remaining > 0:
            try:
                chunk = self.sock.recv(remaining)
            except socket.timeout:
                raise BridgeError("BACKEND_LOST", f"sidecar silent for {timeout:g}s") from None
            except OSError as exc:
                raise BridgeError("BACKEND_LOST", f"sidecar socket error: {exc}") from exc
            if not chunk:
                raise BridgeError("BACKEND_LOST", "sidecar closed the connection")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class BridgeSession:
    """One sidecar connection: handshake, then serialized requests."""

    def __init__(self, transport, timeout: float = DEFAULT_TIMEOUT):
        self.transport = transport
        self.timeout = timeout
        self.lock = threading.Lock()
        self.capabilities: dict = {}
        self._next_id = 0
        self._next_model = 0
        self._closed = False

    @classmethod
    def spawn(cls, cmd: str | list[str], timeout: float = DEFAULT_TIMEOUT) -> "BridgeSession":
        """Launch a sidecar subprocess on stdio and shake hands.

        `cmd` may also be a "tcp://host:port" address of a running sidecar.
        """
        if isinstance(cmd, str):
            if cmd.startswith("tcp://"):
                host, _, port = cmd[len("tcp://") :].rpartition(":")
                session = cls(_TcpTransport(host, int(port), timeout), timeout)
                session.handshake()
                return session
            cmd = shlex.split(cmd)
        session = cls(_StdioTransport(list(cmd)), timeout)
        session.handshake()
        return session

    def _read_frame(self) -> dict:
        header = self.transport.read_exactly(FRAME_HEADER.size, self.timeout)
        (length,) = FRAME_HEADER.unpack(header)
        if length > MAX_FRAME_BYTES:
            raise BridgeError("BACKEND_FAILURE", f"frame of {length} bytes exceeds limit")
        return decode_frame_body(self.transport.read_exactly(length, self.timeout))

    def request(self, body: dict) -> dict:
        """Send one frame, wait for the matching response."""
        if self._closed:
            raise BridgeError("BACKEND_LOST", "session is closed")
        with self.lock:
            self._next_id += 1
            body = dict(body, id=self._next_id)
            try:
                self.transport.write(encode_frame(body))
                response = self._read_frame()
            except BridgeError:
                self.close()
                raise
            if response.get("id") != body["id"]:
                self.close()
                raise BridgeError(
                    "BACKEND_FAILURE",
                    f"response id {response.get('id')!r} does not match request {body['id']}",
                )
            if response.get("op") == "error":
                raise BridgeError(
                    str(response.get("code", "BACKEND_FAILURE")),
                    str(response.get("message", "unspecified sidecar error")),
                )
            return response

    def handshake(self) -> dict:
        response = self.request({"op": "hello", "protocol_version": PROTOCOL_VERSION})
        if response.get("protocol_version") != PROTOCOL_VERSION:
            self.close()
            raise BridgeError(
                "VERSION",
                f"sidecar speaks protocol {response.get('protocol_version')!r}, "
                f"client needs {PROTOCOL_VERSION}",
            )
        self.capabilities = response.get("capabilities", {})
        return self.capabilities

    def new_model_id(self) -> str:
        with self.lock:
            self._next_model += 1
            return f"m{self._next_model}"

    def fit(self, model_id: str, X, y, backend: str, ensemble_size: int = 1) -> dict:
        return self.request(
            {
                "op": "fit",
                "model_id": model_id,
                "backend": backend,
                "ensemble_size": int(ensemble_size),
                "X": matrix_to_wire(X),
                "y": vector_to_wire(y),
            }
        )

    def predict(self, model_id: str, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[0] == 0:
            return np.empty(0)
        response = self.request({"op": "predict", "model_id": model_id, "X": matrix_to_wire(X)})
        preds = wire_to_vector(response.get("predictions", []))
        if preds.shape[0] != X.shape[0]:
            raise BridgeError(
                "SHAPE", f"sidecar returned {preds.shape[0]} predictions for {X.shape[0]} rows"
            )
        return preds

    def release(self, model_id: str) -> None:
        self.request({"op": "release", "model_id": model_id})

    def shutdown(self) -> None:
        if self._closed:
            return
        try:
            self.request({"op": "shutdown"})
        except BridgeError:
            pass
        self.close()

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self.transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


class BridgeSessionPool:
    """Round-robin set of sessions; each model stays on its home session."""

    def __init__(self, cmd: str | None = None, size: int = 1, timeout: float = DEFAULT_TIMEOUT):
        cmd = cmd or os.environ.get(BRIDGE_CMD_ENV)
        if not cmd:
            raise ConfigError(
                f"no sidecar command: pass --bridge or set {BRIDGE_CMD_ENV}"
            )
        if size < 1:
            raise ConfigError("session pool size must be >= 1")
        self.cmd = cmd
        self.size = size
        self.timeout = timeout
        self._sessions: list[BridgeSession] = []
        self._cursor = 0
        self._lock = threading.Lock()

    def session_for_fit(self) -> BridgeSession:
        with self._lock:
            if len(self._sessions) < self.size:
                self._sessions.append(BridgeSession.spawn(self.cmd, self.timeout))
                return self._sessions[-1]
            session = self._sessions[self._cursor % len(self._sessions)]
            self._cursor += 1
            return session

    def close(self) -> None:
        with self._lock:
            for session in self._sessions:
                session.shutdown()
            self._sessions.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class BridgeRegressor:
    """fit/predict surface over a sidecar-hosted model."""

    def __init__(self, pool: BridgeSessionPool, backend: str, ensemble_size: int = 1):
        self.pool = pool
        self.backend = backend
        self.ensemble_size = ensemble_size
        self.session: BridgeSession | None = None
        self.model_id: str | None = None

    def fit(self, X, y) -> "BridgeRegressor":
        self.session = self.pool.session_for_fit()
        self.model_id = self.session.new_model_id()
        self.session.fit(self.model_id, X, y, self.backend, self.ensemble_size)
        return self

    def predict(self, X) -> np.ndarray:
        if self.session is None or self.model_id is None:
            raise ConfigError("bridge regressor is not fitted")
        return self.session.predict(self.model_id, X)

    def close(self) -> None:
        if self.session is not None and self.model_id is not None:
            try:
                self.session.release(self.model_id)
            except BridgeError:
                pass
        self.model_id = None
