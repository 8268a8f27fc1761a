"""Wire protocol client: framing, canonical encoding, session lifecycle,
and failure containment against a scriptable mock server."""

import socket
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condshap.bridge import (
    FRAME_HEADER,
    BridgeRegressor,
    BridgeSession,
    BridgeSessionPool,
    decode_frame_body,
    encode_body,
    encode_frame,
    matrix_to_wire,
    vector_to_wire,
    wire_to_vector,
)
from condshap.errors import BridgeError, ConfigError
from condshap.regressors import OlsRegressor

MOCK = [sys.executable, str(Path(__file__).parent / "helpers" / "mock_sidecar.py")]


def mock_cmd(*flags):
    return MOCK + list(flags)


# --- framing and encoding -----------------------------------------------------


def test_encode_body_is_canonical():
    body = {"b": 1, "a": [1.5, "NaN"], "op": "x"}
    assert encode_body(body) == b'{"a":[1.5,"NaN"],"b":1,"op":"x"}'


def test_frame_layout():
    frame = encode_frame({"op": "hello"})
    (length,) = FRAME_HEADER.unpack(frame[:4])
    assert length == len(frame) - 4
    assert decode_frame_body(frame[4:]) == {"op": "hello"}


def test_decode_rejects_non_message():
    with pytest.raises(BridgeError):
        decode_frame_body(b"[1,2,3]")
    with pytest.raises(BridgeError):
        decode_frame_body(b'{"no_op":1}')


def test_nan_crosses_as_string_inf_refused():
    wire = matrix_to_wire(np.array([[1.0, np.nan]]))
    assert wire == [[1.0, "NaN"]]
    back = wire_to_vector(wire[0])
    assert back[0] == 1.0 and np.isnan(back[1])
    with pytest.raises(BridgeError):
        matrix_to_wire(np.array([[np.inf]]))


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.lists(
            st.one_of(
                st.floats(allow_nan=False, allow_infinity=False, width=64),
                st.just(float("nan")),
            ),
            min_size=1,
            max_size=5,
        ),
        min_size=1,
        max_size=5,
    ).filter(lambda rows: len({len(r) for r in rows}) == 1)
)
def test_matrix_round_trip_through_frames(rows):
    a = np.array(rows, dtype=np.float64)
    frame = encode_frame({"op": "x", "X": matrix_to_wire(a)})
    body = decode_frame_body(frame[4:])
    back = np.vstack([wire_to_vector(r) for r in body["X"]])
    assert back.shape == a.shape
    assert np.array_equal(np.isnan(back), np.isnan(a))
    assert np.array_equal(back[~np.isnan(a)], a[~np.isnan(a)])


def test_vector_wire_round_trip():
    y = np.array([0.0, -1.5, np.nan, 3.25])
    back = wire_to_vector(vector_to_wire(y))
    assert np.array_equal(np.isnan(back), np.isnan(y))
    assert np.array_equal(back[~np.isnan(y)], y[~np.isnan(y)])


# --- sessions against the mock -------------------------------------------------


def test_handshake_fit_predict_release():
    with BridgeSession.spawn(mock_cmd()) as session:
        assert "ols-ref" in session.capabilities["backends"]
        assert session.capabilities["max_rows"] >= 1
        rng = np.random.default_rng(1)
        X = rng.normal(size=(40, 3))
        y = 1.0 + X @ np.array([2.0, -1.0, 0.5])
        model_id = session.new_model_id()
        session.fit(model_id, X, y, backend="ols-ref")
        X2 = rng.normal(size=(6, 3))
        preds = session.predict(model_id, X2)
        assert preds == pytest.approx(1.0 + X2 @ np.array([2.0, -1.0, 0.5]), abs=1e-8)
        session.release(model_id)
        with pytest.raises(BridgeError) as err:
            session.predict(model_id, X2)
        assert err.value.code == "UNKNOWN_MODEL"
        session.shutdown()


def test_version_mismatch_refused():
    with pytest.raises(BridgeError) as err:
        BridgeSession.spawn(mock_cmd("--bad-version"))
    assert err.value.code == "VERSION"


def test_missing_values_rejected_by_incapable_backend():
    with BridgeSession.spawn(mock_cmd()) as session:
        X = np.array([[1.0, np.nan], [0.5, 2.0]])
        with pytest.raises(BridgeError) as err:
            session.fit(session.new_model_id(), X, np.array([1.0, 2.0]), backend="ols-ref")
        assert err.value.code == "MISSING_UNSUPPORTED"


def test_context_limit_reported_as_over_context():
    with BridgeSession.spawn(mock_cmd("--max-rows", "8")) as session:
        X = np.ones((9, 2))
        with pytest.raises(BridgeError) as err:
            session.fit(session.new_model_id(), X, np.ones(9), backend="mean")
        assert err.value.code == "OVER_CONTEXT"
        session.shutdown()


def test_evicted_model_becomes_unknown():
    with BridgeSession.spawn(mock_cmd("--max-models", "2")) as session:
        ids = [session.new_model_id() for _ in range(3)]
        for i, model_id in enumerate(ids):
            session.fit(model_id, np.eye(2), np.array([float(i), 0.0]), backend="mean")
        with pytest.raises(BridgeError) as err:
            session.predict(ids[0], np.eye(2))  # oldest was evicted
        assert err.value.code == "UNKNOWN_MODEL"
        assert session.predict(ids[2], np.eye(2))[0] == pytest.approx(1.0)
        session.shutdown()


def test_kill_mid_request_surfaces_backend_lost():
    t0 = time.monotonic()
    with pytest.raises(BridgeError) as err:
        with BridgeSession.spawn(mock_cmd("--kill-on", "fit"), timeout=10.0) as session:
            session.fit(session.new_model_id(), np.eye(2), np.ones(2), backend="ols-ref")
    assert err.value.code == "BACKEND_LOST"
    assert time.monotonic() - t0 < 10.0  # death detected well before the timeout


def test_silent_sidecar_times_out_as_backend_lost():
    with pytest.raises(BridgeError) as err:
        with BridgeSession.spawn(mock_cmd("--delay-ms", "3000"), timeout=0.5) as session:
            session.predict("m1", np.eye(2))
    assert err.value.code == "BACKEND_LOST"


def test_corrupt_response_id_rejected():
    with pytest.raises(BridgeError):
        with BridgeSession.spawn(mock_cmd("--corrupt-id")) as session:
            session.predict("m1", np.eye(2))


def test_session_closed_after_transport_error():
    session = BridgeSession.spawn(mock_cmd("--kill-on", "predict"), timeout=5.0)
    with pytest.raises(BridgeError):
        session.predict("m0", np.eye(2))
    with pytest.raises(BridgeError):
        session.predict("m0", np.eye(2))  # stays closed, still a clean error


def test_empty_prediction_batch_short_circuits():
    with BridgeSession.spawn(mock_cmd()) as session:
        preds = session.predict("never-fitted", np.empty((0, 3)))
        assert preds.shape == (0,)


def test_tcp_transport():
    proc = subprocess.Popen(
        mock_cmd("--tcp", "0"), stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True
    )
    try:
        port = int(proc.stdout.readline())
        session = BridgeSession.spawn(f"tcp://127.0.0.1:{port}")
        X = np.array([[0.0], [1.0], [2.0]])
        model_id = session.new_model_id()
        session.fit(model_id, X, np.array([1.0, 3.0, 5.0]), backend="ols-ref")
        assert session.predict(model_id, np.array([[4.0]]))[0] == pytest.approx(9.0, abs=1e-8)
        session.shutdown()
    finally:
        proc.terminate()
        proc.wait(timeout=5)


def test_tcp_connect_refused_is_backend_lost():
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()  # nothing listens here now
    with pytest.raises(BridgeError) as err:
        BridgeSession.spawn(f"tcp://127.0.0.1:{port}", timeout=1.0)
    assert err.value.code == "BACKEND_LOST"


# --- pool and regressor adapter -----------------------------------------------


def test_pool_requires_command(monkeypatch):
    monkeypatch.delenv("CONDSHAP_BRIDGE_CMD", raising=False)
    with pytest.raises(ConfigError):
        BridgeSessionPool()


def test_pool_env_fallback(monkeypatch):
    monkeypatch.setenv("CONDSHAP_BRIDGE_CMD", " ".join(MOCK))
    pool = BridgeSessionPool()
    try:
        reg = BridgeRegressor(pool, backend="mean").fit(np.eye(2), np.array([2.0, 4.0]))
        assert reg.predict(np.eye(2)) == pytest.approx([3.0, 3.0])
    finally:
        pool.close()


def test_bridge_regressor_matches_in_core_ols():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(60, 4))
    y = X @ np.array([1.0, 0.0, -2.0, 0.5]) + 3.0 + rng.normal(0, 0.01, 60)
    pool = BridgeSessionPool(cmd=MOCK)
    try:
        remote = BridgeRegressor(pool, backend="ols-ref").fit(X, y)
        local = OlsRegressor().fit(X, y)
        X2 = rng.normal(size=(20, 4))
        assert remote.predict(X2) == pytest.approx(local.predict(X2), abs=1e-6)
        remote.close()
    finally:
        pool.close()


def test_pool_round_robin_spreads_fits():
    pool = BridgeSessionPool(cmd=MOCK, size=2)
    try:
        regs = [
            BridgeRegressor(pool, backend="mean").fit(np.eye(2), np.array([float(i), 0.0]))
            for i in range(4)
        ]
        sessions = {id(r.session) for r in regs}
        assert len(sessions) == 2  # both sessions took fits
        for i, reg in enumerate(regs):
            assert reg.predict(np.eye(2))[0] == pytest.approx(i / 2.0)
    finally:
        pool.close()
