"""Integration with the real TypeScript sidecar (sidecar/dist/main.js).

Skipped unless the sidecar is built: cd sidecar && npm run build.
"""

import shutil
import subprocess
import sys
import threading
import time
from pathlib import Path

import numpy as np
import pytest

from condshap import (
    Dataset,
    LinearModel,
    OlsRegressor,
    explain_instances,
    parse_estimator_spec,
)
from condshap.bridge import BridgeSession, BridgeSessionPool
from condshap.errors import BridgeError

SIDECAR_JS = Path(__file__).resolve().parent.parent / "sidecar" / "dist" / "main.js"

pytestmark = [
    pytest.mark.sidecar,
    pytest.mark.skipif(
        shutil.which("node") is None or not SIDECAR_JS.exists(),
        reason="sidecar not built (cd sidecar && npm run build)",
    ),
]

CMD = f"node {SIDECAR_JS} --transport stdio"


def regression_task(seed, n=60, d=4):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    beta = rng.normal(size=d)
    y = X @ beta + 0.5 + rng.normal(size=n) * 0.1
    return X, y


def test_handshake_capabilities():
    with BridgeSession.spawn(CMD, timeout=15) as session:
        caps = session.capabilities
        assert set(caps["backends"]) == {"ols-ref", "knn-miss"}
        assert caps["missing_values"] is True
        assert caps["max_rows"] == 50_000


def test_ols_ref_matches_in_core_within_1e6():
    with BridgeSession.spawn(CMD, timeout=15) as session:
        for seed in (0, 1, 2):
            X, y = regression_task(seed)
            session.fit(f"m{seed}", X, y, "ols-ref")
            got = session.predict(f"m{seed}", X[:20])
            want = OlsRegressor().fit(X, y).predict(X[:20])
            assert np.abs(got - want).max() < 1e-6


def test_knn_miss_handles_nan_ols_ref_refuses():
    with BridgeSession.spawn(CMD, timeout=15) as session:
        X, y = regression_task(3)
        X[::5, 1] = np.nan
        session.fit("knn", X, y, "knn-miss")
        queries = X[:6].copy()
        queries[0, 2] = np.nan
        assert np.isfinite(session.predict("knn", queries)).all()
        with pytest.raises(BridgeError) as excinfo:
            session.fit("bad", X, y, "ols-ref")
        assert excinfo.value.code == "MISSING_UNSUPPORTED"


def test_over_context_and_unknown_model():
    with BridgeSession.spawn(CMD + " --max-rows 8", timeout=15) as session:
        assert session.capabilities["max_rows"] == 8
        X, y = regression_task(4, n=9, d=2)
        with pytest.raises(BridgeError) as excinfo:
            session.fit("big", X, y, "ols-ref")
        assert excinfo.value.code == "OVER_CONTEXT"
        with pytest.raises(BridgeError) as excinfo:
            session.predict("never-fit", X[:2])
        assert excinfo.value.code == "UNKNOWN_MODEL"


def test_kill_mid_request_surfaces_backend_lost_within_30s():
    session = BridgeSession.spawn(CMD + " --delay-ms 5000", timeout=30)
    X, y = regression_task(5, n=20, d=2)
    outcome = {}

    def fire():
        started = time.monotonic()
        try:
            session.fit("doomed", X, y, "ols-ref")
            outcome["error"] = None
        except BridgeError as exc:
            outcome["error"] = exc
        outcome["elapsed"] = time.monotonic() - started

    worker = threading.Thread(target=fire)
    worker.start()
    time.sleep(0.3)  # let the request get in flight, then kill mid-reply
    session.transport.proc.kill()
    worker.join(timeout=30)
    assert not worker.is_alive()
    assert outcome["error"] is not None and outcome["error"].code == "BACKEND_LOST"
    assert outcome["elapsed"] < 30.0


def test_tcp_transport_round_trip():
    proc = subprocess.Popen(
        ["node", str(SIDECAR_JS), "--listen", "0"],
        stdout=subprocess.PIPE,
        stderr=sys.stderr,
    )
    try:
        port = int(proc.stdout.readline().strip())
        with BridgeSession.spawn(f"tcp://127.0.0.1:{port}", timeout=15) as session:
            X, y = regression_task(6)
            session.fit("t", X, y, "ols-ref")
            got = session.predict("t", X[:5])
            want = OlsRegressor().fit(X, y).predict(X[:5])
            assert np.abs(got - want).max() < 1e-6
        assert proc.wait(timeout=10) == 0  # shutdown op ends the server
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.wait()


def test_estimator_over_sidecar_matches_in_core(monkeypatch):
    rng = np.random.default_rng(7)
    X = rng.normal(size=(200, 3))
    train = Dataset(("x1", "x2", "x3"), X)
    model = LinearModel(beta0=0.25, beta=np.array([1.0, -2.0, 0.5]))
    instances = X[:4]

    in_core = explain_instances(
        train, model, parse_estimator_spec("separate:ols"), instances, master_seed=3
    )
    with BridgeSessionPool(cmd=CMD, size=1, timeout=30) as pool:
        bridged = explain_instances(
            train,
            model,
            parse_estimator_spec("separate:bridge:ols-ref", bridge_pool=pool),
            instances,
            master_seed=3,
        )
    assert np.abs(bridged.phis - in_core.phis).max() < 1e-5
    assert np.abs(bridged.phi0 - in_core.phi0) < 1e-8
