import numpy as np
import pytest

from condshap.errors import ConfigError
from condshap.metrics import MetricReport, mae, mse_v, mse_v_per_coalition, spearman


def test_mae_hand_values():
    true = np.array([[1.0, 2.0], [0.0, 0.0]])
    est = np.array([[1.5, 2.0], [1.0, -1.0]])
    per_instance, mean = mae(true, est)
    assert per_instance == pytest.approx([0.25, 1.0])
    assert mean == pytest.approx(0.625)


def test_mae_shape_mismatch():
    with pytest.raises(ConfigError):
        mae(np.zeros((2, 3)), np.zeros((2, 2)))


def test_mse_v_zero_iff_equal():
    f = np.array([1.0, 2.0, 3.0])
    v = np.tile(f[:, None], (1, 4))
    assert mse_v(f, v) == 0.0
    v2 = v.copy()
    v2[1, 2] += 1e-3
    assert mse_v(f, v2) > 0.0


def test_mse_v_hand_example():
    # two instances with f = (1, 2); v-hat constant 1.5 over two coalitions
    f = np.array([1.0, 2.0])
    v = np.full((2, 2), 1.5)
    assert mse_v(f, v) == pytest.approx(0.25)


def test_mse_v_rejects_nonfinite():
    with pytest.raises(ConfigError):
        mse_v(np.array([1.0]), np.array([[np.nan]]))


def test_mse_v_per_coalition_decomposes():
    rng = np.random.default_rng(6)
    f = rng.normal(size=5)
    v = rng.normal(size=(5, 3))
    masks = [1, 2, 3]
    per = mse_v_per_coalition(f, v, masks)
    assert set(per) == {1, 2, 3}
    assert np.mean(list(per.values())) == pytest.approx(mse_v(f, v))


def test_spearman():
    assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    # monotone transform leaves rank correlation at 1
    x = np.array([0.1, 0.7, 0.3, 2.0])
    assert spearman(x, np.exp(x)) == pytest.approx(1.0)


def test_metric_report_round_trip():
    report = MetricReport(
        estimator="independence",
        per_instance_mae=np.array([0.1, 0.2]),
        mean_mae=0.15,
        mse_v=1.5,
        per_coalition_mse={1: 1.0, 2: 2.0},
        runtime_seconds=0.5,
    )
    doc = report.to_dict()
    assert doc["estimator"] == "independence"
    assert doc["mean_mae"] == pytest.approx(0.15)
    assert doc["per_coalition_mse"]["1"] == 1.0 or doc["per_coalition_mse"][1] == 1.0
