import numpy as np
import pytest

from condshap.data import Dataset, load_csv, write_csv
from condshap.errors import DataError


def test_dataset_validates_shapes():
    with pytest.raises(DataError):
        Dataset(("a",), np.zeros((2, 2)))
    with pytest.raises(DataError):
        Dataset(("a", "b"), np.zeros(3))
    with pytest.raises(DataError):
        Dataset(("a",), np.array([[np.nan]]))
    with pytest.raises(DataError):
        Dataset(("a",), np.zeros((2, 1)), y=np.zeros(3))


def test_dataset_is_immutable():
    ds = Dataset(("a", "b"), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1.0


def test_round_trip_exact(tmp_path):
    rng = np.random.default_rng(5)
    ds = Dataset(("u", "v", "w"), rng.normal(size=(20, 3)) * 1e3, y=rng.normal(size=20))
    path = tmp_path / "d.csv"
    write_csv(ds, path)
    back = load_csv(path, target="target")
    assert back.feature_names == ds.feature_names
    assert np.array_equal(back.X, ds.X)  # repr floats are lossless
    assert np.array_equal(back.y, ds.y)


def test_missing_header_and_bad_cells(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("")
    with pytest.raises(DataError):
        load_csv(p)
    p.write_text("a,b\n1.0\n")
    with pytest.raises(DataError) as err:
        load_csv(p)
    assert "row 2" in str(err.value)
    p.write_text("a,b\n1.0,oops\n")
    with pytest.raises(DataError) as err:
        load_csv(p)
    assert err.value.row == 2 and err.value.column == 1
    p.write_text("a,b\n1.0,inf\n")
    with pytest.raises(DataError):
        load_csv(p)


def test_unknown_target_rejected(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DataError):
        load_csv(p, target="label")


def test_one_hot_encoding(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("size,color,y\n1.0,red,0.5\n2.0,blue,1.5\n3.0,red,2.5\n")
    ds = load_csv(p, target="y", categorical=("color",))
    assert ds.feature_names == ("size", "color=blue", "color=red")
    assert np.array_equal(ds.X[:, 1], [0, 1, 0])
    assert np.array_equal(ds.X[:, 2], [1, 0, 1])
    assert np.array_equal(ds.y, [0.5, 1.5, 2.5])
