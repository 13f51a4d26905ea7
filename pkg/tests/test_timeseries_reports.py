import json

import numpy as np
import pytest

from resorg.reports import MeasureReport, curve_csv, to_jsonable
from resorg.timeseries import TimeSeries, as_array


def test_time_series_shapes():
    ts = TimeSeries(np.arange(5.0))
    assert ts.values.shape == (5, 1) and ts.channels == ("c0",) and len(ts) == 5 and ts.dim == 1
    with pytest.raises(ValueError):
        TimeSeries(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        TimeSeries(np.zeros((3, 2)), ("a",))
    named = TimeSeries(np.arange(6.0).reshape(3, 2), ("u", "v"))
    assert np.array_equal(named.channel("v"), [1.0, 3.0, 5.0])


def test_csv_round_trip_float_and_int(rng):
    f = TimeSeries(rng.standard_normal((20, 2)), ("a", "b"))
    back = TimeSeries.from_csv(f.to_csv(), from_text=True)
    assert back.channels == ("a", "b") and np.array_equal(back.values, f.values)
    i = TimeSeries(np.array([0, 3, 1]), ("s",))
    back = TimeSeries.from_csv(i.to_csv(), from_text=True)
    assert back.values.dtype == np.int64 and np.array_equal(back.values, i.values)


def test_csv_file_and_empty(tmp_path):
    p = tmp_path / "x.csv"
    TimeSeries(np.ones(3)).to_csv(p)
    assert TimeSeries.from_csv(p).values.shape == (3, 1)
    assert len(TimeSeries.from_csv("a,b\n", from_text=True)) == 0
    with pytest.raises(ValueError):
        TimeSeries.from_csv("", from_text=True)


def test_as_array():
    assert as_array([1, 2]).shape == (2, 1)
    assert as_array(TimeSeries(np.zeros((4, 3)))).shape == (4, 3)
    with pytest.raises(ValueError):
        as_array(np.zeros((1, 1, 1)))


def test_to_jsonable():
    out = to_jsonable({"a": np.arange(2), "b": (np.float64(np.inf), np.nan), 1: np.bool_(True)})
    assert out == {"a": [0, 1], "b": ["inf", "nan"], "1": True}
    json.dumps(out)


def test_report_and_curve_csv():
    assert curve_csv("k", "v", [1, 2], [0.5, 0.25]) == "k,v\n1,0.5\n2,0.25\n"
    rep = MeasureReport("mc", {"MC": 1.5}, {"MC_k": np.array([1.0, 0.5])}, {"seed": 1})
    assert rep["MC"] == 1.5 and rep["MC_k"][1] == 0.5
    assert json.loads(rep.to_json())["curves"]["MC_k"] == [1.0, 0.5]
    assert rep.curve_csv("MC_k").splitlines()[1] == "1,1.0"
