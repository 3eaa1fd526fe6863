import json
import math

import numpy as np

from tensorclt.bounds import BoundReport, slice_polynomial_bound
from tensorclt.empirics import EmpiricalDistribution
from tensorclt.report import render_csv, render_json, render_report
from tensorclt.tensor_core import SymmetricCoefficients


def test_json_is_deterministic_and_sorted():
    rep = BoundReport("x", {"b": 1.0, "a": 0.1}, sigma2=1 / 3, constants={"k": 2.0})
    one, two = render_json(rep), render_json(rep)
    assert one == two
    data = json.loads(one)
    assert list(data) == sorted(data)
    assert {"sigma2", "terms", "total", "clamped", "feasible", "constants"} <= set(data)
    assert "0.33333333333333331" in one.decode()


def test_infinity_is_a_string():
    c = SymmetricCoefficients(6, 2, {"1,2": 1.0, "3,4": 1.0})
    data = json.loads(render_json(slice_polynomial_bound(c, 6)))
    assert data["total"] == "inf"


def test_numpy_values_serialize():
    data = json.loads(render_json({"a": np.float64(0.5), "b": np.arange(3), "c": (1, None, True)}))
    assert data == {"a": 0.5, "b": [0, 1, 2], "c": [1, None, True]}


def test_csv_distribution_header():
    dist = EmpiricalDistribution.from_counts([0.0, 1.0], [3, 1])
    lines = render_csv(dist).decode().splitlines()
    assert lines[0] == "value,probability"
    assert lines[1:] == ["0,0.75", "1,0.25"]


def test_csv_rows_and_key_value():
    rows = render_report([{"alpha": 0.1, "t": {"x": 1.0}}, {"alpha": 0.2, "t": {"x": math.inf}}], "csv")
    assert rows.decode().splitlines() == ["alpha,t.x", "0.10000000000000001,1", "0.20000000000000001,inf"]
    kv = render_report({"a": [1, 2]}, "csv").decode().splitlines()
    assert kv == ["key,value", "a[0],1", "a[1],2"]
