import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from srlasso import io


def test_matrix_round_trip(tmp_path):
    M = np.array([[1.0, -2.5e-17], [3.0, 1 / 3]])
    path = tmp_path / "A.csv"
    io.write_matrix_csv(path, M)
    np.testing.assert_array_equal(io.read_matrix_csv(path), M)
    assert path.read_text() == "1.0,-2.5e-17\n3.0,0.3333333333333333\n"


def test_vector_row_or_column(tmp_path):
    (tmp_path / "r.csv").write_text("1,2,3\n")
    (tmp_path / "c.csv").write_text("1\n2\n3\n\n")
    np.testing.assert_array_equal(io.read_vector_csv(tmp_path / "r.csv"), [1, 2, 3])
    np.testing.assert_array_equal(io.read_vector_csv(tmp_path / "c.csv"), [1, 2, 3])


@pytest.mark.parametrize("text", ["1,2\n3\n", "1,x\n", "", "1,nan\n"])
def test_malformed_matrix(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ValueError):
        io.read_matrix_csv(path)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(v):
    assert float(io.format_float(v)) == v


def test_json_is_deterministic_and_valid():
    obj = {"b": [1.5, math.inf], "a": np.float64(0.1), "c": np.array([1, 2]), "d": np.bool_(True)}
    text = io.dumps_json(obj)
    assert text == io.dumps_json(dict(reversed(list(obj.items()))))
    assert json.loads(text) == {"a": 0.1, "b": [1.5, "inf"], "c": [1, 2], "d": True}


def test_table_csv_cells():
    text = io.table_to_csv(["a", "b", "c", "d"], [[None, True, 0.1, 3], ["x", False, math.inf, 0]])
    assert text == "a,b,c,d\n,true,0.1,3\nx,false,inf,0\n"


def test_atomic_write_leaves_no_temporary(tmp_path):
    io.atomic_write_text(tmp_path / "sub" / "f.txt", "hello")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["f.txt"]


def test_atomic_write_failure_keeps_old_file(tmp_path):
    path = tmp_path / "f.txt"
    path.write_text("old")

    class Boom:
        def __str__(self):
            raise RuntimeError

    with pytest.raises(TypeError):
        io.atomic_write_text(path, Boom())
    assert path.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["f.txt"]
