import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sparse_gica.matrix_io import dumps_matrix, format_number, loads_matrix, read_matrix, write_matrix


def test_zero_is_written_as_plain_zero():
    assert format_number(0.0) == "0"
    assert format_number(-0.0) == "0"
    assert dumps_matrix(np.array([[0.0, 1.5]])) == "1 2\n0 1.5\n"


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(0, 5)),
              elements=st.floats(allow_nan=False, allow_infinity=False)))
def test_round_trip_is_exact(M):
    assert np.array_equal(loads_matrix(dumps_matrix(M)), M)


def test_file_round_trip(tmp_path):
    M = np.array([[1 / 3, -2e-300], [0.0, 1e300]])
    write_matrix(tmp_path / "m.txt", M)
    assert np.array_equal(read_matrix(tmp_path / "m.txt"), M)


def test_malformed_text():
    with pytest.raises(ValueError):
        loads_matrix("2 2\n1 2 3\n")
    with pytest.raises(ValueError):
        loads_matrix("")
