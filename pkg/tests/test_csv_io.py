import numpy as np
import pytest

from utils.csv_io import read_matrix_csv, write_matrix_csv, write_rows
from utils.errors import InputValidationError


def _write(tmp_path, text, name="m.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_header_and_blank_lines_are_skipped(tmp_path):
    path = _write(tmp_path, "f1,f2\n1,2\n\n3.5, -4e1\n")
    assert read_matrix_csv(path).tolist() == [[1.0, 2.0], [3.5, -40.0]]


@pytest.mark.parametrize(
    "text, message",
    [
        ("", "empty file"),
        ("a,b\n", "header but no data rows"),
        ("1,2\n3\n", ":2: expected 2 columns, found 1"),
        ("1,2\n3,x\n", ":2:2: non-numeric cell 'x'"),
        ("1,nan\n", ":1:2: non-finite cell"),
    ],
)
def test_rejections_name_the_location(tmp_path, text, message):
    path = _write(tmp_path, text)
    with pytest.raises(InputValidationError) as info:
        read_matrix_csv(path)
    assert message in str(info.value)


def test_missing_file(tmp_path):
    with pytest.raises(InputValidationError, match="cannot read file"):
        read_matrix_csv(tmp_path / "absent.csv")


def test_writers_use_lf_and_full_precision(tmp_path):
    path = write_matrix_csv(tmp_path / "out" / "m.csv", np.array([[0.1, 2.0]]), header=["x", "y"])
    assert path.read_bytes() == b"x,y\n0.1,2.0\n"
    rows = write_rows(tmp_path / "r.csv", [{"a": 1, "b": None}, {"a": np.int64(2), "b": 1 / 3}], ["a", "b"])
    assert rows.read_text() == f"a,b\n1,\n2,{1 / 3!r}\n"
