import json

import numpy as np
import pytest

from hvdvg.io import (
    Dataset, FormatError, SchemaVersionError, ValidationError, atomic_write_text, dumps, load_dataset,
    read_json, write_json,
)


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_two_row_file(tmp_path):
    ds = load_dataset(write(tmp_path, "t_hpi,pfu_per_ml\n0,1e6\n24,3e7\n"))
    assert ds.n == 2
    np.testing.assert_array_equal(ds.V, [1e6, 3e7])
    assert ds.scale == 1e6 and ds.moi_label is None


def test_metadata_lines(tmp_path):
    ds = load_dataset(write(tmp_path, "# moi_label = 3.8\n# scale = 1e5\nt_hpi,pfu_per_ml\n0,1\n1,2\n"))
    assert ds.moi_label == 3.8 and ds.scale == 1e5
    assert load_dataset(tmp_path / "d.csv", scale=10.0).scale == 10.0


def test_round_trip_through_csv(tmp_path):
    ds = Dataset([0, 4, 8.5], [1.5e6, 2e6, 1e9], moi_label=1.8)
    back = load_dataset(write(tmp_path, ds.to_csv_text()))
    np.testing.assert_array_equal(back.t, ds.t)
    np.testing.assert_array_equal(back.V, ds.V)
    assert back.moi_label == 1.8


@pytest.mark.parametrize("text,row", [
    ("t_hpi,pfu_per_ml\n0,1\n4,0\n", "row 2"),
    ("t_hpi,pfu_per_ml\n0,1\n4,-3\n", "row 2"),
    ("t_hpi,pfu_per_ml\n0,1\n4,2\n4,3\n", "row 3"),
    ("t_hpi,pfu_per_ml\n0,1\n8,2\n4,3\n", "row 3"),
])
def test_validation_errors_name_the_row(tmp_path, text, row):
    with pytest.raises(ValidationError, match=row):
        load_dataset(write(tmp_path, text))


@pytest.mark.parametrize("text", [
    "0,1\n4,2\n",
    "time,titer\n0,1\n4,2\n",
    "t_hpi,pfu_per_ml\n0,1,5\n",
    "t_hpi,pfu_per_ml\n0,abc\n",
    "# colour = red\nt_hpi,pfu_per_ml\n0,1\n4,2\n",
    "",
])
def test_format_errors(tmp_path, text):
    with pytest.raises(FormatError):
        load_dataset(write(tmp_path, text))


@pytest.mark.parametrize("t,V", [([0], [1]), ([], []), ([0, 1], [1, np.nan]), ([-1, 1], [1, 1])])
def test_dataset_invariants(t, V):
    with pytest.raises(ValidationError):
        Dataset(t, V)


def test_header_only_is_validation_error(tmp_path):
    with pytest.raises(ValidationError):
        load_dataset(write(tmp_path, "t_hpi,pfu_per_ml\n"))


def test_json_carries_schema_and_encodes_infinities(tmp_path):
    p = tmp_path / "out" / "x.json"
    write_json(p, {"a": np.float64(np.inf), "b": np.arange(2), "c": float("nan")})
    doc = json.loads(p.read_text())
    assert doc["schema_version"] == "1.0"
    assert doc["a"] == "inf" and doc["b"] == [0, 1] and doc["c"] is None


@pytest.mark.parametrize("version,ok", [("1.0", True), ("1.7", True), ("2.0", False), ("0.9", False)])
def test_schema_major_version(tmp_path, version, ok):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"schema_version": version}))
    if ok:
        read_json(p)
    else:
        with pytest.raises(SchemaVersionError):
            read_json(p)


def test_missing_schema_when_required(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{}")
    assert read_json(p) == {}
    with pytest.raises(SchemaVersionError):
        read_json(p, required_version=True)


@pytest.mark.parametrize("text", ["[1, 2]", "{not json"])
def test_bad_json(tmp_path, text):
    p = tmp_path / "c.json"
    p.write_text(text)
    with pytest.raises(FormatError):
        read_json(p)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    atomic_write_text(tmp_path / "a.txt", "one")
    atomic_write_text(tmp_path / "a.txt", "two")
    assert [f.name for f in tmp_path.iterdir()] == ["a.txt"]
    assert (tmp_path / "a.txt").read_text() == "two"


def test_dumps_puts_version_first():
    assert list(json.loads(dumps({"x": 1}))) == ["schema_version", "x"]
