
import numpy as np
import pytest

from green_imcf.geometry import ModelManifold
from green_imcf.io import (
    InputError, atomic_write_text, config_hash, header_line, load_json, load_model, read_csv, save_model,
    write_csv,
)


def test_csv_header_and_roundtrip(tmp_path):
    cfg = {"p": 2.0, "model": "x.json"}
    path = write_csv(tmp_path / "a.csv", ["a", "b"], [(0.1, 1), (1 / 3, np.int64(2))], cfg, seed=5)
    first = path.read_text().splitlines()[0]
    assert first == header_line(cfg, 5)
    assert first.startswith("# green_imcf ") and "seed=5" in first
    rows = read_csv(path)
    assert float(rows[1]["a"]) == 1 / 3  # repr keeps full precision
    assert rows[1]["b"] == "2"


def test_config_hash_order_independent():
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_atomic_write_leaves_no_temp_files(tmp_path):
    atomic_write_text(tmp_path / "x.txt", "hello")
    atomic_write_text(tmp_path / "x.txt", "again")
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]
    assert (tmp_path / "x.txt").read_text() == "again"


@pytest.mark.parametrize("M", [ModelManifold.euclidean(3), ModelManifold.hyperbolic(2, 0.5),
                               ModelManifold.power_tail(2, 0.5)], ids=lambda M: M.label)
def test_model_roundtrip(tmp_path, M):
    save_model(M, tmp_path / "m.json")
    assert load_model(tmp_path / "m.json") == M


def test_json_syntax_error_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "kind": "euclidean",\n  "n": 3,,\n}\n')
    with pytest.raises(InputError) as info:
        load_json(p)
    assert info.value.line == 3


def test_invalid_model_reports_key_line(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{\n  "kind": "power_tail",\n  "n": 2,\n  "alpha": 3.0\n}\n')
    with pytest.raises(InputError) as info:
        load_model(p)
    assert info.value.line is not None and f"{p}:" in str(info.value)


def test_missing_file():
    with pytest.raises(InputError):
        load_json("/nonexistent/file.json")


def test_non_object_json(tmp_path):
    p = tmp_path / "a.json"
    p.write_text("[1, 2]")
    with pytest.raises(InputError):
        load_json(p)
