import json

import numpy as np
import pytest
import scipy.sparse as sp

from skewcomplex.complexes import random_complex
from skewcomplex.derham import GridDomain3D, build_derham
from skewcomplex.serialization import (
    ManifestError,
    dumps,
    load_complex,
    read_matrix,
    read_vector,
    save_complex,
    staged_output,
    write_atomic,
    write_matrix,
    write_vector,
)


def test_matrix_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    dense = rng.standard_normal((4, 3))
    write_matrix(tmp_path / "d.mtx", dense)
    assert np.array_equal(read_matrix(tmp_path / "d.mtx"), dense)
    sparse = sp.random(6, 5, density=0.4, random_state=1, format="csr")
    write_matrix(tmp_path / "s.mtx", sparse)
    back = read_matrix(tmp_path / "s.mtx")
    assert sp.issparse(back) and np.array_equal(back.toarray(), sparse.toarray())
    write_vector(tmp_path / "v.mtx", [1.0, 1 / 3])
    assert np.array_equal(read_vector(tmp_path / "v.mtx"), [1.0, 1 / 3])


def test_matrix_files_are_deterministic(tmp_path):
    m = sp.random(6, 5, density=0.4, random_state=1, format="csr")
    write_matrix(tmp_path / "a.mtx", m)
    write_matrix(tmp_path / "b.mtx", m)
    assert (tmp_path / "a.mtx").read_bytes() == (tmp_path / "b.mtx").read_bytes()


@pytest.mark.parametrize("weighted", [False, True])
def test_complex_roundtrip(tmp_path, weighted):
    spec = random_complex([3, 5, 4], [2, 2], seed=1, weighted=weighted)
    manifest = save_complex(spec, tmp_path / "c")
    back = load_complex(manifest)
    assert back.dims == spec.dims and back.tol == spec.tol
    for a, b in zip(spec.maps, back.maps):
        assert np.array_equal(a.matrix, b.matrix)
    for a, b in zip(spec.spaces, back.spaces):
        assert np.array_equal(a.gram, b.gram)
    data = json.loads(manifest.read_text())
    assert data["schema_version"] == "1"
    assert (data["grams"] == [None, None, None]) == (not weighted)


def test_sparse_complex_roundtrip(tmp_path):
    spec = build_derham(GridDomain3D.box(2), "neumann")
    back = load_complex(save_complex(spec, tmp_path / "d"))
    assert all(b.is_sparse for b in back.maps)
    assert all(np.array_equal(a.matrix, b.matrix) for a, b in zip(spec.maps, back.maps))


@pytest.mark.parametrize("edit", [
    lambda d: d.pop("maps"),
    lambda d: d.update(N=5),
    lambda d: d.update(dims=[1, 2]),
    lambda d: d.update(grams=[None]),
    lambda d: d.update(maps=["missing.mtx", "map_1.mtx"]),
])
def test_bad_manifests(tmp_path, edit):
    manifest = save_complex(random_complex([2, 3, 2], [1, 1]), tmp_path)
    data = json.loads(manifest.read_text())
    edit(data)
    manifest.write_text(json.dumps(data))
    with pytest.raises(ManifestError):
        load_complex(manifest)


def test_dimension_mismatch_in_map_file(tmp_path):
    manifest = save_complex(random_complex([2, 3, 2], [1, 1]), tmp_path)
    write_matrix(tmp_path / "map_0.mtx", np.ones((2, 2)))
    with pytest.raises(ManifestError):
        load_complex(manifest)


def test_unreadable_manifest(tmp_path):
    (tmp_path / "m.json").write_text("{not json")
    with pytest.raises(ManifestError):
        load_complex(tmp_path / "m.json")


def test_dumps_is_canonical():
    a = dumps({"b": np.float64(1.5), "a": [np.int64(2), np.bool_(True)], "c": float("inf")})
    assert a == '{\n  "a": [\n    2,\n    true\n  ],\n  "b": 1.5,\n  "c": "inf"\n}\n'


def test_staged_output_is_all_or_nothing(tmp_path):
    target = tmp_path / "out"
    with pytest.raises(RuntimeError):
        with staged_output(target) as stage:
            (stage / "half.txt").write_text("x")
            raise RuntimeError("boom")
    assert not target.exists()
    assert list(tmp_path.iterdir()) == []
    with staged_output(target) as stage:
        (stage / "done.txt").write_text("y")
    assert (target / "done.txt").read_text() == "y"
    assert [p.name for p in tmp_path.iterdir()] == ["out"]


def test_write_atomic(tmp_path):
    write_atomic(tmp_path / "sub" / "r.json", "{}\n")
    assert (tmp_path / "sub" / "r.json").read_text() == "{}\n"
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["r.json"]
