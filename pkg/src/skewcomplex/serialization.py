"""Matrix Market files, complex manifests and atomic output directories."""
from __future__ import annotations

import io
import json
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .complexes import HilbertComplexSpec
from .linmap import DEFAULT_RANK_TOL, InnerProductSpace, LinearMap

SCHEMA_VERSION = "1"


class ManifestError(ValueError):
    """A manifest or one of the files it references is unusable."""


def write_matrix(path, m):
    """Write a sparse matrix in coordinate format or a dense one in array format."""
    buf = io.BytesIO()
    if sp.issparse(m):
        scipy.io.mmwrite(buf, sp.coo_matrix(m), field="real", symmetry="general")
    else:
        scipy.io.mmwrite(buf, np.atleast_2d(np.asarray(m, dtype=float)),
                         field="real", symmetry="general")
    Path(path).write_bytes(buf.getvalue())


def read_matrix(path):
    """Read a Matrix Market file; coordinate files come back as CSR."""
    try:
        m = scipy.io.mmread(str(path))
    except (OSError, ValueError) as exc:
        raise ManifestError(f"cannot read matrix {path}: {exc}") from exc
    return sp.csr_matrix(m) if sp.issparse(m) else np.asarray(m, dtype=float)


def write_vector(path, x):
    write_matrix(path, np.asarray(x, dtype=float).reshape(-1, 1))


def read_vector(path):
    m = read_matrix(path)
    if sp.issparse(m):
        m = m.toarray()
    if m.ndim != 2 or m.shape[1] != 1:
        raise ManifestError(f"{path} is not a one-column array")
    return m[:, 0]


def save_complex(spec, directory, extra=None):
    """Write maps, non-identity Grams and ``manifest.json`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    grams, maps = [], []
    for k, space in enumerate(spec.spaces):
        if space.is_euclidean:
            grams.append(None)
        else:
            name = f"gram_{k}.mtx"
            g = space.gram
            write_matrix(directory / name,
                         sp.csr_matrix(g) if np.count_nonzero(g - np.diag(np.diag(g))) == 0 else g)
            grams.append(name)
    for k, a in enumerate(spec.maps):
        name = f"map_{k}.mtx"
        write_matrix(directory / name, a.entries if a.is_sparse else sp.csr_matrix(a.matrix))
        maps.append(name)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "N": spec.length,
        "dims": spec.dims,
        "grams": grams,
        "maps": maps,
        "tol": spec.tol,
    }
    if extra:
        manifest.update(extra)
    (directory / "manifest.json").write_text(dumps(manifest))
    return directory / "manifest.json"


def read_manifest(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    for key in ("N", "dims", "maps"):
        if key not in data:
            raise ManifestError(f"manifest lacks {key!r}")
    if len(data["maps"]) != data["N"] or len(data["dims"]) != data["N"] + 1:
        raise ManifestError("manifest N, dims and maps disagree")
    return data


def load_complex(path, tol=None):
    """Load a complex from its manifest; relative file paths resolve against it."""
    path = Path(path)
    data = read_manifest(path)
    base = path.parent
    grams = data.get("grams") or [None] * len(data["dims"])
    if len(grams) != len(data["dims"]):
        raise ManifestError("manifest grams and dims disagree")
    spaces = []
    for n, g in zip(data["dims"], grams):
        gram = None if g is None else read_matrix(base / g)
        try:
            spaces.append(InnerProductSpace(n, gram))
        except ValueError as exc:
            raise ManifestError(str(exc)) from exc
    maps = []
    for k, name in enumerate(data["maps"]):
        try:
            maps.append(LinearMap(spaces[k], spaces[k + 1], read_matrix(base / name)))
        except ValueError as exc:
            raise ManifestError(f"map {k}: {exc}") from exc
    tol = data.get("tol", DEFAULT_RANK_TOL) if tol is None else tol
    return HilbertComplexSpec(spaces, maps, tol)


def dumps(obj):
    """Deterministic JSON (sorted keys, fixed indentation, trailing newline)."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    return obj


@contextmanager
def staged_output(target):
    """Yield a scratch directory whose files are moved into ``target`` on success.

    Nothing is written to ``target`` if the block raises.
    """
    target = Path(target)
    parent = target.parent if str(target.parent) else Path(".")
    parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=parent))
    try:
        yield stage
        target.mkdir(parents=True, exist_ok=True)
        for item in sorted(stage.iterdir()):
            os.replace(item, target / item.name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
