"""Discrete de Rham complexes on voxel grids and simplicial meshes.

Grid unknowns use the lowest-order staggered placement: scalars on
vertices, vector components on edges, fluxes on faces and densities on
cells. The difference stencils are signed integer incidence matrices scaled
by ``1/h``; material coefficients enter only through the slot Grams.

Boundary conditions select which entities carry unknowns. Neumann keeps
every entity of the active region, Dirichlet drops the closure of the
boundary faces (zero extension), and mixed drops the closure of the
``gamma0`` part only.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .complexes import HilbertComplexSpec, cohomology
from .exceptions import CertificateViolationError
from .linmap import DEFAULT_RANK_TOL, InnerProductSpace, LinearMap

AXES = "xyz"
FLAVORS = ("dirichlet", "neumann", "mixed")


# ---------------------------------------------------------------- grids

@dataclass(frozen=True, eq=False)
class GridDomain3D:
    """Boolean ``nx x ny x nz`` mask of active unit cells with spacing ``h``."""

    cells: np.ndarray = field(repr=False)
    h: float = 1.0

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool)
        if cells.ndim != 3:
            raise ValueError(f"cell mask must be 3-dimensional, got shape {cells.shape}")
        if not cells.any():
            raise ValueError("cell mask has no active cells")
        if not self.h > 0:
            raise ValueError(f"spacing must be positive, got {self.h}")
        cells = cells.copy()
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)

    @classmethod
    def box(cls, nx, ny=None, nz=None, h=1.0):
        ny = nx if ny is None else ny
        nz = nx if nz is None else nz
        return cls(np.ones((nx, ny, nz), dtype=bool), h)

    @property
    def shape(self):
        return self.cells.shape

    def refine(self, factor):
        """Split every cell into ``factor**3`` cells of spacing ``h / factor``."""
        c = self.cells
        for ax in range(3):
            c = np.repeat(c, factor, axis=ax)
        return GridDomain3D(c, self.h / factor)

    def entity_counts(self):
        """Active (vertices, edges, faces, cells) of the closed active region."""
        act = _CubicalBox(self.shape).active(self.cells)
        return tuple(int(a.sum()) for a in act)

    def euler_characteristic(self):
        v, e, f, c = self.entity_counts()
        return v - e + f - c


class _CubicalBox:
    """Integer incidence of the full ``nx x ny x nz`` cubical complex."""

    def __init__(self, shape):
        nx, ny, nz = self.shape = tuple(int(n) for n in shape)
        self.vertex_shape = (nx + 1, ny + 1, nz + 1)
        self.edge_shapes = [(nx, ny + 1, nz + 1), (nx + 1, ny, nz + 1), (nx + 1, ny + 1, nz)]
        self.face_shapes = [(nx + 1, ny, nz), (nx, ny + 1, nz), (nx, ny, nz + 1)]
        self.cell_shape = (nx, ny, nz)
        self.V = np.arange(np.prod(self.vertex_shape)).reshape(self.vertex_shape)
        self.E, off = [], 0
        for s in self.edge_shapes:
            self.E.append(off + np.arange(np.prod(s)).reshape(s))
            off += int(np.prod(s))
        self.n_edges = off
        self.F, off = [], 0
        for s in self.face_shapes:
            self.F.append(off + np.arange(np.prod(s)).reshape(s))
            off += int(np.prod(s))
        self.n_faces = off
        self.C = np.arange(np.prod(self.cell_shape)).reshape(self.cell_shape)
        self.counts = (self.V.size, self.n_edges, self.n_faces, self.C.size)
        self.grad, self.curl, self.div = self._incidence()

    @staticmethod
    def _lo(a, ax):
        return a[tuple(slice(None, -1) if i == ax else slice(None) for i in range(3))]

    @staticmethod
    def _hi(a, ax):
        return a[tuple(slice(1, None) if i == ax else slice(None) for i in range(3))]

    def _incidence(self):
        lo, hi = self._lo, self._hi
        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(np.full(r.size, v, dtype=np.int64))

        def matrix(shape):
            m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=shape).tocsr()
            rows.clear(), cols.clear(), vals.clear()
            return m

        for ax in range(3):
            add(self.E[ax], lo(self.V, ax), -1)
            add(self.E[ax], hi(self.V, ax), +1)
        grad = matrix((self.n_edges, self.V.size))

        Ex, Ey, Ez = self.E
        # circulation around +axis, right-handed
        Fx, Fy, Fz = self.F
        add(Fx, lo(Ey, 2), +1), add(Fx, hi(Ez, 1), +1)
        add(Fx, hi(Ey, 2), -1), add(Fx, lo(Ez, 1), -1)
        add(Fy, lo(Ez, 0), +1), add(Fy, hi(Ex, 2), +1)
        add(Fy, hi(Ez, 0), -1), add(Fy, lo(Ex, 2), -1)
        add(Fz, lo(Ex, 1), +1), add(Fz, hi(Ey, 0), +1)
        add(Fz, hi(Ex, 1), -1), add(Fz, lo(Ey, 0), -1)
        curl = matrix((self.n_faces, self.n_edges))

        for ax in range(3):
            add(self.C, lo(self.F[ax], ax), -1)
            add(self.C, hi(self.F[ax], ax), +1)
        div = matrix((self.C.size, self.n_faces))
        return grad, curl, div

    def active(self, cells):
        c = np.asarray(cells, dtype=bool).ravel()
        faces = (abs(self.div).T @ c) > 0
        edges = (abs(self.curl).T @ faces) > 0
        verts = (abs(self.grad).T @ edges) > 0
        return verts, edges, faces, c

    def adjacent_cell_count(self, cells):
        return abs(self.div).T @ np.asarray(cells, dtype=np.int64).ravel()

    def closure_of_faces(self, faces):
        edges = (abs(self.curl).T @ faces) > 0
        verts = (abs(self.grad).T @ edges) > 0
        return verts, edges, faces

    def face_key(self, index):
        for ax, ids in enumerate(self.F):
            if ids.size and ids.flat[0] <= index <= ids.flat[-1]:
                i, j, k = np.unravel_index(index - ids.flat[0], ids.shape)
                return (AXES[ax], int(i), int(j), int(k))
        raise IndexError(index)

    def face_index(self, key):
        ax, i, j, k = key
        return int(self.F[AXES.index(ax)][i, j, k])

    def edge_axes(self):
        return np.concatenate([np.full(e.size, ax) for ax, e in enumerate(self.E)])

    def face_axes(self):
        return np.concatenate([np.full(f.size, ax) for ax, f in enumerate(self.F)])


def boundary_faces(grid):
    """Keys ``(axis, i, j, k)`` of faces with exactly one active neighbouring cell."""
    box = _CubicalBox(grid.shape)
    idx = np.flatnonzero(box.adjacent_cell_count(grid.cells) == 1)
    return [box.face_key(i) for i in idx]


def outward_side(grid, key):
    """Outward normal of a boundary face as ``'x-'``, ``'x+'``, ... ."""
    ax, i, j, k = key
    a = AXES.index(ax)
    lower = [i, j, k]
    lower[a] -= 1
    inside_low = lower[a] >= 0 and grid.cells[tuple(lower)]
    return f"{ax}+" if inside_low else f"{ax}-"


@dataclass(frozen=True)
class BoundaryConditionSpec:
    """Dirichlet, Neumann or mixed; mixed carries the face partition ``gamma0 | gamma1``.

    ``gamma0`` is the Dirichlet part, ``gamma1`` the Neumann part.
    """

    flavor: str = "dirichlet"
    gamma0: frozenset | None = None
    gamma1: frozenset | None = None

    def __post_init__(self):
        flavor = self.flavor.lower()
        if flavor not in FLAVORS:
            raise ValueError(f"unknown boundary flavour {self.flavor!r}")
        object.__setattr__(self, "flavor", flavor)
        if flavor == "mixed":
            if self.gamma0 is None or self.gamma1 is None:
                raise ValueError("mixed conditions need both gamma0 and gamma1")
            object.__setattr__(self, "gamma0", frozenset(map(tuple, self.gamma0)))
            object.__setattr__(self, "gamma1", frozenset(map(tuple, self.gamma1)))

    @classmethod
    def dirichlet(cls):
        return cls("dirichlet")

    @classmethod
    def neumann(cls):
        return cls("neumann")

    @classmethod
    def mixed_sides(cls, grid, sides):
        """Dirichlet on boundary faces whose outward normal is in ``sides`` (e.g. ``['z-']``)."""
        sides = set(sides)
        g0, g1 = set(), set()
        for key in boundary_faces(grid):
            (g0 if outward_side(grid, key) in sides else g1).add(key)
        return cls("mixed", frozenset(g0), frozenset(g1))

    def gamma0_mask(self, grid, box):
        boundary = box.adjacent_cell_count(grid.cells) == 1
        if self.flavor == "neumann":
            return np.zeros_like(boundary)
        if self.flavor == "dirichlet":
            return boundary
        keys = set(boundary_faces(grid))
        if self.gamma0 & self.gamma1:
            raise ValueError("gamma0 and gamma1 overlap")
        if (self.gamma0 | self.gamma1) != keys:
            raise ValueError("gamma0 and gamma1 must cover exactly the boundary faces")
        mask = np.zeros_like(boundary)
        for key in self.gamma0:
            mask[box.face_index(key)] = True
        return mask


def _parse_bc(bc):
    if isinstance(bc, BoundaryConditionSpec):
        return bc
    return BoundaryConditionSpec(bc)


@dataclass(frozen=True)
class MaterialWeights:
    """Coefficients carried by the slot Grams.

    ``epsilon`` (edges) and ``mu`` (faces) accept a scalar, a length-3
    diagonal tensor, a per-entity vector or a full SPD matrix; ``nu``
    (vertices) and ``kappa`` (cells) accept a scalar, a per-entity vector or
    a full SPD matrix. Per-entity data refers to the kept entities in their
    assembly order.
    """

    nu: object = 1.0
    epsilon: object = 1.0
    mu: object = 1.0
    kappa: object = 1.0

    def is_identity(self):
        return all(np.ndim(w) == 0 and float(w) == 1.0
                   for w in (self.nu, self.epsilon, self.mu, self.kappa))


def _gram(weight, n, axes=None, name="weight"):
    w = np.asarray(weight, dtype=float)
    if w.ndim == 0:
        if not w > 0:
            raise ValueError(f"{name} must be positive")
        return None if w == 1.0 else np.eye(n) * float(w)
    if w.ndim == 1 and w.size == 3 and axes is not None and n != 3:
        if np.any(w <= 0):
            raise ValueError(f"{name} must be positive definite")
        return np.diag(w[axes])
    if w.ndim == 1:
        if w.size != n or np.any(w <= 0):
            raise ValueError(f"{name} needs {n} positive entries")
        return np.diag(w)
    if w.shape != (n, n):
        raise ValueError(f"{name} must be {n}x{n}, got {w.shape}")
    if np.linalg.eigvalsh(0.5 * (w + w.T)).min(initial=1.0) <= 0:
        raise ValueError(f"{name} must be positive definite")
    return w


def _restrict(m, rows, cols):
    return m[rows][:, cols]


def _check_exact(mats):
    for k in range(len(mats) - 1):
        prod = (mats[k + 1] @ mats[k]).tocsr()
        prod.eliminate_zeros()
        if prod.nnz:
            raise CertificateViolationError(
                f"integer incidence composition {k + 1}.{k} is nonzero")


def _complex_from_incidence(mats, keeps, h, grams, tol):
    dims = [int(k.sum()) for k in keeps]
    spaces = [InnerProductSpace(n, g, name=name) for n, g, name in
              zip(dims, grams, ("vertices", "edges", "faces", "cells"))]
    maps = [LinearMap(spaces[k], spaces[k + 1], (m / h).tocsr()) for k, m in enumerate(mats)]
    return HilbertComplexSpec(spaces, maps, tol)


def grid_incidence(grid, bc="dirichlet"):
    """Integer (grad, curl, div) restricted to the kept entities, plus the keep masks."""
    bc = _parse_bc(bc)
    box = _CubicalBox(grid.shape)
    active = box.active(grid.cells)
    removed = box.closure_of_faces(bc.gamma0_mask(grid, box))
    keeps = [active[0] & ~removed[0], active[1] & ~removed[1],
             active[2] & ~removed[2], active[3]]
    return _incidence_on(box, keeps), keeps, box


def _incidence_on(box, keeps):
    full = (box.grad, box.curl, box.div)
    mats = [_restrict(full[k], keeps[k + 1], keeps[k]) for k in range(3)]
    _check_exact(mats)
    return mats


def build_derham(grid, bc="dirichlet", weights=None, tol=DEFAULT_RANK_TOL):
    """grad -> curl -> div complex on the kept entities of ``grid``.

    Slot Grams are ``(nu, epsilon, mu, kappa)``; with these the ``(0, 1)``
    block of the assembled skew operator is ``nu^{-1} div epsilon``.
    """
    mats, keeps, box = grid_incidence(grid, bc)
    weights = weights or MaterialWeights()
    dims = [int(k.sum()) for k in keeps]
    grams = [
        _gram(weights.nu, dims[0], name="nu"),
        _gram(weights.epsilon, dims[1], box.edge_axes()[keeps[1]], "epsilon"),
        _gram(weights.mu, dims[2], box.face_axes()[keeps[2]], "mu"),
        _gram(weights.kappa, dims[3], name="kappa"),
    ]
    return _complex_from_incidence(mats, keeps, grid.h, grams, tol)


def dual_grid_dirichlet(grid, tol=DEFAULT_RANK_TOL):
    """Dirichlet complex on the dual grid, whose cells sit at the primal vertices.

    A dual entity is kept exactly when its primal partner (the entity of
    complementary dimension sharing its centre) is active. Reversing this
    complex reproduces the primal Neumann complex up to permutation and sign.
    """
    primal = _CubicalBox(grid.shape)
    pv, pe, pf, pc = primal.active(grid.cells)
    nx, ny, nz = grid.shape
    dual = _CubicalBox((nx + 1, ny + 1, nz + 1))
    inner = (slice(1, -1),) * 3

    def pad_from(values, shape, region):
        out = np.zeros(shape, dtype=bool)
        out[region] = values
        return out.ravel()

    keep_v = pad_from(pc.reshape(primal.cell_shape), dual.vertex_shape, inner)
    keep_e, keep_f = [], []
    for ax in range(3):
        region = tuple(slice(None) if i == ax else slice(1, -1) for i in range(3))
        face_vals = pf[primal.F[ax].ravel()].reshape(primal.face_shapes[ax])
        keep_e.append(pad_from(face_vals, dual.edge_shapes[ax], region))
        region = tuple(slice(1, -1) if i == ax else slice(None) for i in range(3))
        edge_vals = pe[primal.E[ax].ravel()].reshape(primal.edge_shapes[ax])
        keep_f.append(pad_from(edge_vals, dual.face_shapes[ax], region))
    keep_c = pv.copy()
    keeps = [keep_v, np.concatenate(keep_e), np.concatenate(keep_f), keep_c]
    mats = _incidence_on(dual, keeps)
    return _complex_from_incidence(mats, keeps, grid.h, [None] * 4, tol)


def build_interval(n_interior, bc="dirichlet", length=1.0, tol=DEFAULT_RANK_TOL):
    """Single-map complex ``grad`` on a uniform grid of ``[0, length]``.

    There are ``n_interior`` interior nodes and ``n_interior + 1`` edges of
    width ``h = length / (n_interior + 1)``. Dirichlet keeps the interior
    nodes only, Neumann keeps all ``n_interior + 2`` nodes.
    """
    flavor = _parse_bc(bc).flavor
    n_edges = n_interior + 1
    h = length / n_edges
    full = sp.diags([-np.ones(n_edges), np.ones(n_edges)], [0, 1],
                    shape=(n_edges, n_edges + 1), dtype=np.int64).tocsr()
    if flavor == "dirichlet":
        full = full[:, 1:-1]
    elif flavor != "neumann":
        raise ValueError("interval complexes support dirichlet or neumann only")
    dom = InnerProductSpace(full.shape[1], name="vertices")
    cod = InnerProductSpace(n_edges, name="edges")
    return HilbertComplexSpec([dom, cod], [LinearMap(dom, cod, (full / h).tocsr())], tol)


# ---------------------------------------------------------- simplicial meshes

class OrientationError(ValueError):
    """Boundary of boundary does not vanish for the given simplices."""


def _parity(perm):
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


@dataclass(frozen=True, eq=False)
class SimplicialComplexMesh:
    """Oriented simplices by dimension; ``simplices[k]`` lists vertex tuples."""

    simplices: tuple
    vertices: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        simplices = tuple(tuple(tuple(int(v) for v in s) for s in level)
                          for level in self.simplices)
        object.__setattr__(self, "simplices", simplices)
        for k, level in enumerate(simplices):
            for s in level:
                if len(s) != k + 1 or len(set(s)) != k + 1:
                    raise OrientationError(f"bad {k}-simplex {s}")
            if len({frozenset(s) for s in level}) != len(level):
                raise OrientationError(f"duplicate {k}-simplices")
        for k in range(1, len(simplices)):
            lower = {frozenset(s) for s in simplices[k - 1]}
            for s in simplices[k]:
                for face in itertools.combinations(s, k):
                    if frozenset(face) not in lower:
                        raise OrientationError(f"face {face} of {s} is missing")
        bds = self.boundaries()
        for k in range(len(bds) - 1):
            prod = (bds[k] @ bds[k + 1]).tocsr()
            prod.eliminate_zeros()
            if prod.nnz:
                raise OrientationError(f"boundary composition {k}.{k + 1} is nonzero")

    @classmethod
    def from_top_simplices(cls, top, vertices=None):
        """Close a list of simplices under taking faces (faces get sorted orientation)."""
        top = [tuple(int(v) for v in s) for s in top]
        n = max(len(s) for s in top) - 1
        levels = [dict() for _ in range(n + 1)]
        for s in top:
            levels[len(s) - 1].setdefault(frozenset(s), s)
        for s in top:
            for k in range(len(s) - 1):
                for face in itertools.combinations(sorted(s), k + 1):
                    levels[k].setdefault(frozenset(face), face)
        simplices = tuple(tuple(sorted(level.values())) for level in levels)
        return cls(simplices, vertices)

    @property
    def dimension(self):
        return len(self.simplices) - 1

    def counts(self):
        return [len(level) for level in self.simplices]

    def boundaries(self):
        """Integer boundary matrices ``∂_k : C_k -> C_{k-1}`` for ``k = 1..n``."""
        index = [{frozenset(s): (i, s) for i, s in enumerate(level)}
                 for level in self.simplices]
        mats = []
        for k in range(1, len(self.simplices)):
            rows, cols, vals = [], [], []
            for j, s in enumerate(self.simplices[k]):
                for i in range(k + 1):
                    face = s[:i] + s[i + 1:]
                    r, stored = index[k - 1][frozenset(face)]
                    perm = [stored.index(v) for v in face]
                    rows.append(r)
                    cols.append(j)
                    vals.append((-1) ** i * _parity(perm))
            mats.append(sp.csr_matrix((vals, (rows, cols)),
                                      shape=(len(self.simplices[k - 1]), len(self.simplices[k])),
                                      dtype=np.int64))
        return mats

    def boundary_closure(self):
        """Masks of simplices lying in the closure of the boundary facets."""
        n = self.dimension
        masks = [np.zeros(len(level), dtype=bool) for level in self.simplices]
        if n == 0:
            return masks
        bds = self.boundaries()
        masks[n - 1] = np.asarray(abs(bds[n - 1]).sum(axis=1)).ravel() == 1
        for k in range(n - 1, 0, -1):
            masks[k - 1] = (abs(bds[k - 1]) @ masks[k]) > 0
        return masks


def build_forms_complex(mesh, bc="neumann", grams=None, tol=DEFAULT_RANK_TOL):
    """Exterior-derivative complex ``d_k = ∂_{k+1}^T`` on the mesh cochains."""
    flavor = _parse_bc(bc).flavor
    if mesh.dimension < 1:
        raise ValueError("mesh needs at least one edge")
    ds = [b.T.tocsr() for b in mesh.boundaries()]
    if flavor == "neumann":
        keeps = [np.ones(len(level), dtype=bool) for level in mesh.simplices]
    elif flavor == "dirichlet":
        keeps = [~m for m in mesh.boundary_closure()]
    else:
        raise ValueError("forms complexes support dirichlet or neumann only")
    mats = [_restrict(d, keeps[k + 1], keeps[k]) for k, d in enumerate(ds)]
    _check_exact(mats)
    grams = grams if grams is not None else [None] * len(keeps)
    dims = [int(k.sum()) for k in keeps]
    spaces = [InnerProductSpace(n, g, name=f"{k}-forms")
              for k, (n, g) in enumerate(zip(dims, grams))]
    maps = [LinearMap(spaces[k], spaces[k + 1], m.astype(float)) for k, m in enumerate(mats)]
    return HilbertComplexSpec(spaces, maps, tol)


def betti_numbers(spec, tol=None):
    """Slot cohomology dimensions; Betti numbers for Neumann de Rham builds."""
    return cohomology(spec, tol).dims


# ---------------------------------------------------------------- file formats

class FormatError(ValueError):
    """Malformed voxel or mesh file."""


def parse_voxels(text, h=1.0):
    """Parse ``'1'/'0'`` voxel text: blank-line separated z-slabs, rows along y, chars along x."""
    slabs, current = [], []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            if current:
                slabs.append(current)
                current = []
            continue
        if set(line) - {"0", "1"}:
            raise FormatError(f"unexpected characters in voxel row {raw!r}")
        current.append([c == "1" for c in line])
    if current:
        slabs.append(current)
    if not slabs:
        raise FormatError("no voxel data")
    ny, nx = len(slabs[0]), len(slabs[0][0])
    for slab in slabs:
        if len(slab) != ny or any(len(row) != nx for row in slab):
            raise FormatError("voxel slabs have inconsistent sizes")
    cells = np.array(slabs, dtype=bool).transpose(2, 1, 0)
    try:
        return GridDomain3D(cells, h)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def format_voxels(grid):
    c = grid.cells.transpose(2, 1, 0)
    slabs = ["\n".join("".join("1" if v else "0" for v in row) for row in slab) for slab in c]
    return "\n\n".join(slabs) + "\n"


def read_voxels(path, h=1.0):
    return parse_voxels(Path(path).read_text(), h)


def parse_mesh(text):
    """Parse ``v x y [z]`` vertex lines and ``s i j ...`` simplex lines."""
    coords, simplices = [], []
    for n, raw in enumerate(text.splitlines(), 1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        try:
            if parts[0] == "v":
                coords.append([float(p) for p in parts[1:]])
            elif parts[0] == "s":
                simplices.append([int(p) for p in parts[1:]])
                if not simplices[-1] or min(simplices[-1]) < 0:
                    raise FormatError(f"line {n}: bad simplex")
            else:
                raise FormatError(f"line {n}: unknown record {parts[0]!r}")
        except ValueError as exc:
            raise FormatError(f"line {n}: {exc}") from exc
    if not simplices:
        raise FormatError("mesh lists no simplices")
    vertices = np.array(coords) if coords else None
    if vertices is not None and max(max(s) for s in simplices) >= len(vertices):
        raise FormatError("simplex references an undefined vertex")
    return SimplicialComplexMesh.from_top_simplices(simplices, vertices)


def read_mesh(path):
    return parse_mesh(Path(path).read_text())
