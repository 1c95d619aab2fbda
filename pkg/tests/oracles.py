"""Independent reference computations used by the tests.

Nothing here imports the package: cubical and simplicial chains are rebuilt
from scratch and ranks are taken exactly over a prime field.
"""
from itertools import combinations, product

import numpy as np

PRIME = 2_147_483_629  # below 2**31, so products of residues fit in int64


def rank_mod_p(m, p=PRIME):
    """Exact rank of an integer matrix over GF(p) by Gaussian elimination."""
    a = np.array(m, dtype=np.int64) % p
    rows, cols = a.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        nz = np.nonzero(a[rank:, c])[0]
        if nz.size == 0:
            continue
        piv = rank + nz[0]
        a[[rank, piv]] = a[[piv, rank]]
        inv = pow(int(a[rank, c]), p - 2, p)
        a[rank] = (a[rank] * inv) % p
        others = np.nonzero(a[:, c])[0]
        others = others[others != rank]
        if others.size:
            f = a[others, c][:, None]
            a[others] = (a[others] - (f * a[rank][None, :]) % p) % p
        rank += 1
    return rank


def betti_from_boundaries(counts, boundaries):
    """``b_k = n_k - rank d_k - rank d_{k+1}`` where ``boundaries[k]`` maps k-chains to (k-1)-chains."""
    ranks = [rank_mod_p(b) if b.size else 0 for b in boundaries] + [0]
    return [counts[k] - (ranks[k - 1] if k else 0) - ranks[k] for k in range(len(counts))]


# ---------------------------------------------------------------- cubical sets

def _cube_faces(cube):
    """Signed codimension-one faces of an elementary cube ``(anchor, axes)``."""
    anchor, axes = cube
    out = []
    for j, ax in enumerate(axes):
        rest = tuple(a for a in axes if a != ax)
        upper = list(anchor)
        upper[ax] += 1
        sign = (-1) ** j
        out.append(((tuple(upper), rest), sign))
        out.append(((anchor, rest), -sign))
    return out


def cubical_chains(mask):
    """Closure of the active unit cubes of ``mask`` as lists of cubes per dimension."""
    mask = np.asarray(mask, dtype=bool)
    top = {(tuple(int(v) for v in idx), (0, 1, 2)) for idx in np.argwhere(mask)}
    levels = [set(), set(), set(), top]
    for d in (3, 2, 1):
        for cube in levels[d]:
            for face, _ in _cube_faces(cube):
                levels[d - 1].add(face)
    return [sorted(level) for level in levels]


def _boundary_matrices(levels):
    index = [{c: i for i, c in enumerate(level)} for level in levels]
    mats = []
    for d in range(1, len(levels)):
        m = np.zeros((len(levels[d - 1]), len(levels[d])), dtype=np.int64)
        for j, cube in enumerate(levels[d]):
            for face, sign in _cube_faces(cube):
                if face in index[d - 1]:
                    m[index[d - 1][face], j] += sign
        mats.append(m)
    return mats


def cubical_betti(mask, relative=False):
    """Betti numbers of the cubical set, or relative to its boundary when ``relative``.

    The absolute numbers are the Neumann cohomology dims in slot order; the
    relative ones are the Dirichlet dims.
    """
    levels = cubical_chains(mask)
    if relative:
        top = levels[3]
        cofaces = {}
        for cube in top:
            for face, _ in _cube_faces(cube):
                cofaces[face] = cofaces.get(face, 0) + 1
        boundary = [[], [], [f for f, c in cofaces.items() if c == 1], []]
        for d in (2, 1):
            for cube in boundary[d]:
                boundary[d - 1].extend(f for f, _ in _cube_faces(cube))
        drop = [set(b) for b in boundary]
        levels = [[c for c in level if c not in drop[d]] for d, level in enumerate(levels)]
    mats = _boundary_matrices(levels)
    return betti_from_boundaries([len(level) for level in levels], mats)


def cubical_counts(mask):
    levels = cubical_chains(mask)
    return [len(level) for level in levels]


# -------------------------------------------------------------- simplicial sets

def simplicial_betti(top_simplices):
    """Absolute Betti numbers of the closure of ``top_simplices``."""
    dim = max(len(s) for s in top_simplices) - 1
    levels = [set() for _ in range(dim + 1)]
    for s in top_simplices:
        s = tuple(sorted(s))
        for k in range(1, len(s) + 1):
            levels[k - 1].update(combinations(s, k))
    levels = [sorted(level) for level in levels]
    index = [{s: i for i, s in enumerate(level)} for level in levels]
    mats = []
    for k in range(1, dim + 1):
        m = np.zeros((len(levels[k - 1]), len(levels[k])), dtype=np.int64)
        for j, s in enumerate(levels[k]):
            for i in range(len(s)):
                m[index[k - 1][s[:i] + s[i + 1:]], j] += (-1) ** i
        mats.append(m)
    return betti_from_boundaries([len(level) for level in levels], mats)


# ------------------------------------------------------------------ dense tools

def dense_block_operator(matrices, sign=-1.0):
    """Tridiagonal block matrix of Euclidean maps, assembled entry by entry."""
    dims = [matrices[0].shape[1]] + [m.shape[0] for m in matrices]
    offs = np.concatenate([[0], np.cumsum(dims)])
    s = np.zeros((offs[-1], offs[-1]))
    for k, m in enumerate(matrices):
        for i, j in product(range(m.shape[0]), range(m.shape[1])):
            s[offs[k + 1] + i, offs[k] + j] = m[i, j]
            s[offs[k] + j, offs[k + 1] + i] = sign * m[i, j]
    return s


def dirichlet_laplacian_7pt(n_inner, h):
    """Finite-difference Dirichlet Laplacian ``-Δ`` on an ``n^3`` block of interior nodes."""
    n = n_inner
    idx = {p: i for i, p in enumerate(product(range(n), repeat=3))}
    lap = np.zeros((n**3, n**3))
    for p, i in idx.items():
        lap[i, i] = 6.0
        for ax in range(3):
            for step in (-1, 1):
                q = list(p)
                q[ax] += step
                j = idx.get(tuple(q))
                if j is not None:
                    lap[i, j] = -1.0
    return lap / h**2
