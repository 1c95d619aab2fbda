"""Finite-dimensional Hilbert complexes.

A complex is a chain ``H_0 --a_0--> H_1 --a_1--> ... --a_{N-1}--> H_N`` with
``a_{k+1} a_k = 0``. Slots and maps are indexed from zero; ``maps[k]`` goes
from ``spaces[k]`` to ``spaces[k+1]``. Outside the chain the maps are taken
to be zero, so the first and last slots use one-sided formulas.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import ChainInconsistencyError, CohomologyMismatchError
from .linmap import (
    DEFAULT_INTERSECT_TOL,
    DEFAULT_RANK_TOL,
    InnerProductSpace,
    LinearMap,
    SubspaceBasis,
    adjoint,
    compose,
    intersect,
    project,
    rank_and_kernel,
    singular_values,
)

_EMPTY = InnerProductSpace(0, name="zero")


@dataclass(frozen=True, eq=False)
class HilbertComplexSpec:
    """Ordered chain of maps over ``len(maps) + 1`` spaces."""

    spaces: tuple
    maps: tuple
    tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        spaces, maps = tuple(self.spaces), tuple(self.maps)
        object.__setattr__(self, "spaces", spaces)
        object.__setattr__(self, "maps", maps)
        if len(spaces) != len(maps) + 1:
            raise ChainInconsistencyError(
                f"{len(maps)} maps need {len(maps) + 1} spaces, got {len(spaces)}")
        for k, a in enumerate(maps):
            if not (a.dom.same_as(spaces[k]) and a.cod.same_as(spaces[k + 1])):
                raise ChainInconsistencyError(
                    f"map {k} goes {a.dom.dim} -> {a.cod.dim}, expected "
                    f"{spaces[k].dim} -> {spaces[k + 1].dim}")

    @classmethod
    def from_maps(cls, maps, tol=DEFAULT_RANK_TOL):
        """Build from maps alone, taking the spaces from their domains/codomains."""
        maps = tuple(maps)
        if not maps:
            raise ChainInconsistencyError("a complex needs at least one map")
        spaces = [m.dom for m in maps] + [maps[-1].cod]
        return cls(spaces, maps, tol)

    @classmethod
    def from_matrices(cls, matrices, grams=None, tol=DEFAULT_RANK_TOL):
        """Convenience constructor from raw matrices and optional Grams."""
        matrices = list(matrices)
        dims = [np.shape(matrices[0])[1]] + [np.shape(m)[0] for m in matrices]
        grams = grams if grams is not None else [None] * len(dims)
        spaces = [InnerProductSpace(n, g) for n, g in zip(dims, grams)]
        maps = [LinearMap(spaces[k], spaces[k + 1], m) for k, m in enumerate(matrices)]
        return cls(spaces, maps, tol)

    @property
    def length(self):
        """Number of maps (``N``)."""
        return len(self.maps)

    @property
    def dims(self):
        return [s.dim for s in self.spaces]

    def incoming(self, k):
        """The map into slot ``k`` (zero map from a 0-dim space for ``k == 0``)."""
        if k == 0:
            return LinearMap.zero(_EMPTY, self.spaces[0])
        return self.maps[k - 1]

    def outgoing(self, k):
        """The map out of slot ``k`` (zero map to a 0-dim space for the last slot)."""
        if k == self.length:
            return LinearMap.zero(self.spaces[k], _EMPTY)
        return self.maps[k]

    def _check_slot(self, k):
        if not 0 <= k <= self.length:
            raise IndexError(f"slot {k} out of range 0..{self.length}")


@dataclass
class ValidationReport:
    passed: bool
    residuals: list
    relative: list
    verdicts: list
    min_positive_singular: list
    closed: bool
    tol: float

    def to_dict(self):
        return {
            "passed": self.passed,
            "residuals": self.residuals,
            "relative_residuals": self.relative,
            "verdicts": self.verdicts,
            "min_positive_singular": self.min_positive_singular,
            "closed": self.closed,
            "tol": self.tol,
        }


def _relative(residual, scale):
    if residual == 0.0:
        return 0.0
    return residual / scale if scale > 0 else float("inf")


def composition_residual(b, a):
    """Max-abs entry of ``b a`` in whitened coordinates and the scale ``|b| |a|``.

    The product is formed from the raw entries first and then whitened, so an
    exact structural zero stays exactly zero.
    """
    raw = compose(b, a)
    if 0 in raw.shape:
        return 0.0, 0.0
    residual = float(np.abs(raw.whitened).max())
    return residual, b.opnorm * a.opnorm


def validate_complex(spec, tol=None):
    """Check ``a_{k+1} a_k = 0`` for every consecutive pair.

    Also records each map's smallest positive singular value; a positive
    value means the range is closed, which in finite dimensions always
    holds and is reported as ``closed``.
    """
    tol = spec.tol if tol is None else tol
    residuals, relative, verdicts = [], [], []
    for k in range(spec.length - 1):
        res, scale = composition_residual(spec.maps[k + 1], spec.maps[k])
        rel = _relative(res, scale)
        residuals.append(res)
        relative.append(rel)
        verdicts.append(bool(rel <= tol))
    gammas = []
    for a in spec.maps:
        s = singular_values(a)
        r = rank_and_kernel(a, spec.tol).rank
        gammas.append(float(s[r - 1]) if r else None)
    closed = all(g is None or g > 0 for g in gammas)
    return ValidationReport(all(verdicts), residuals, relative, verdicts,
                            gammas, closed, tol)


@dataclass
class CohomologyReport:
    dims: list
    bases: list = field(repr=False)


def cohomology(spec, tol=None, intersect_tol=DEFAULT_INTERSECT_TOL):
    """Harmonic spaces ``K_k = ker(a_k) ∩ ker(a_{k-1}^*)`` and their dimensions.

    Dimensions come from rank-nullity; bases come from a subspace
    intersection. The two must agree or :class:`CohomologyMismatchError` is
    raised. Only the spans of the bases are meaningful.
    """
    tol = spec.tol if tol is None else tol
    dims, bases = [], []
    for k in range(spec.length + 1):
        out = rank_and_kernel(spec.outgoing(k), tol)
        inc = rank_and_kernel(spec.incoming(k), tol)
        dim_rn = out.kernel.dim - inc.rank
        coker = rank_and_kernel(adjoint(spec.incoming(k)), tol).kernel
        basis = intersect(out.kernel, coker, intersect_tol)
        if basis.dim != dim_rn:
            raise CohomologyMismatchError(
                f"slot {k}: rank-nullity gives {dim_rn}, intersection gives {basis.dim}")
        dims.append(dim_rn)
        bases.append(basis)
    return CohomologyReport(dims, bases)


class HodgeParts(NamedTuple):
    exact: np.ndarray
    harmonic: np.ndarray
    coexact: np.ndarray


def hodge_decompose(spec, k, x, tol=None):
    """Split ``x`` in slot ``k`` into exact, harmonic and coexact parts.

    ``exact`` lies in ``ran(a_{k-1})``, ``coexact`` in ``ran(a_k^*)`` and the
    remainder ``harmonic`` in ``K_k``.
    """
    spec._check_slot(k)
    tol = spec.tol if tol is None else tol
    x = np.asarray(x, dtype=float)
    exact_basis = rank_and_kernel(spec.incoming(k), tol).range
    coexact_basis = rank_and_kernel(adjoint(spec.outgoing(k)), tol).range
    exact = project(exact_basis, x)
    coexact = project(coexact_basis, x)
    return HodgeParts(exact, x - exact - coexact, coexact)


def hodge_laplacian(spec, k):
    """``a_{k-1} a_{k-1}^* + a_k^* a_k`` on slot ``k``."""
    spec._check_slot(k)
    inc, out = spec.incoming(k), spec.outgoing(k)
    down = compose(inc, adjoint(inc)).matrix
    up = compose(adjoint(out), out).matrix
    return LinearMap(spec.spaces[k], spec.spaces[k], down + up)


def dual_complex(spec):
    """The reversed chain of adjoints ``(a_{N-1}^*, ..., a_0^*)``."""
    maps = [adjoint(a) for a in reversed(spec.maps)]
    return HilbertComplexSpec(tuple(reversed(spec.spaces)), maps, spec.tol)


def _random_gram(n, rng):
    b = rng.standard_normal((n, n))
    return b @ b.T / max(n, 1) + np.eye(n)


def random_complex(dims, ranks, seed=0, weighted=False, sigma_range=(0.5, 2.0),
                   tol=DEFAULT_RANK_TOL):
    """Random exact complex with prescribed slot dimensions and map ranks.

    Inside slot ``k`` a Gram-orthonormal frame is split into ``U_k`` (the
    range of the incoming map, ``ranks[k-1]`` columns) and ``V_k`` (the
    coimage of the outgoing map, ``ranks[k]`` columns); then
    ``a_k = U_{k+1} diag(sigma) V_k^T G_k``. The harmonic dimension of slot
    ``k`` is ``dims[k] - ranks[k-1] - ranks[k]``.
    """
    dims = [int(n) for n in dims]
    ranks = [int(r) for r in ranks]
    if len(ranks) != len(dims) - 1 or not ranks:
        raise ValueError("need len(ranks) == len(dims) - 1 >= 1")
    padded = [0] + ranks + [0]
    for k, n in enumerate(dims):
        if min(padded[k], padded[k + 1]) < 0 or padded[k] + padded[k + 1] > n:
            raise ValueError(
                f"infeasible ranks at slot {k}: {padded[k]} + {padded[k + 1]} > {n}")
    rng = np.random.default_rng(seed)
    spaces, frames = [], []
    for k, n in enumerate(dims):
        gram = _random_gram(n, rng) if weighted else None
        space = InnerProductSpace(n, gram)
        m = padded[k] + padded[k + 1]
        q, _ = np.linalg.qr(rng.standard_normal((n, m)))
        cols = space.unwhiten(q)
        spaces.append(space)
        frames.append((cols[:, :padded[k]], cols[:, padded[k]:]))
    maps = []
    for k, r in enumerate(ranks):
        u = frames[k + 1][0]
        v = frames[k][1]
        sigma = rng.uniform(*sigma_range, size=r)
        entries = (u * sigma) @ (v.T @ spaces[k].gram)
        maps.append(LinearMap(spaces[k], spaces[k + 1], entries))
    return HilbertComplexSpec(spaces, maps, tol)


def corrupt_complex(spec, k, magnitude=0.1, seed=0):
    """Break the complex property between maps ``k - 1`` and ``k`` by editing map ``k``.

    Adds ``magnitude * |a_k|`` times a rank-one term that sends a unit vector
    of ``ran(a_{k-1})`` to a unit vector of ``ker(a_{k+1})`` (when that kernel
    is nontrivial), so only the pair ``(k-1, k)`` is damaged.
    """
    if not 1 <= k < spec.length:
        raise ValueError(f"map index {k} must lie in 1..{spec.length - 1}")
    rng = np.random.default_rng(seed)
    prev, cur = spec.maps[k - 1], spec.maps[k]
    src = rank_and_kernel(prev, spec.tol).range
    if src.dim == 0:
        raise ValueError(f"map {k - 1} is zero, nothing to corrupt against")
    y = src.columns @ rng.standard_normal(src.dim)
    y /= spec.spaces[k].norm(y)
    target_space = spec.spaces[k + 1]
    targets = (rank_and_kernel(spec.maps[k + 1], spec.tol).kernel
               if k + 1 < spec.length else SubspaceBasis.full(target_space))
    if targets.dim:
        w = targets.columns @ rng.standard_normal(targets.dim)
    else:
        w = target_space.unwhiten(rng.standard_normal(target_space.dim))
    w /= target_space.norm(w)
    scale = magnitude * (cur.opnorm if cur.opnorm > 0 else 1.0)
    bump = scale * np.outer(w, spec.spaces[k].gram @ y)
    maps = list(spec.maps)
    maps[k] = LinearMap(cur.dom, cur.cod, cur.matrix + bump)
    return HilbertComplexSpec(spec.spaces, maps, spec.tol)


def zero_complex(dims, tol=DEFAULT_RANK_TOL):
    spaces = [InnerProductSpace(n) for n in dims]
    maps = [LinearMap.zero(spaces[k], spaces[k + 1]) for k in range(len(dims) - 1)]
    return HilbertComplexSpec(spaces, maps, tol)
