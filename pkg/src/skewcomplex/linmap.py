"""Linear algebra on finite-dimensional spaces with weighted inner products.

Every space carries an SPD Gram matrix ``G`` so that ``<x, y> = x^T G y``.
Most computations are done in *whitened* coordinates ``z = L^T x`` where
``G = L L^T`` is the Cholesky factorisation; there the inner product is the
Euclidean one and adjoints are plain transposes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .exceptions import InvalidSpaceError, SpaceMismatchError

DEFAULT_RANK_TOL = 1e-10
DEFAULT_INTERSECT_TOL = 1e-8


def _as_matrix(entries):
    if sp.issparse(entries):
        return entries.toarray().astype(float)
    return np.asarray(entries, dtype=float)


class InnerProductSpace:
    """A real vector space ``R^dim`` with an SPD Gram matrix.

    Parameters
    ----------
    dim : int
        Dimension of the space.
    gram : array_like, optional
        Symmetric positive definite ``dim x dim`` matrix. Identity if omitted.
    name : str, optional
        Label used in reports.
    """

    def __init__(self, dim, gram=None, name=None):
        dim = int(dim)
        if dim < 0:
            raise InvalidSpaceError(f"dimension must be nonnegative, got {dim}")
        self.dim = dim
        self.name = name
        if gram is None:
            self._identity = True
            self.gram = np.eye(dim)
            self._chol = np.eye(dim)
        else:
            gram = _as_matrix(gram)
            if gram.shape != (dim, dim):
                raise InvalidSpaceError(
                    f"gram has shape {gram.shape}, expected {(dim, dim)}")
            scale = max(np.abs(gram).max(initial=0.0), 1.0)
            if np.abs(gram - gram.T).max(initial=0.0) > 1e-14 * scale:
                raise InvalidSpaceError("gram matrix is not symmetric")
            gram = 0.5 * (gram + gram.T)
            try:
                chol = sla.cholesky(gram, lower=True) if dim else np.eye(0)
            except np.linalg.LinAlgError as exc:
                raise InvalidSpaceError("gram matrix is not positive definite") from exc
            self._identity = bool(np.array_equal(gram, np.eye(dim)))
            self.gram = gram
            self._chol = chol
        self.gram.flags.writeable = False

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        kind = "identity" if self._identity else "weighted"
        return f"InnerProductSpace{label}(dim={self.dim}, gram={kind})"

    @property
    def is_euclidean(self):
        return self._identity

    @property
    def cholesky(self):
        """Lower Cholesky factor ``L`` with ``gram = L @ L.T``."""
        return self._chol

    def same_as(self, other):
        """True if ``other`` is this space or has the same dimension and Gram."""
        if other is self:
            return True
        return (isinstance(other, InnerProductSpace) and other.dim == self.dim
                and np.array_equal(other.gram, self.gram))

    def inner(self, x, y):
        return float(np.asarray(x) @ (self.gram @ np.asarray(y)))

    def norm(self, x):
        return float(np.linalg.norm(self.whiten(x)))

    def whiten(self, x):
        """Map to coordinates where the inner product is Euclidean: ``L^T x``."""
        x = np.asarray(x, dtype=float)
        if self._identity:
            return x.copy()
        return self._chol.T @ x

    def unwhiten(self, z):
        """Inverse of :meth:`whiten`: ``L^{-T} z``."""
        z = np.asarray(z, dtype=float)
        if self._identity or self.dim == 0:
            return z.copy()
        return sla.solve_triangular(self._chol, z, lower=True, trans="T")

    def solve_gram(self, b):
        """Return ``G^{-1} b`` through the Cholesky factor."""
        b = np.asarray(b, dtype=float)
        if self._identity or self.dim == 0:
            return b.copy()
        return sla.cho_solve((self._chol, True), b)


def _as_columns(a, rows):
    a = np.asarray(a, dtype=float)
    if a.ndim == 2 and a.shape[0] == rows:
        return a
    if rows == 0:
        return np.zeros((0, 0))
    return a.reshape(rows, -1)


def _check_same(u, v, what="spaces"):
    if not u.same_as(v):
        raise SpaceMismatchError(f"{what} differ: {u!r} vs {v!r}")


class LinearMap:
    """A matrix between two inner-product spaces.

    ``entries`` has shape ``(cod.dim, dom.dim)`` and may be dense or a scipy
    sparse matrix; both storages behave identically.
    """

    def __init__(self, dom, cod, entries):
        if sp.issparse(entries):
            entries = sp.csr_matrix(entries, dtype=float)
        else:
            entries = np.array(entries, dtype=float, ndmin=2)
            if entries.size == 0:
                entries = entries.reshape(cod.dim, dom.dim)
            entries.flags.writeable = False
        if entries.shape != (cod.dim, dom.dim):
            raise SpaceMismatchError(
                f"entries have shape {entries.shape}, expected {(cod.dim, dom.dim)}")
        self.dom = dom
        self.cod = cod
        self.entries = entries

    def __repr__(self):
        store = "sparse" if self.is_sparse else "dense"
        return f"LinearMap({self.cod.dim}x{self.dom.dim}, {store})"

    @classmethod
    def zero(cls, dom, cod):
        return cls(dom, cod, np.zeros((cod.dim, dom.dim)))

    @property
    def shape(self):
        return (self.cod.dim, self.dom.dim)

    @property
    def is_sparse(self):
        return sp.issparse(self.entries)

    @cached_property
    def matrix(self):
        """Dense copy of the entries."""
        m = _as_matrix(self.entries)
        m.flags.writeable = False
        return m

    @cached_property
    def whitened(self):
        """Matrix of the map between whitened coordinates, ``L_cod^T A L_dom^{-T}``."""
        m = self.cod.whiten(self.matrix)
        if not self.dom.is_euclidean and self.dom.dim:
            m = sla.solve_triangular(self.dom.cholesky, m.T, lower=True).T
        m = np.ascontiguousarray(m)
        m.flags.writeable = False
        return m

    @cached_property
    def opnorm(self):
        """Operator norm with respect to the Gram norms."""
        if 0 in self.shape:
            return 0.0
        return float(np.linalg.norm(self.whitened, 2))

    def __call__(self, x):
        return self.entries @ np.asarray(x, dtype=float)

    def is_zero(self):
        if self.is_sparse:
            return self.entries.count_nonzero() == 0
        return not np.any(self.entries)


def adjoint(a):
    """Gram-weighted adjoint ``a* = G_dom^{-1} a^T G_cod`` from ``a.cod`` to ``a.dom``."""
    if a.is_sparse and a.dom.is_euclidean and a.cod.is_euclidean:
        return LinearMap(a.cod, a.dom, a.entries.T)
    at = a.matrix.T
    if not a.cod.is_euclidean:
        at = at @ a.cod.gram
    return LinearMap(a.cod, a.dom, a.dom.solve_gram(at))


def compose(b, a):
    """Return ``b . a``; requires ``a.cod`` to be ``b.dom``."""
    _check_same(a.cod, b.dom, "a.cod and b.dom")
    if a.is_sparse and b.is_sparse:
        return LinearMap(a.dom, b.cod, b.entries @ a.entries)
    return LinearMap(a.dom, b.cod, b.matrix @ a.matrix)


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Gram-orthonormal basis (as matrix columns) of a subspace of ``space``."""

    space: InnerProductSpace
    columns: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "columns", _as_columns(self.columns, self.space.dim))

    @classmethod
    def from_whitened(cls, space, q):
        return cls(space, space.unwhiten(_as_columns(q, space.dim)))

    @classmethod
    def full(cls, space):
        return cls.from_whitened(space, np.eye(space.dim))

    @classmethod
    def empty(cls, space):
        return cls(space, np.zeros((space.dim, 0)))

    @classmethod
    def span(cls, space, vectors, tol=DEFAULT_RANK_TOL):
        """Orthonormal basis for the span of the columns of ``vectors``."""
        vectors = _as_columns(vectors, space.dim)
        ident = LinearMap(InnerProductSpace(vectors.shape[1]), space, vectors)
        return rank_and_kernel(ident, tol).range

    @property
    def dim(self):
        return self.columns.shape[1]

    @property
    def whitened(self):
        return self.space.whiten(self.columns)

    def projector(self):
        """Matrix of the Gram-orthogonal projector ``C C^T G``."""
        return self.columns @ (self.columns.T @ self.space.gram)

    def orthonormality_error(self):
        g = self.columns.T @ self.space.gram @ self.columns
        return float(np.abs(g - np.eye(self.dim)).max(initial=0.0))


class RankKernel(NamedTuple):
    rank: int
    kernel: SubspaceBasis
    range: SubspaceBasis


def _svd(m):
    rows, cols = m.shape
    if rows == 0 or cols == 0:
        return np.eye(rows), np.zeros(0), np.eye(cols)
    return np.linalg.svd(m, full_matrices=True)


def numerical_rank(singular_values, shape, tol=DEFAULT_RANK_TOL):
    if singular_values.size == 0:
        return 0
    threshold = tol * singular_values[0] * max(shape)
    return int(np.count_nonzero(singular_values > threshold))


def rank_and_kernel(a, tol=DEFAULT_RANK_TOL):
    """Numerical rank, kernel basis and range basis of ``a``.

    The rank counts singular values of the whitened matrix above
    ``tol * sigma_max * max(shape)``. Both bases are Gram-orthonormal.
    """
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    u, s, vt = _svd(a.whitened)
    r = numerical_rank(s, a.shape, tol)
    kernel = SubspaceBasis.from_whitened(a.dom, vt[r:].T)
    rng = SubspaceBasis.from_whitened(a.cod, u[:, :r])
    return RankKernel(r, kernel, rng)


def singular_values(a):
    """Gram-weighted singular values of ``a`` in descending order."""
    if 0 in a.shape:
        return np.zeros(0)
    return np.linalg.svd(a.whitened, compute_uv=False)


def project(onto, x):
    """Gram-orthogonal projection of ``x`` (vector or columns) onto a subspace."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != onto.space.dim:
        raise SpaceMismatchError(
            f"vector has length {x.shape[0]}, space has dimension {onto.space.dim}")
    c = onto.columns
    return c @ (c.T @ (onto.space.gram @ x))


def intersect(u, v, tol=DEFAULT_INTERSECT_TOL):
    """Orthonormal basis of ``span(u) ∩ span(v)``.

    Computed as the kernel of the stacked complements ``[I - P_u; I - P_v]``
    in whitened coordinates. Singular values of that stack lie in
    ``[0, sqrt(2)]``, so ``tol`` is an absolute threshold.
    """
    _check_same(u.space, v.space)
    n = u.space.dim
    if n == 0 or u.dim == 0 or v.dim == 0:
        return SubspaceBasis.empty(u.space)
    qu, qv = u.whitened, v.whitened
    eye = np.eye(n)
    stacked = np.vstack([eye - qu @ qu.T, eye - qv @ qv.T])
    _, s, vt = np.linalg.svd(stacked, full_matrices=True)
    # s has length n because the stack is (2n x n)
    keep = s <= tol
    return SubspaceBasis.from_whitened(u.space, vt[keep].T)


def subspace_distance(u, v):
    """Spectral-norm distance between the orthogonal projectors (0 iff equal spans)."""
    _check_same(u.space, v.space)
    if u.space.dim == 0:
        return 0.0
    qu, qv = u.whitened, v.whitened
    return float(np.linalg.norm(qu @ qu.T - qv @ qv.T, 2))


def orthogonal_complement(u):
    """Gram-orthogonal complement of a subspace."""
    n = u.space.dim
    if u.dim == 0:
        return SubspaceBasis.full(u.space)
    q = u.whitened
    full_q, _ = np.linalg.qr(q, mode="complete")
    return SubspaceBasis.from_whitened(u.space, full_q[:, u.dim:n])
