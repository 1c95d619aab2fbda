"""Skew-selfadjoint block operators built from a Hilbert complex.

For a chain ``(a_0, ..., a_{N-1})`` on slots ``H_0, ..., H_N`` the part
``S_k`` lives on the product space and carries ``a_k`` in block
``(k+1, k)`` and ``-a_k^*`` in block ``(k, k+1)`` (``+a_k^*`` in the
symmetric variant). The parts pairwise annihilate exactly when the chain is
a complex.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .complexes import cohomology, hodge_laplacian, validate_complex
from .exceptions import CertificateViolationError, TheoremViolationError
from .linmap import (
    DEFAULT_RANK_TOL,
    InnerProductSpace,
    LinearMap,
    adjoint,
    project,
    rank_and_kernel,
    singular_values,
    subspace_distance,
)

MODES = ("skew", "sym")


class ProductSpace:
    """Cartesian product ``H_0 x ... x H_N`` with block-diagonal Gram."""

    def __init__(self, slots):
        self.slots = tuple(slots)
        dims = [s.dim for s in self.slots]
        self.offsets = tuple(int(o) for o in np.concatenate([[0], np.cumsum(dims)]))
        if all(s.is_euclidean for s in self.slots):
            self.space = InnerProductSpace(self.offsets[-1], name="product")
        else:
            gram = sla.block_diag(*[s.gram for s in self.slots]) if dims else None
            self.space = InnerProductSpace(self.offsets[-1], gram, name="product")

    @property
    def dim(self):
        return self.offsets[-1]

    def block(self, k):
        return slice(self.offsets[k], self.offsets[k + 1])

    def split(self, x):
        x = np.asarray(x)
        return [x[self.block(k)] for k in range(len(self.slots))]

    def embed(self, k, xk):
        """Vector of the product space that is ``xk`` in slot ``k`` and zero elsewhere."""
        x = np.zeros(self.dim)
        x[self.block(k)] = xk
        return x


class SkewBlockOperator:
    """Sum ``S = S_0 + ... + S_{N-1}`` together with its parts.

    Instances are treated as immutable. Factorised component resolvents are
    cached per instance (see :mod:`skewcomplex.factorization`).
    """

    def __init__(self, space, parts, total, mode, source=None):
        self.space = space
        self.parts = tuple(parts)
        self.sum = total
        self.mode = mode
        self.source = source
        self._cache_lock = threading.Lock()
        self._resolvent_cache = {}

    def __repr__(self):
        return (f"SkewBlockOperator(N={len(self.parts)}, dim={self.space.dim}, "
                f"mode={self.mode!r})")

    @property
    def length(self):
        return len(self.parts)

    @property
    def tol(self):
        return self.source.tol if self.source is not None else DEFAULT_RANK_TOL

    @property
    def chain(self):
        """The maps ``a_k`` the operator was assembled from."""
        return self.source.maps


def _embed_blocks(ps, blocks):
    m = np.zeros((ps.dim, ps.dim))
    for (i, j), b in blocks.items():
        m[ps.block(i), ps.block(j)] = b
    return m


def build(spec, mode="skew"):
    """Assemble ``S_k = A_k - A_k^*`` (or ``A_k + A_k^*`` for ``mode='sym'``)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    sign = -1.0 if mode == "skew" else 1.0
    ps = ProductSpace(spec.spaces)
    parts = []
    for k, a in enumerate(spec.maps):
        m = _embed_blocks(ps, {(k + 1, k): a.matrix,
                               (k, k + 1): sign * adjoint(a).matrix})
        parts.append(LinearMap(ps.space, ps.space, m))
    total = (np.sum([p.matrix for p in parts], axis=0) if parts
             else np.zeros((ps.dim, ps.dim)))
    return SkewBlockOperator(ps, parts, LinearMap(ps.space, ps.space, total),
                             mode, spec)


def symmetry_defect(op):
    """Max over parts of ``|S_k^* -/+ S_k|`` relative to ``|S_k|`` (Gram-weighted)."""
    sign = 1.0 if op.mode == "skew" else -1.0
    worst = 0.0
    for p in op.parts + (op.sum,):
        w = p.whitened
        scale = max(np.abs(w).max(initial=0.0), 1e-300)
        worst = max(worst, float(np.abs(w.T + sign * w).max(initial=0.0)) / scale)
    return worst


@dataclass
class AnnihilationCertificate:
    residuals: dict
    relative: dict
    commutators: dict
    verdicts: dict
    passed: bool
    tol: float

    def max_relative(self):
        return max(self.relative.values(), default=0.0)

    def to_dict(self):
        def keyed(d):
            return {f"{k},{l}": v for (k, l), v in sorted(d.items())}
        return {
            "passed": self.passed,
            "tol": self.tol,
            "residuals": keyed(self.residuals),
            "relative_residuals": keyed(self.relative),
            "commutator_residuals": keyed(self.commutators),
            "verdicts": keyed(self.verdicts),
        }


def _products(op):
    w = [p.whitened for p in op.parts]
    return {(k, l): w[k] @ w[l] for k in range(len(w)) for l in range(len(w))}


def verify_annihilating(op, tol=None):
    """Compute ``|S_k S_l|`` for every ordered pair ``k != l``.

    Products are taken in whitened coordinates so a structural zero does not
    depend on the Grams. Also records ``|S_k S_l - S_l S_k|``.
    """
    tol = op.tol if tol is None else tol
    prods = _products(op)
    norms = [p.opnorm for p in op.parts]
    residuals, relative, commutators, verdicts = {}, {}, {}, {}
    for (k, l), m in prods.items():
        if k == l:
            continue
        res = float(np.abs(m).max(initial=0.0))
        scale = norms[k] * norms[l]
        rel = 0.0 if res == 0.0 else (res / scale if scale > 0 else float("inf"))
        residuals[(k, l)] = res
        relative[(k, l)] = rel
        commutators[(k, l)] = float(np.abs(m - prods[(l, k)]).max(initial=0.0))
        verdicts[(k, l)] = bool(rel <= tol)
    return AnnihilationCertificate(residuals, relative, commutators, verdicts,
                                   all(verdicts.values()), tol)


@dataclass
class EquivalenceReport:
    complex_holds: bool
    annihilation_holds: bool
    agree: bool
    validation: object = field(repr=False)
    certificate: object = field(repr=False)

    def to_dict(self):
        return {
            "complex_holds": self.complex_holds,
            "annihilation_holds": self.annihilation_holds,
            "agree": self.agree,
            "validation": self.validation.to_dict(),
            "certificate": self.certificate.to_dict(),
        }


def equivalence_check(spec, tol=None, strict=False):
    """Run both sides of the complex/annihilating-set equivalence.

    ``agree`` is always expected to be true; with ``strict=True`` a
    disagreement raises :class:`TheoremViolationError`.
    """
    validation = validate_complex(spec, tol)
    cert = verify_annihilating(build(spec, "skew"), tol)
    report = EquivalenceReport(validation.passed, cert.passed,
                               validation.passed == cert.passed, validation, cert)
    if strict and not report.agree:
        raise TheoremViolationError(
            f"complex check {validation.passed} but annihilation check {cert.passed}")
    return report


@dataclass
class HelmholtzComponents:
    kernel: np.ndarray
    ranges: list

    def total(self):
        return self.kernel + np.sum(self.ranges, axis=0)


def range_bases(op, tol=None):
    tol = op.tol if tol is None else tol
    return [rank_and_kernel(p, tol).range for p in op.parts]


def generalized_helmholtz(op, x, tol=None):
    """Split ``x`` into its ``ker(S)`` part and one part per ``ran(S_k)``."""
    x = np.asarray(x, dtype=float)
    ranges = [project(b, x) for b in range_bases(op, tol)]
    kernel = x - np.sum(ranges, axis=0) if ranges else x.copy()
    return HelmholtzComponents(kernel, ranges)


def _target(op, part):
    return op.sum if part is None else op.parts[part]


def poincare_constant(op, part=None, tol=None):
    """Smallest ``c`` with ``|x| <= c |S x|`` on ``ker(S)^perp``.

    ``part`` selects a single component ``S_k`` instead of the sum.
    """
    tol = op.tol if tol is None else tol
    s = singular_values(_target(op, part))
    r = rank_and_kernel(_target(op, part), tol).rank
    if r == 0:
        raise ValueError("operator is zero; no Poincare constant")
    return 1.0 / float(s[r - 1])


def extremal_vector(op, part=None, tol=None):
    """Unit vector of ``ker(S)^perp`` attaining the Poincare constant."""
    tol = op.tol if tol is None else tol
    target = _target(op, part)
    r = rank_and_kernel(target, tol).rank
    _, _, vt = np.linalg.svd(target.whitened)
    return target.dom.unwhiten(vt[r - 1])


@dataclass
class FredholmReport:
    dim_ker: int
    dim_coker: int
    index: int
    rank: int
    orthogonality: float
    dims_add_up: bool

    def to_dict(self):
        return dict(self.__dict__)


def fredholm_report(op, tol=None):
    """Kernel/cokernel dimensions of ``S`` and the check ``H = ran(S) ⊕ ker(S)``.

    The cokernel dimension is computed from the adjoint, independently of the
    kernel computation.
    """
    tol = op.tol if tol is None else tol
    direct = rank_and_kernel(op.sum, tol)
    dual = rank_and_kernel(adjoint(op.sum), tol)
    n = op.space.dim
    dim_coker = n - dual.rank
    g = op.space.space.gram
    cross = direct.range.columns.T @ g @ direct.kernel.columns
    ortho = float(np.abs(cross).max(initial=0.0))
    return FredholmReport(direct.kernel.dim, dim_coker, direct.kernel.dim - dim_coker,
                          direct.rank, ortho, direct.rank + direct.kernel.dim == n)


@dataclass
class IsoReport:
    condition_number: float
    min_singular: float
    max_singular: float
    bijective: bool
    subspace_residual: float


def restricted_iso(op, k, tol=None):
    """Restriction of ``S_k`` to ``ker(S_k)^perp -> ran(S_k)``.

    Returns its conditioning and checks ``ran(S_k) = ker(S_k)^perp``.
    """
    tol = op.tol if tol is None else tol
    part = op.parts[k]
    rk = rank_and_kernel(part, tol)
    if rk.rank == 0:
        raise ValueError(f"part {k} is zero")
    coimage = rank_and_kernel(adjoint(part), tol).range
    g = op.space.space.gram
    restricted = rk.range.columns.T @ g @ part.matrix @ coimage.columns
    s = np.linalg.svd(restricted, compute_uv=False)
    r = rank_and_kernel(LinearMap(InnerProductSpace(s.size), InnerProductSpace(s.size),
                                  restricted), tol).rank
    ker_perp_dist = subspace_distance(rk.range, coimage)
    return IsoReport(float(s[0] / s[-1]), float(s[-1]), float(s[0]),
                     r == s.size and restricted.shape[0] == restricted.shape[1],
                     ker_perp_dist)


def s_squared_blocks(op, tol=1e-12):
    """Diagonal blocks of ``-S^2``; raises if an off-diagonal block is nonzero."""
    m = -(op.sum.matrix @ op.sum.matrix)
    ps = op.space
    n = len(ps.slots)
    scale = max(np.abs(m).max(initial=0.0), 1e-300)
    for i in range(n):
        for j in range(n):
            if i != j:
                off = np.abs(m[ps.block(i), ps.block(j)]).max(initial=0.0)
                if off > tol * scale:
                    raise CertificateViolationError(
                        f"-S^2 has nonzero block ({i}, {j}): {off:.3e}")
    return [LinearMap(ps.slots[i], ps.slots[i], m[ps.block(i), ps.block(i)])
            for i in range(n)]


def laplacian_mismatch(op):
    """Largest relative gap between the blocks of ``-S^2`` and the slot Laplacians."""
    worst = 0.0
    for k, block in enumerate(s_squared_blocks(op, tol=np.inf)):
        ref = hodge_laplacian(op.source, k).matrix
        scale = max(np.abs(ref).max(initial=0.0), 1.0)
        worst = max(worst, float(np.abs(block.matrix - ref).max(initial=0.0)) / scale)
    return worst


def appendix_product_table(op, tol=0.0):
    """Nonzero block positions of every product ``S_k S_l``.

    A block counts as nonzero when its max-abs entry exceeds
    ``tol * |S_k| |S_l|``; with ``tol=0`` any nonzero entry counts.
    """
    ps = op.space
    n = len(ps.slots)
    table = {}
    norms = [p.opnorm for p in op.parts]
    for (k, l), m in _products(op).items():
        cut = tol * norms[k] * norms[l]
        table[(k, l)] = [(i, j) for i in range(n) for j in range(n)
                         if np.abs(m[ps.block(i), ps.block(j)]).max(initial=0.0) > cut]
    return table


def kernel_product_residual(op, x_kernel, harmonic_bases=None, scale=None):
    """Max slot-wise distance of a ``ker(S)`` vector from the harmonic spaces ``K_k``.

    Distances are divided by ``scale`` (default: the norm of ``x_kernel``).
    """
    if harmonic_bases is None:
        harmonic_bases = cohomology(op.source).bases
    worst = 0.0
    if scale is None:
        scale = op.space.space.norm(x_kernel)
    scale = max(scale, 1e-300)
    for k, xk in enumerate(op.space.split(x_kernel)):
        space = op.space.slots[k]
        resid = xk - project(harmonic_bases[k], xk) if space.dim else xk
        worst = max(worst, space.norm(resid) / scale if space.dim else 0.0)
    return worst


def kernel_basis(op, tol=None):
    tol = op.tol if tol is None else tol
    return rank_and_kernel(op.sum, tol).kernel
