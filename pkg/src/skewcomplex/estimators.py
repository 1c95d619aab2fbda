"""scikit-learn style transformers over Hilbert complexes.

Rows of ``X`` are vectors of one slot (or of the product space). ``fit``
computes the projectors, ``transform`` applies them, so the decompositions
drop into pipelines and ``clone``/``get_params`` work as usual.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .annihilating import build, range_bases
from .complexes import HilbertComplexSpec, cohomology
from .linmap import DEFAULT_RANK_TOL, adjoint, rank_and_kernel

_PARTS = ("exact", "harmonic", "coexact")


def _check_rows(X, dim, estimator):
    X = check_array(X, dtype=float, ensure_min_samples=1)
    if X.shape[1] != dim:
        raise ValueError(f"X has {X.shape[1]} features, but {type(estimator).__name__} "
                         f"expects {dim}")
    return X


class HodgeProjector(TransformerMixin, BaseEstimator):
    """Project slot vectors onto their exact, harmonic or coexact part.

    Parameters
    ----------
    complex : HilbertComplexSpec
        The chain whose slot is decomposed.
    slot : int, default=0
        Slot index (0-based).
    component : {"exact", "harmonic", "coexact"}, default="harmonic"
        Which part ``transform`` returns.
    tol : float, default=1e-10
        Relative rank threshold.
    """

    def __init__(self, complex=None, slot=0, component="harmonic", tol=DEFAULT_RANK_TOL):
        self.complex = complex
        self.slot = slot
        self.component = component
        self.tol = tol

    def fit(self, X=None, y=None):
        if not isinstance(self.complex, HilbertComplexSpec):
            raise TypeError("complex must be a HilbertComplexSpec")
        if self.component not in _PARTS:
            raise ValueError(f"component must be one of {_PARTS}")
        spec, k = self.complex, self.slot
        spec._check_slot(k)
        space = spec.spaces[k]
        if X is not None:
            _check_rows(X, space.dim, self)
        self.exact_basis_ = rank_and_kernel(spec.incoming(k), self.tol).range
        self.coexact_basis_ = rank_and_kernel(adjoint(spec.outgoing(k)), self.tol).range
        self.harmonic_basis_ = cohomology(spec, self.tol).bases[k]
        self.n_features_in_ = space.dim
        self.harmonic_dim_ = self.harmonic_basis_.dim
        return self

    def transform(self, X):
        check_is_fitted(self, "harmonic_basis_")
        X = _check_rows(X, self.n_features_in_, self)
        exact = X @ self.exact_basis_.projector().T
        coexact = X @ self.coexact_basis_.projector().T
        if self.component == "exact":
            return exact
        if self.component == "coexact":
            return coexact
        return X - exact - coexact


class HelmholtzProjector(TransformerMixin, BaseEstimator):
    """Project product-space vectors onto ``ker(S)`` or onto one ``ran(S_k)``.

    ``component`` is ``"kernel"`` or the integer index of a part.
    """

    def __init__(self, complex=None, component="kernel", mode="skew", tol=DEFAULT_RANK_TOL):
        self.complex = complex
        self.component = component
        self.mode = mode
        self.tol = tol

    def fit(self, X=None, y=None):
        if not isinstance(self.complex, HilbertComplexSpec):
            raise TypeError("complex must be a HilbertComplexSpec")
        op = build(self.complex, self.mode)
        if self.component != "kernel" and not (
                isinstance(self.component, (int, np.integer))
                and 0 <= self.component < op.length):
            raise ValueError("component must be 'kernel' or a part index")
        if X is not None:
            _check_rows(X, op.space.dim, self)
        self.operator_ = op
        self.range_projectors_ = [b.projector() for b in range_bases(op, self.tol)]
        self.n_features_in_ = op.space.dim
        return self

    def transform(self, X):
        check_is_fitted(self, "operator_")
        X = _check_rows(X, self.n_features_in_, self)
        if self.component == "kernel":
            return X - sum(X @ p.T for p in self.range_projectors_)
        return X @ self.range_projectors_[self.component].T
