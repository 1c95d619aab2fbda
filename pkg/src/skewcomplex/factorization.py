"""Resolvent factorisation through the annihilating parts and time stepping.

With ``T = tau * I`` and pairwise annihilating parts ``S_k``::

    prod_k (tau + S_k) = tau^N + tau^(N-1) S

so ``(tau + S)^{-1} = tau^(N-1) prod_k (tau + S_k)^{-1}`` and, for one part,
``(tau + S_l)^{-1} = prod_{k != l} (1 + S_k / tau) (tau + S)^{-1}``.
Each ``tau + S_k`` is the identity times ``tau`` outside slots ``k, k+1``, so
its solve reduces to one factorised two-slot block.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .exceptions import CertificateViolationError, SingularSystemError

SCHEMES = ("monolithic-implicit-euler", "factored-implicit-euler", "cayley")


def _lu(m):
    try:
        factors = sla.lu_factor(m, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularSystemError(str(exc)) from exc
    if np.any(np.diag(factors[0]) == 0):
        raise SingularSystemError("shifted operator is singular")
    return factors


def _cached(op, key, build):
    # equal keys always produce identical factors, so a lost race is harmless
    cache = op._resolvent_cache
    hit = cache.get(key)
    if hit is not None:
        return hit
    value = build()
    with op._cache_lock:
        return cache.setdefault(key, value)


def _component_factors(op, k, tau):
    def build():
        ps = op.space
        lo, hi = ps.offsets[k], ps.offsets[k + 2]
        block = op.parts[k].matrix[lo:hi, lo:hi]
        return _lu(tau * np.eye(hi - lo) + block)
    return _cached(op, ("part", k, float(tau)), build)


def _full_factors(op, tau):
    return _cached(op, ("sum", float(tau)),
                   lambda: _lu(tau * np.eye(op.space.dim) + op.sum.matrix))


def _check_tau(tau):
    if not tau > 0:
        raise ValueError(f"tau must be strictly positive, got {tau}")


def component_solve(op, k, tau, b):
    """Solve ``(tau + S_k) x = b`` using the cached two-slot factorisation."""
    _check_tau(tau)
    b = np.asarray(b, dtype=float)
    ps = op.space
    lo, hi = ps.offsets[k], ps.offsets[k + 2]
    x = b / tau
    x[lo:hi] = sla.lu_solve(_component_factors(op, k, tau), b[lo:hi])
    return x


def direct_resolvent_apply(op, tau, b):
    """Solve ``(tau + S) x = b`` with one dense factorisation."""
    _check_tau(tau)
    return sla.lu_solve(_full_factors(op, tau), np.asarray(b, dtype=float))


def _relative_gap(x, y):
    scale = np.linalg.norm(y)
    gap = np.linalg.norm(x - y)
    return gap / scale if scale > 0 else gap


def factored_resolvent_apply(op, tau, b, order=None, check=False, tol=1e-10):
    """``tau^(N-1) (tau + S_{N-1})^{-1} ... (tau + S_0)^{-1} b``.

    ``order`` permutes the component solves; the result is independent of it
    when the parts annihilate. With ``check=True`` the result is compared to
    the direct solve and a :class:`CertificateViolationError` is raised if the
    relative gap exceeds ``tol``.
    """
    _check_tau(tau)
    n = op.length
    order = range(n) if order is None else order
    x = np.asarray(b, dtype=float)
    for k in order:
        x = component_solve(op, k, tau, x)
    x = tau ** (n - 1) * x
    if check:
        gap = _relative_gap(x, direct_resolvent_apply(op, tau, b))
        if gap > tol:
            raise CertificateViolationError(
                f"factored and direct resolvents differ by {gap:.3e} (relative)")
    return x


def component_resolvent_recover(op, tau, part, b):
    """``(tau + S_l)^{-1} b`` recovered from the full resolvent as ``prod_{k != l}(1 + S_k/tau) (tau + S)^{-1} b``."""
    _check_tau(tau)
    x = direct_resolvent_apply(op, tau, b)
    for k in range(op.length):
        if k != part:
            x = x + op.parts[k].entries @ x / tau
    return x


def resolvent_disagreement(op, tau, b):
    """Relative gap between the factored and the direct resolvent."""
    return _relative_gap(factored_resolvent_apply(op, tau, b),
                         direct_resolvent_apply(op, tau, b))


def factorization_defect(op, tau):
    """Gram norm of ``tau^(1-N) prod_k (tau + S_k) - (tau + S)``.

    Zero for an annihilating set; otherwise the sum of the cross products
    ``S_l S_k`` weighted by powers of ``1/tau``.
    """
    _check_tau(tau)
    n = op.space.dim
    prod = np.eye(n)
    for p in op.parts:
        prod = (tau * np.eye(n) + p.whitened) @ prod
    diff = tau ** (1 - op.length) * prod - (tau * np.eye(n) + op.sum.whitened)
    return float(np.linalg.norm(diff, 2)) if n else 0.0


# ------------------------------------------------------------------ evolution

@dataclass
class EvolutionProblem:
    """``u' + S u = f`` with ``u(0) = u0``, stepped ``steps`` times with step ``h``.

    ``forcing`` is ``None``, a constant vector, a callable ``f(t)`` or an
    array with one row per step.
    """

    operator: object
    u0: np.ndarray
    h: float
    steps: int
    scheme: str = "cayley"
    forcing: object = None

    def __post_init__(self):
        self.u0 = np.asarray(self.u0, dtype=float)
        if not self.h > 0:
            raise ValueError(f"step must be positive, got {self.h}")
        if self.steps < 0:
            raise ValueError("step count must be nonnegative")
        if self.u0.shape != (self.operator.space.dim,):
            raise ValueError(f"initial state has shape {self.u0.shape}, "
                             f"expected ({self.operator.space.dim},)")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")

    def force(self, n, t):
        f = self.forcing
        if f is None:
            return None
        if callable(f):
            return np.asarray(f(t), dtype=float)
        f = np.asarray(f, dtype=float)
        return f[n] if f.ndim == 2 else f


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray = field(repr=False)
    energies: np.ndarray

    def energy_drift(self):
        return float(np.abs(self.energies - self.energies[0]).max())

    def write(self, path, state_path=None):
        """Write ``step time energy`` columns; optionally dump the states as ``.npy``."""
        path = Path(path)
        header = "step time energy"
        if state_path is not None:
            np.save(state_path, self.states)
            header += f"\nstates: {Path(state_path).name}"
        table = np.column_stack([np.arange(len(self.times)), self.times, self.energies])
        np.savetxt(path, table, fmt=["%d", "%.17g", "%.17g"], header=header)


def evolve(problem):
    """Step ``u' + S u = f`` and record the Gram norm of every state.

    Implicit Euler samples the forcing at step ends, Cayley (Crank-Nicolson)
    at step midpoints.
    """
    op, h = problem.operator, problem.h
    n = op.space.dim
    gram_space = op.space.space
    s = op.sum.matrix
    eye = np.eye(n)
    if problem.scheme == "monolithic-implicit-euler":
        lu = _lu(eye + h * s)
    elif problem.scheme == "cayley":
        lu = _lu(eye + 0.5 * h * s)
        explicit = eye - 0.5 * h * s
    u = problem.u0.copy()
    states = [u.copy()]
    for step in range(problem.steps):
        t0 = step * h
        if problem.scheme == "cayley":
            f = problem.force(step, t0 + 0.5 * h)
            rhs = explicit @ u if f is None else explicit @ u + h * f
            u = sla.lu_solve(lu, rhs)
        else:
            f = problem.force(step, t0 + h)
            rhs = u if f is None else u + h * f
            if problem.scheme == "monolithic-implicit-euler":
                u = sla.lu_solve(lu, rhs)
            else:
                # (I + hS)^{-1} = (1/h) (1/h + S)^{-1}
                u = factored_resolvent_apply(op, 1.0 / h, rhs) / h
        states.append(u.copy())
    states = np.array(states)
    energies = np.array([gram_space.norm(x) for x in states])
    times = h * np.arange(problem.steps + 1)
    return Trajectory(times, states, energies)
