"""Reference solvers for the discrete box-constrained variational
inequality: projected Gauss-Seidel for linear problems and a projected
nonlinear Gauss-Seidel for the power reaction.

Deliberately plain row-sweep solvers for test-sized systems. They share
no code with the Richardson path, which is the point: agreement between
the two is evidence, not tautology.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ViProblem",
    "projected_gauss_seidel",
    "projected_nonlinear_gauss_seidel",
    "complementarity_violation",
]


@dataclass(eq=False)
class ViProblem:
    """Box-constrained problem: find u in [lower, upper] with
    F - A u - reaction(u) complementary to the active bounds.

    reaction (with its exponent p >= 2) is an optional callable returning
    the nodal reaction vector at u; reaction_scale holds positive per-dof
    weights used by the nonlinear sweeps to model how a single nodal
    value shifts its own reaction entry.
    """

    A: object
    F: np.ndarray
    lower: object = 0.0
    upper: object = np.inf
    p: object = None
    reaction: object = None
    reaction_scale: object = None

    def __post_init__(self):
        a = sp.csr_matrix(self.A)
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError("A must be square")
        asym = (a - a.T).tocoo()
        scale = max(abs(a).max(), 1.0)
        if asym.nnz and np.abs(asym.data).max() > 1e-12 * scale:
            raise ValueError("A must be symmetric")
        self.A = a
        self.F = np.asarray(self.F, dtype=float).reshape(n)
        self.lower = np.broadcast_to(np.asarray(self.lower, float), (n,)).astype(float)
        self.upper = np.broadcast_to(np.asarray(self.upper, float), (n,)).astype(float)
        if not np.all(self.lower < self.upper):
            raise ValueError("empty box")
        if self.p is not None:
            if float(self.p) < 2.0:
                raise ValueError("exponent p must be >= 2")
            if self.reaction is None:
                raise ValueError("a reaction callable is required with p")
            if self.reaction_scale is None:
                self.reaction_scale = np.zeros(n)
            else:
                self.reaction_scale = np.asarray(self.reaction_scale, float).reshape(n)
                if self.reaction_scale.min() < 0.0:
                    raise ValueError("reaction_scale must be nonnegative")

    @property
    def n(self):
        return self.A.shape[0]


def projected_gauss_seidel(problem, tol=1e-12, max_iter=10000):
    """Gauss-Seidel sweeps with nodewise clipping into the box.

    Sweeps in ascending dof order until the largest per-sweep update is
    at most tol. Converges for symmetric positive definite A.
    """
    if problem.p is not None:
        raise ValueError("problem has a nonlinear reaction; "
                         "use projected_nonlinear_gauss_seidel")
    a = problem.A
    indptr, indices, data = a.indptr, a.indices, a.data
    diag = a.diagonal()
    if diag.min() <= 0.0:
        raise ValueError("A has a nonpositive diagonal entry")
    f, lo, hi = problem.F, problem.lower, problem.upper
    u = np.clip(np.zeros(problem.n), lo, hi)
    for _ in range(max_iter):
        max_upd = 0.0
        for i in range(problem.n):
            row = slice(indptr[i], indptr[i + 1])
            s = data[row] @ u[indices[row]] - diag[i] * u[i]
            t = (f[i] - s) / diag[i]
            t = min(max(t, lo[i]), hi[i])
            max_upd = max(max_upd, abs(t - u[i]))
            u[i] = t
        if max_upd <= tol:
            return u
    raise RuntimeError(f"projected Gauss-Seidel did not converge in "
                       f"{max_iter} sweeps (last update {max_upd:.3e})")


def _solve_scalar(aii, lam, psi_shift, rhs, p, guess):
    """Root of the increasing map t -> aii t + lam (psi(t) - psi_shift),
    psi(t) = |t|^(p-2) t, by expanding bracket and bisection."""

    def g(t):
        return aii * t + lam * (abs(t) ** (p - 2.0) * t - psi_shift) - rhs

    if lam == 0.0:
        return (rhs + lam * psi_shift) / aii
    step = 1.0 + abs(guess)
    lo, hi = guess - step, guess + step
    for _ in range(200):
        if g(lo) <= 0.0 <= g(hi):
            break
        lo -= step
        hi += step
        step *= 2.0
    else:
        raise RuntimeError("bisection bracket failure: scalar map not "
                           "sign-changing (non-monotone reaction?)")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-14 * (1.0 + abs(mid)):
            break
        if g(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def projected_nonlinear_gauss_seidel(problem, tol=1e-12, max_iter=5000):
    """Nonlinear Gauss-Seidel sweeps for the power-reaction problem.

    Per sweep the reaction vector is frozen; each dof then solves its
    scalar equation (diagonal of A plus its own reaction shift, modelled
    through reaction_scale) by safeguarded bisection and clips into the
    box. The fixed point satisfies the discrete complementarity
    conditions exactly, independent of the reaction_scale model.
    """
    if problem.p is None:
        raise ValueError("problem has no nonlinear reaction; "
                         "use projected_gauss_seidel")
    p = float(problem.p)
    a = problem.A
    indptr, indices, data = a.indptr, a.indices, a.data
    diag = a.diagonal()
    if diag.min() <= 0.0:
        raise ValueError("A has a nonpositive diagonal entry")
    f, lo, hi = problem.F, problem.lower, problem.upper
    lam = problem.reaction_scale
    u = np.clip(np.zeros(problem.n), lo, hi)
    for _ in range(max_iter):
        b = np.asarray(problem.reaction(u), dtype=float)
        max_upd = 0.0
        for i in range(problem.n):
            row = slice(indptr[i], indptr[i + 1])
            s = data[row] @ u[indices[row]] - diag[i] * u[i]
            rhs = f[i] - s - b[i]
            psi_shift = abs(u[i]) ** (p - 2.0) * u[i]
            t = _solve_scalar(diag[i], lam[i], psi_shift, rhs, p, u[i])
            t = min(max(t, lo[i]), hi[i])
            max_upd = max(max_upd, abs(t - u[i]))
            u[i] = t
        if max_upd <= tol:
            return u
    raise RuntimeError(f"projected nonlinear Gauss-Seidel did not converge "
                       f"in {max_iter} sweeps (last update {max_upd:.3e})")


def complementarity_violation(problem, u):
    """Largest violation of the discrete complementarity conditions at u.

    With r = F - A u - reaction(u): interior dofs need r = 0, dofs at the
    lower bound need r <= 0, dofs at the upper bound need r >= 0. Bound
    activity is detected by exact equality (the sweep solvers clip, so
    active values match the bounds bitwise). The return value is the
    maximum of |r| (interior), max(r, 0) (at lower) and max(-r, 0) (at
    upper); compare it against tol * max(1, ||F||_inf).
    """
    u = np.asarray(u, dtype=float)
    r = problem.F - problem.A @ u
    if problem.reaction is not None:
        r = r - np.asarray(problem.reaction(u), dtype=float)
    at_lo = u == problem.lower
    at_hi = u == problem.upper
    interior = ~(at_lo | at_hi)
    worst = 0.0
    if interior.any():
        worst = float(np.abs(r[interior]).max())
    if at_lo.any():
        worst = max(worst, float(np.maximum(r[at_lo], 0.0).max()))
    if at_hi.any():
        worst = max(worst, float(np.maximum(-r[at_hi], 0.0).max()))
    return worst
