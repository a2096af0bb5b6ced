"""Direct Galerkin solve and the damped Richardson iteration for the
bound-constrained method, in linear and semilinear variants.

The iteration keeps the assembled matrix A as a frozen preconditioner:

    A u(n+1) = A u(n) + omega (F - A u(n)+ - B(u(n)+) - S u(n)-)

with B absent in the linear case.  A is factorized once and the
factorization reused across all iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import splu

from .forms import semilinear_residual
from .projection import bounds_arrays, split
from .space import NodalField

__all__ = [
    "SolverConfig",
    "SolveReport",
    "galerkin_solve",
    "richardson_solve",
    "nonlinear_richardson_solve",
]

# Damping below this is hopeless; auto_damp gives up rather than halving on.
_OMEGA_FLOOR = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    """Iteration parameters.

    auto_damp halves omega and restarts from the initial guess whenever
    the update norm grows for five consecutive iterations; it is off by
    default so that fixed-omega runs stay reproducible.
    """

    alpha: float = 1.0
    omega: float = 1.0
    tol: float = 1e-12
    max_iter: int = 10000
    auto_damp: bool = False

    def __post_init__(self):
        if not 0.0 < self.omega <= 1.0:
            raise ValueError("omega must lie in (0, 1]")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(eq=False)
class SolveReport:
    """Outcome of a constrained solve.

    u = u_plus + u_minus holds nodewise exactly and u_plus is admissible;
    u_plus is the numerical solution.  update_history lists the L2 norm
    of every update of the final damping attempt.
    """

    u: NodalField
    u_plus: NodalField
    u_minus: NodalField
    iterations: int
    update_history: np.ndarray
    omega_used: float
    converged: bool


def _full_field(system, u_int):
    values = system.g.copy()
    values[system.space.interior_dofs] = u_int
    return NodalField(system.space, values)


def galerkin_solve(system):
    """Solve the unconstrained linear system A u = F directly."""
    lu = splu(system.A.tocsc())
    return _full_field(system, lu.solve(system.F))


def _iterate(system, box, config, reaction):
    space = system.space
    lo, hi = bounds_arrays(box, space)
    idx = space.interior_dofs
    lo_i, hi_i = lo[idx], hi[idx]
    a_mat, f_vec, s_diag, m_mat = system.A, system.F, system.s_diag, system.mass
    lu = splu(a_mat.tocsc())

    u0 = lu.solve(f_vec)
    omega = config.omega
    while True:
        u = u0.copy()
        history = []
        grow = 0
        prev = np.inf
        converged = False
        restart = False
        while len(history) < config.max_iter:
            u_plus = np.clip(u, lo_i, hi_i)
            resid = f_vec - a_mat @ u_plus - s_diag * (u - u_plus)
            if reaction is not None:
                resid = resid - reaction(u_plus)
            delta = omega * lu.solve(resid)
            u = u + delta
            with np.errstate(over="ignore", invalid="ignore"):
                nrm = float(np.sqrt(max(delta @ (m_mat @ delta), 0.0)))
            if not np.isfinite(nrm):
                nrm = np.inf
            history.append(nrm)
            if nrm <= config.tol:
                converged = True
                break
            # a non-finite norm counts as growth so damping can kick in
            grow = grow + 1 if (nrm > prev or not np.isfinite(nrm)) else 0
            prev = nrm
            if config.auto_damp and grow >= 5 and omega * 0.5 >= _OMEGA_FLOOR:
                omega *= 0.5
                restart = True
                break
        if not restart:
            break

    u_field = _full_field(system, u)
    u_plus_field, u_minus_field = split(u_field, box)
    return SolveReport(
        u=u_field,
        u_plus=u_plus_field,
        u_minus=u_minus_field,
        iterations=len(history),
        update_history=np.asarray(history),
        omega_used=omega,
        converged=converged,
    )


def richardson_solve(system, box, config=SolverConfig()):
    """Damped Richardson iteration for the linear constrained method,
    started from the Galerkin solution."""
    if system.spec.semilinear:
        raise ValueError("system was assembled for a semilinear problem; "
                         "use nonlinear_richardson_solve")
    return _iterate(system, box, config, reaction=None)


def nonlinear_richardson_solve(system, box, config=SolverConfig()):
    """Richardson iteration for the semilinear constrained method: the
    power reaction of the current constrained part enters the explicit
    residual while the linear diffusion matrix stays the preconditioner."""
    spec = system.spec
    if not spec.semilinear:
        raise ValueError("system lacks a semilinear exponent")
    p = float(spec.exponent)

    def reaction(u_plus_int):
        w = _full_field(system, u_plus_int)
        return semilinear_residual(system.space, w, w, p)

    return _iterate(system, box, config, reaction=reaction)
