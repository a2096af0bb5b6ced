"""Error norms, quasinorm, stabilisation and mesh-dependent norms, nodal
extrema and estimated orders of convergence."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .forms import (_diffusion_cells, _geometry, _quad_points,
                    _reaction_cells, lumped_product)
from .quadrature import triangle_rule
from .space import NodalField, shape_functions

__all__ = [
    "ErrorNorms",
    "ErrorRecord",
    "error_norms",
    "quasinorm",
    "stab_and_mesh_norms",
    "eoc",
    "nodal_extrema",
]


@dataclass(frozen=True)
class ErrorNorms:
    l2: float
    h1semi: float
    energy: float


@dataclass(eq=False)
class ErrorRecord:
    """One row of a convergence study."""

    level: int
    h: float
    ndof: int
    err_l2: float
    err_h1semi: float
    err_energy: float
    iterations: int
    min_nodal: float
    max_nodal: float
    err_quasinorm: object = None


def _field_and_gradient_at_quad(space, u_h, phi, gref, inv_jt):
    coeffs = u_h.values[space.cell_dofs]
    vals = coeffs @ phi.T
    grad_phys = np.einsum("kij,qaj->kqai", inv_jt, gref)
    grads = np.einsum("kqai,ka->kqi", grad_phys, coeffs)
    return vals, grads


def error_norms(space, u_h, exact, exact_grad, spec):
    """L2, H1-seminorm and energy-norm errors of u_h against a known
    solution.

    exact(x, y) returns values; exact_grad(x, y) returns the pair
    (du/dx, du/dy). Quadrature degree max(2k + 2, 8).
    """
    mesh = space.mesh
    k = space.degree
    qp, qw = triangle_rule(max(2 * k + 2, 8))
    phi, gref = shape_functions(k, qp)
    p0, d1, d2, det, inv_jt = _geometry(mesh)
    x = _quad_points(p0, d1, d2, qp)

    uh_q, guh_q = _field_and_gradient_at_quad(space, u_h, phi, gref, inv_jt)
    ue = np.broadcast_to(np.asarray(exact(x[..., 0], x[..., 1]), float),
                         uh_q.shape)
    gx, gy = exact_grad(x[..., 0], x[..., 1])
    ge = np.stack([np.broadcast_to(np.asarray(gx, float), uh_q.shape),
                   np.broadcast_to(np.asarray(gy, float), uh_q.shape)], axis=-1)

    e = uh_q - ue
    gdiff = guh_q - ge
    w = qw[None, :] * det[:, None]
    l2 = math.sqrt(float(np.sum(w * e * e)))
    h1 = math.sqrt(float(np.sum(w * np.sum(gdiff * gdiff, axis=-1))))

    d_cells, _ = _diffusion_cells(spec.diffusion, mesh.nt)
    mu = _reaction_cells(None if spec.semilinear else spec.reaction, mesh.nt)
    dg = np.einsum("kij,kqj->kqi", d_cells, gdiff)
    energy2 = float(np.sum(w * np.sum(dg * gdiff, axis=-1)))
    energy2 += float(np.sum(mu[:, None] * w * e * e))
    return ErrorNorms(l2=l2, h1semi=h1, energy=math.sqrt(max(energy2, 0.0)))


def _values_at_quad(space, obj, x, phi):
    if isinstance(obj, NodalField):
        if obj.space is not space:
            raise ValueError("mismatched spaces")
        return obj.values[space.cell_dofs] @ phi.T
    shape = x.shape[:2]
    if callable(obj):
        return np.broadcast_to(np.asarray(obj(x[..., 0], x[..., 1]), float),
                               shape)
    return np.full(shape, float(obj))


def quasinorm(space, v, w, p):
    """Weighted L2 functional sqrt of the integral of |v|^2 (|w|+|v|)^(p-2).

    v and w may be nodal fields on the space, point functions, or
    constants; reduces to the plain L2 norm of v at p = 2.
    """
    if float(p) < 2.0:
        raise ValueError("exponent p must be >= 2")
    k = space.degree
    qp, qw = triangle_rule(max(4 * k, 8))
    phi, _ = shape_functions(k, qp)
    p0, d1, d2, det, _ = _geometry(space.mesh)
    x = _quad_points(p0, d1, d2, qp)
    vq = _values_at_quad(space, v, x, phi)
    wq = _values_at_quad(space, w, x, phi)
    weight = (np.abs(wq) + np.abs(vq)) ** (float(p) - 2.0)
    integ = qw[None, :] * det[:, None] * vq * vq * weight
    return math.sqrt(float(np.sum(integ)))


def stab_and_mesh_norms(system, v):
    """Stabilisation norm, lumped seminorm and the combined mesh-dependent
    norm of a field.

    The energy part of the mesh-dependent norm is computed as the matrix
    quadratic form over interior values and is therefore meaningful for
    interior-supported fields.
    """
    space = system.space
    if v.space is not space:
        raise ValueError("mismatched spaces")
    vi = v.values[space.interior_dofs]
    s2 = float(np.sum(system.s_diag * vi * vi))
    lumped = math.sqrt(lumped_product(space, v, v))
    a2 = float(vi @ (system.A @ vi))
    return math.sqrt(s2), lumped, math.sqrt(max(a2, 0.0) + s2)


def eoc(pairs):
    """Estimated orders of convergence between consecutive (h, error)
    levels: log(e_prev / e_next) / log(h_prev / h_next).

    A nonpositive error makes the adjacent rate undefined; those slots
    hold None.
    """
    pairs = [(float(h), float(e)) for h, e in pairs]
    if len(pairs) < 2:
        raise ValueError("need at least two levels")
    hs = [h for h, _ in pairs]
    if any(h2 >= h1 for h1, h2 in zip(hs, hs[1:])):
        raise ValueError("h must be strictly decreasing")
    rates = []
    for (h1, e1), (h2, e2) in zip(pairs, pairs[1:]):
        if e1 <= 0.0 or e2 <= 0.0:
            rates.append(None)
        else:
            rates.append(math.log(e1 / e2) / math.log(h1 / h2))
    return rates


def nodal_extrema(v):
    """(min, max) of the interior nodal values."""
    vals = v.values[v.space.interior_dofs]
    return float(vals.min()), float(vals.max())
