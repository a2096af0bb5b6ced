"""Assembly of the diffusion-reaction bilinear form, the diagonal
stabilisation, the lumped product, load functionals and the semilinear
reaction term.

Coefficients are constants or per-triangle arrays; the source may also be
a point function sampled at quadrature points.  The bilinear forms use
quadrature exact to degree 2k; the semilinear term uses a fixed
high-order rule since |w|^(p-2) is not polynomial in general.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .projection import BoundsBox
from .quadrature import triangle_rule
from .space import mesh_function, shape_functions

__all__ = [
    "ProblemSpec",
    "AssembledSystem",
    "assemble_system",
    "lumped_product",
    "apply_stabilisation",
    "semilinear_residual",
    "scalar_power_bounds_check",
    "dirichlet_values",
]

# Spatial dimension; the stabilisation exponents h^(d-2) and h^d and the
# lumped-product weight h^d are derived from it rather than hard-coded.
_DIM = 2


@dataclass(eq=False)
class ProblemSpec:
    """Coefficients and data of one reaction-diffusion problem.

    diffusion : scalar, 2x2 array, or (nt, 2, 2) per-triangle tensors;
        must be symmetric with eigenvalues bounded away from zero.
    reaction : scalar or per-triangle array, >= 0 (linear problem).
    exponent : power p >= 2 of the semilinear reaction |u|^(p-2) u;
        mutually exclusive with a nonzero linear reaction.
    source : scalar, per-triangle array, or function f(x, y).
    dirichlet : scalar, function g(x, y), or dict marker -> scalar/function.
    box : nodal bounds for the constrained method.
    """

    diffusion: object = 1.0
    reaction: object = 0.0
    exponent: object = None
    source: object = 0.0
    dirichlet: object = 0.0
    box: BoundsBox = field(default_factory=BoundsBox)

    def __post_init__(self):
        if self.exponent is not None:
            if float(self.exponent) < 2.0:
                raise ValueError("semilinear exponent p must be >= 2")
            if self.reaction is not None and np.any(np.asarray(self.reaction) != 0.0):
                raise ValueError("linear reaction and semilinear exponent "
                                 "are mutually exclusive")

    @property
    def semilinear(self):
        return self.exponent is not None


@dataclass(eq=False)
class AssembledSystem:
    """Interior-dof system: bilinear form matrix A, stabilisation diagonal,
    load vector with Dirichlet lifting, plus the data needed to rebuild
    full fields (boundary values g, mesh function, interior mass matrix)."""

    space: object
    spec: ProblemSpec
    alpha: float
    A: sp.csr_matrix = field(repr=False)
    s_diag: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    mass: sp.csr_matrix = field(repr=False)
    g: np.ndarray = field(repr=False)
    h_nodal: np.ndarray = field(repr=False)


def _geometry(mesh):
    """Affine map data per triangle: corner p0, edge vectors, Jacobian
    determinant (= 2 area) and inverse-transposed Jacobian."""
    v, t = mesh.vertices, mesh.triangles
    p0 = v[t[:, 0]]
    d1 = v[t[:, 1]] - p0
    d2 = v[t[:, 2]] - p0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    inv_jt = np.empty((len(t), 2, 2))
    inv_jt[:, 0, 0] = d2[:, 1]
    inv_jt[:, 0, 1] = -d1[:, 1]
    inv_jt[:, 1, 0] = -d2[:, 0]
    inv_jt[:, 1, 1] = d1[:, 0]
    inv_jt /= det[:, None, None]
    return p0, d1, d2, det, inv_jt


def _quad_points(p0, d1, d2, qp):
    """Physical coordinates of reference quadrature points, (nt, nq, 2)."""
    return (p0[:, None, :]
            + qp[None, :, 0, None] * d1[:, None, :]
            + qp[None, :, 1, None] * d2[:, None, :])


def _diffusion_cells(diffusion, nt):
    """Normalize to (nt, 2, 2); return tensors and per-cell spectral norms."""
    d = np.asarray(diffusion, dtype=float)
    if d.ndim == 0:
        d = float(d) * np.eye(2)
    if d.shape == (2, 2):
        d = np.broadcast_to(d, (nt, 2, 2))
    if d.shape != (nt, 2, 2):
        raise ValueError("diffusion must be a scalar, a 2x2 tensor, or "
                         "per-triangle (nt, 2, 2) tensors")
    if not np.allclose(d, np.transpose(d, (0, 2, 1)), rtol=1e-12, atol=1e-14):
        raise ValueError("diffusion tensor must be symmetric")
    a, b, c = d[:, 0, 0], d[:, 0, 1], d[:, 1, 1]
    mid = 0.5 * (a + c)
    rad = np.sqrt((0.5 * (a - c)) ** 2 + b * b)
    if (mid - rad).min() <= 0.0:
        raise ValueError("diffusion tensor is not uniformly elliptic")
    return np.ascontiguousarray(d), mid + rad


def _reaction_cells(reaction, nt):
    mu = np.asarray(0.0 if reaction is None else reaction, dtype=float)
    if mu.ndim == 0:
        mu = np.full(nt, float(mu))
    if mu.shape != (nt,):
        raise ValueError("reaction must be a scalar or a per-triangle array")
    if mu.min() < 0.0:
        raise ValueError("reaction must be nonnegative")
    return mu


def _source_at(source, x):
    nt, nq = x.shape[:2]
    if callable(source):
        vals = np.asarray(source(x[..., 0], x[..., 1]), dtype=float)
        return np.broadcast_to(vals, (nt, nq))
    arr = np.asarray(source, dtype=float)
    if arr.ndim == 0:
        return np.full((nt, nq), float(arr))
    if arr.shape == (nt,):
        return np.broadcast_to(arr[:, None], (nt, nq))
    raise ValueError("source must be a scalar, per-triangle array, or callable")


def dirichlet_values(space, dirichlet):
    """Full-length nodal vector of boundary data (zero at interior dofs).

    ``dirichlet`` is a scalar, a function of coordinate arrays (x, y), or a
    dict marker -> scalar/function; markers missing from the dict get 0.
    """
    g = np.zeros(space.ndof)
    bd = space.boundary_dofs
    if bd.size == 0:
        return g
    x, y = space.nodes[bd, 0], space.nodes[bd, 1]
    if isinstance(dirichlet, dict):
        vals = np.zeros(bd.size)
        for m, gm in dirichlet.items():
            sel = space.boundary_markers == m
            if callable(gm):
                vals[sel] = np.broadcast_to(
                    np.asarray(gm(x[sel], y[sel]), dtype=float), (int(sel.sum()),)
                )
            else:
                vals[sel] = float(gm)
    elif callable(dirichlet):
        vals = np.broadcast_to(np.asarray(dirichlet(x, y), dtype=float), x.shape)
    else:
        vals = np.full(bd.size, float(dirichlet))
    g[bd] = vals
    return g


def _extended_patch_max(space, cellval):
    """Per-dof max of a per-cell value over the extended patch of the dof.

    Two sweeps of max propagation: cell values to vertices, back to cells
    (giving each cell the max over all cells sharing a vertex with it),
    then to the dofs through their node patches.
    """
    mesh = space.mesh
    tflat = mesh.triangles.ravel()
    node_max = np.zeros(mesh.nv)
    np.maximum.at(node_max, tflat, np.repeat(cellval, 3))
    tri2 = node_max[mesh.triangles].max(axis=1)
    ext = np.zeros(space.ndof)
    np.maximum.at(ext, tflat, np.repeat(tri2, 3))
    if space.degree == 2:
        edge_ext = np.zeros(space.edges.shape[0])
        np.maximum.at(edge_ext, space.cell_edges.ravel(), np.repeat(tri2, 3))
        ext[mesh.nv:] = edge_ext
    return ext


def assemble_system(space, spec, alpha=1.0):
    """Assemble the interior system: A, the stabilisation diagonal and the
    load vector with the Dirichlet lifting moved to the right-hand side.

    For a semilinear spec the matrix contains no reaction term and the
    stabilisation drops its reaction part as well.
    """
    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    mesh = space.mesh
    nt, k, ndof = mesh.nt, space.degree, space.ndof
    d_cells, d_norm = _diffusion_cells(spec.diffusion, nt)
    mu = _reaction_cells(None if spec.semilinear else spec.reaction, nt)
    p0, d1, d2, det, inv_jt = _geometry(mesh)

    qp, qw = triangle_rule(2 * k)
    phi, gref = shape_functions(k, qp)
    grad = np.einsum("kij,qaj->kqai", inv_jt, gref)
    dgrad = np.einsum("kij,kqaj->kqai", d_cells, grad)
    stiff = np.einsum("q,kqai,kqbi->kab", qw, grad, dgrad, optimize=True)
    stiff *= det[:, None, None]
    mass_loc = np.einsum("q,qa,qb->ab", qw, phi, phi)[None] * det[:, None, None]
    a_loc = stiff + mu[:, None, None] * mass_loc

    nloc = phi.shape[1]
    rows = np.repeat(space.cell_dofs, nloc, axis=1).ravel()
    cols = np.tile(space.cell_dofs, (1, nloc)).ravel()
    a_full = sp.coo_matrix((a_loc.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()
    m_full = sp.coo_matrix((mass_loc.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()

    x = _quad_points(p0, d1, d2, qp)
    fvals = _source_at(spec.source, x)
    f_loc = np.einsum("q,kq,qa->ka", qw, fvals, phi) * det[:, None]
    f_full = np.bincount(space.cell_dofs.ravel(), weights=f_loc.ravel(),
                         minlength=ndof)

    g = dirichlet_values(space, spec.dirichlet)
    idx, bd = space.interior_dofs, space.boundary_dofs
    a_int = a_full[idx][:, idx].tocsr()
    m_int = m_full[idx][:, idx].tocsr()
    f_int = f_full[idx] - a_full[idx][:, bd] @ g[bd]

    h = mesh_function(space).values
    d_ext = _extended_patch_max(space, d_norm)
    s_full = d_ext * h ** (_DIM - 2)
    if not spec.semilinear:
        s_full = s_full + _extended_patch_max(space, mu) * h ** _DIM
    s_diag = alpha * s_full[idx]

    return AssembledSystem(space=space, spec=spec, alpha=float(alpha),
                           A=a_int, s_diag=s_diag, F=f_int, mass=m_int,
                           g=g, h_nodal=h)


def lumped_product(space, v, w):
    """Lumped inner product: sum over interior dofs of h(x_i)^d v_i w_i."""
    if v.space is not space or w.space is not space:
        raise ValueError("mismatched spaces")
    h = mesh_function(space).values
    i = space.interior_dofs
    return float(np.sum(h[i] ** _DIM * v.values[i] * w.values[i]))


def apply_stabilisation(system, v, w):
    """Evaluate the diagonal stabilisation form s(v, w)."""
    if v.space is not system.space or w.space is not system.space:
        raise ValueError("mismatched spaces")
    i = system.space.interior_dofs
    return float(np.sum(system.s_diag * v.values[i] * w.values[i]))


def semilinear_residual(space, w, u, p):
    """Interior-dof vector of the semilinear form: entry i is
    the integral of |w|^(p-2) u phi_i over the domain.

    Linear in u for fixed w; quadrature degree max(4k, 8).
    """
    if float(p) < 2.0:
        raise ValueError("exponent p must be >= 2")
    if w.space is not space or u.space is not space:
        raise ValueError("mismatched spaces")
    k = space.degree
    qp, qw = triangle_rule(max(4 * k, 8))
    phi, _ = shape_functions(k, qp)
    p0, d1, d2, det, _ = _geometry(space.mesh)
    wq = w.values[space.cell_dofs] @ phi.T
    uq = u.values[space.cell_dofs] @ phi.T
    coeff = np.abs(wq) ** (float(p) - 2.0) * uq
    f_loc = np.einsum("q,kq,qa->ka", qw, coeff, phi) * det[:, None]
    full = np.bincount(space.cell_dofs.ravel(), weights=f_loc.ravel(),
                       minlength=space.ndof)
    return full[space.interior_dofs]


def scalar_power_bounds_check(x, y, p):
    """Quantities of the scalar power-reaction inequalities.

    Returns (mono_lhs, mono_rhs, diff_lhs, diff_rhs) where

        mono_lhs = (|x|^(p-2) x - |y|^(p-2) y)(x - y)
        mono_rhs = (|x| + |y|)^(p-2) (x - y)^2
        diff_lhs = | |x|^(p-2) x - |y|^(p-2) y |
        diff_rhs = (|x| + |y|)^(p-2) |x - y|

    Monotonicity means mono_lhs >= c * mono_rhs for some c > 0 depending
    only on p; local Lipschitz continuity means diff_lhs <= C * diff_rhs.
    Both reduce to equalities with constant 1 at p = 2.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    fx = np.abs(x) ** (p - 2.0) * x
    fy = np.abs(y) ** (p - 2.0) * y
    base = (np.abs(x) + np.abs(y)) ** (p - 2.0)
    mono_lhs = (fx - fy) * (x - y)
    mono_rhs = base * (x - y) ** 2
    diff_lhs = np.abs(fx - fy)
    diff_rhs = base * np.abs(x - y)
    return mono_lhs, mono_rhs, diff_lhs, diff_rhs
