"""Lagrange P1/P2 finite element spaces on triangular meshes.

Global dof ordering is deterministic: mesh vertices first, in mesh order,
then (for quadratics) one dof per edge, edges sorted by their (min, max)
vertex pair.  Local dofs on triangle (v0, v1, v2) are [v0, v1, v2] for
degree 1 and [v0, v1, v2, m01, m12, m20] for degree 2, where m01 is the
midpoint of edge v0-v1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import triangle_diameters

__all__ = [
    "FeSpace",
    "NodalField",
    "build_space",
    "mesh_function",
    "node_patch",
    "extended_patch",
    "interpolate",
    "evaluate",
    "shape_functions",
]

_P2_EDGE_PAIRS = ((0, 1), (1, 2), (2, 0))


def shape_functions(degree, points):
    """Reference-triangle basis values and gradients.

    Parameters
    ----------
    degree : int
        1 or 2.
    points : array_like, shape (npts, 2)
        Reference coordinates (xi, eta) with xi, eta >= 0, xi + eta <= 1.

    Returns
    -------
    phi : ndarray, shape (npts, nloc)
    grad : ndarray, shape (npts, nloc, 2)
        Gradients with respect to the reference coordinates.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    xi, eta = pts[:, 0], pts[:, 1]
    lam = np.stack([1.0 - xi - eta, xi, eta], axis=1)
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    if degree == 1:
        return lam, np.broadcast_to(dlam, (len(pts), 3, 2)).copy()
    if degree == 2:
        n = len(pts)
        phi = np.empty((n, 6))
        grad = np.empty((n, 6, 2))
        for i in range(3):
            phi[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grad[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * dlam[i]
        for j, (a, b) in enumerate(_P2_EDGE_PAIRS):
            phi[:, 3 + j] = 4.0 * lam[:, a] * lam[:, b]
            grad[:, 3 + j] = 4.0 * (
                lam[:, a][:, None] * dlam[b] + lam[:, b][:, None] * dlam[a]
            )
        return phi, grad
    raise ValueError("degree must be 1 or 2")


@dataclass(eq=False)
class FeSpace:
    """Lagrange finite element space over a mesh.

    Attributes
    ----------
    mesh : Mesh
    degree : int
    nodes : (ndof, 2) Lagrange node coordinates.
    cell_dofs : (nt, 3 or 6) local-to-global dof map.
    interior_dofs, boundary_dofs : index arrays partitioning all dofs.
    boundary_markers : marker per boundary dof; where a vertex touches
        boundary edges with different markers the smallest marker wins.
    edges : (ne, 2) sorted vertex pairs defining the global edge order.
    cell_edges : (nt, 3) global edge index per local edge [01, 12, 20].
    """

    mesh: object
    degree: int
    nodes: np.ndarray = field(repr=False)
    cell_dofs: np.ndarray = field(repr=False)
    interior_dofs: np.ndarray = field(repr=False)
    boundary_dofs: np.ndarray = field(repr=False)
    boundary_markers: np.ndarray = field(repr=False)
    edges: np.ndarray = field(repr=False)
    cell_edges: np.ndarray = field(repr=False)
    _vertex_tri_ptr: np.ndarray = field(repr=False)
    _vertex_tri_ind: np.ndarray = field(repr=False)
    _edge_tri_ptr: np.ndarray = field(repr=False)
    _edge_tri_ind: np.ndarray = field(repr=False)

    @property
    def ndof(self):
        return self.nodes.shape[0]

    @property
    def n_interior(self):
        return self.interior_dofs.shape[0]

    def zero_field(self):
        return NodalField(self, np.zeros(self.ndof))


@dataclass(eq=False)
class NodalField:
    """Coefficient vector over the dofs of a space."""

    space: FeSpace
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.space.ndof,):
            raise ValueError(
                f"expected {self.space.ndof} values, got shape {vals.shape}"
            )
        self.values = vals


def build_space(mesh, degree):
    """Construct the P1 or P2 Lagrange space over a conforming mesh."""
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    t = mesh.triangles
    nv, nt = mesh.nv, mesh.nt

    vcount = np.bincount(t.ravel(), minlength=nv)
    if vcount.min() == 0:
        raise ValueError("mesh has vertices not used by any triangle")

    cat = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    se = np.sort(cat, axis=1)
    edges, inv = np.unique(se, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    cell_edges = np.column_stack([inv[0:nt], inv[nt:2 * nt], inv[2 * nt:3 * nt]])

    if degree == 1:
        nodes = mesh.vertices.copy()
        cell_dofs = t.copy()
    else:
        mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
        nodes = np.vstack([mesh.vertices, mids])
        cell_dofs = np.column_stack([t, nv + cell_edges])
    ndof = nodes.shape[0]

    b = mesh.boundary_edges
    on_boundary = np.zeros(ndof, dtype=bool)
    marker = np.full(ndof, np.iinfo(np.int64).max, dtype=np.int64)
    if b.size:
        on_boundary[b[:, 0]] = True
        on_boundary[b[:, 1]] = True
        np.minimum.at(marker, b[:, 0], b[:, 2])
        np.minimum.at(marker, b[:, 1], b[:, 2])
        if degree == 2:
            sb = np.sort(b[:, :2], axis=1)
            keys = edges[:, 0] * np.int64(nv) + edges[:, 1]
            bq = sb[:, 0] * np.int64(nv) + sb[:, 1]
            pos = np.searchsorted(keys, bq)
            on_boundary[nv + pos] = True
            np.minimum.at(marker, nv + pos, b[:, 2])

    boundary_dofs = np.where(on_boundary)[0]
    interior_dofs = np.where(~on_boundary)[0]
    boundary_markers = marker[boundary_dofs]

    tflat = t.ravel()
    order = np.argsort(tflat, kind="stable")
    vertex_tri_ind = order // 3
    vertex_tri_ptr = np.concatenate([[0], np.cumsum(vcount)])

    eorder = np.argsort(inv, kind="stable")
    edge_tri_ind = eorder % nt
    ecount = np.bincount(inv, minlength=edges.shape[0])
    edge_tri_ptr = np.concatenate([[0], np.cumsum(ecount)])

    return FeSpace(
        mesh=mesh,
        degree=degree,
        nodes=nodes,
        cell_dofs=cell_dofs,
        interior_dofs=interior_dofs,
        boundary_dofs=boundary_dofs,
        boundary_markers=boundary_markers,
        edges=edges,
        cell_edges=cell_edges,
        _vertex_tri_ptr=vertex_tri_ptr,
        _vertex_tri_ind=vertex_tri_ind,
        _edge_tri_ptr=edge_tri_ptr,
        _edge_tri_ind=edge_tri_ind,
    )


def node_patch(space, i):
    """Indices of the triangles whose closure contains node i."""
    if not 0 <= i < space.ndof:
        raise IndexError(f"dof index {i} out of range")
    nv = space.mesh.nv
    if i < nv:
        ptr, ind = space._vertex_tri_ptr, space._vertex_tri_ind
        return np.sort(ind[ptr[i]:ptr[i + 1]])
    e = i - nv
    ptr, ind = space._edge_tri_ptr, space._edge_tri_ind
    return np.sort(ind[ptr[e]:ptr[e + 1]])


def extended_patch(space, i):
    """Triangles sharing at least a vertex with some triangle of the node
    patch of dof i."""
    patch = node_patch(space, i)
    verts = np.unique(space.mesh.triangles[patch])
    ptr, ind = space._vertex_tri_ptr, space._vertex_tri_ind
    pieces = [ind[ptr[v]:ptr[v + 1]] for v in verts]
    return np.unique(np.concatenate(pieces))


def mesh_function(space):
    """Continuous piecewise-linear field of averaged element diameters.

    At each mesh vertex the value is the arithmetic mean of the diameters
    of the incident triangles; midside nodes of a quadratic space carry
    the average of the two endpoint values (the P1 field evaluated there).
    """
    mesh = space.mesh
    h = triangle_diameters(mesh)
    tflat = mesh.triangles.ravel()
    wsum = np.bincount(tflat, weights=np.repeat(h, 3), minlength=mesh.nv)
    cnt = np.bincount(tflat, minlength=mesh.nv)
    vvals = wsum / cnt
    if space.degree == 1:
        return NodalField(space, vvals)
    evals = 0.5 * (vvals[space.edges[:, 0]] + vvals[space.edges[:, 1]])
    return NodalField(space, np.concatenate([vvals, evals]))


def interpolate(space, g):
    """Nodal interpolant of g; g takes coordinate arrays (x, y)."""
    x, y = space.nodes[:, 0], space.nodes[:, 1]
    vals = np.asarray(g(x, y), dtype=float)
    return NodalField(space, np.broadcast_to(vals, x.shape).copy())


def evaluate(field, points, tol=1e-10):
    """Evaluate a nodal field at arbitrary points inside the mesh.

    Point location is brute force over all triangles, intended for
    cross-section extraction rather than bulk work.
    """
    space = field.space
    mesh = space.mesh
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    v, t = mesh.vertices, mesh.triangles
    p0 = v[t[:, 0]]
    d1 = v[t[:, 1]] - p0
    d2 = v[t[:, 2]] - p0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    out = np.empty(len(pts))
    for k, p in enumerate(pts):
        r = p - p0
        xi = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
        eta = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
        ok = (xi >= -tol) & (eta >= -tol) & (xi + eta <= 1.0 + tol)
        idx = int(np.argmax(ok))
        if not ok[idx]:
            raise ValueError(f"point {tuple(p)} lies outside the mesh")
        phi, _ = shape_functions(space.degree, [[xi[idx], eta[idx]]])
        out[k] = phi[0] @ field.values[space.cell_dofs[idx]]
    return out
