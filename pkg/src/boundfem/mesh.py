"""Conforming 2D triangular meshes: generation, refinement, quality, file I/O.

A mesh stores vertices, counter-clockwise triangles and marked boundary
edges.  The text file format is line oriented::

    nv nt nbe          # header
    x y                # nv vertex lines
    v0 v1 v2           # nt triangle lines, 0-based
    v0 v1 marker       # nbe boundary edge lines

Everything after a ``#`` is a comment; tokens may be split across lines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Mesh",
    "MeshQuality",
    "MeshError",
    "MeshFormatError",
    "MeshConformityError",
    "MeshOrientationError",
    "generate_criss_cross",
    "generate_obtuse_layer",
    "refine_uniform",
    "mesh_quality",
    "read_mesh",
    "write_mesh",
]


class MeshError(Exception):
    """Base class for mesh construction and I/O failures."""


class MeshFormatError(MeshError):
    """A mesh file does not follow the documented text format."""


class MeshConformityError(MeshError):
    """The connectivity is not a conforming triangulation."""


class MeshOrientationError(MeshError):
    """A triangle has non-positive signed area."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation of a polygonal domain.

    Attributes
    ----------
    vertices : ndarray, shape (nv, 2)
        Vertex coordinates.
    triangles : ndarray, shape (nt, 3)
        Vertex indices per triangle, counter-clockwise.
    boundary_edges : ndarray, shape (nbe, 3)
        Rows (v0, v1, marker); markers partition the boundary.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        b = np.ascontiguousarray(np.asarray(self.boundary_edges, dtype=np.int64))
        if b.size == 0:
            b = b.reshape(0, 3)
        for name, arr in (("vertices", v), ("triangles", t), ("boundary_edges", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def nv(self):
        return self.vertices.shape[0]

    @property
    def nt(self):
        return self.triangles.shape[0]

    def signed_areas(self):
        p0 = self.vertices[self.triangles[:, 0]]
        p1 = self.vertices[self.triangles[:, 1]]
        p2 = self.vertices[self.triangles[:, 2]]
        d1 = p1 - p0
        d2 = p2 - p0
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def validate(self):
        """Raise a MeshError subclass if the mesh is malformed."""
        v, t, b = self.vertices, self.triangles, self.boundary_edges
        if v.ndim != 2 or v.shape[1] != 2:
            raise MeshConformityError("vertices must have shape (nv, 2)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshConformityError("triangles must have shape (nt, 3)")
        if b.ndim != 2 or b.shape[1] != 3:
            raise MeshConformityError("boundary_edges must have shape (nbe, 3)")
        if not np.all(np.isfinite(v)):
            raise MeshConformityError("non-finite vertex coordinates")
        if t.size and (t.min() < 0 or t.max() >= self.nv):
            raise MeshConformityError("triangle vertex index out of range")
        if b.size and (b[:, :2].min() < 0 or b[:, :2].max() >= self.nv):
            raise MeshConformityError("boundary edge vertex index out of range")
        if t.shape[0] == 0:
            raise MeshConformityError("mesh has no triangles")
        if np.any(t[:, 0] == t[:, 1]) or np.any(t[:, 1] == t[:, 2]) or np.any(t[:, 0] == t[:, 2]):
            raise MeshConformityError("triangle with repeated vertex")

        areas = self.signed_areas()
        bad = np.where(areas <= 0.0)[0]
        if bad.size:
            raise MeshOrientationError(
                f"triangle {bad[0]} has non-positive signed area {areas[bad[0]]:g}"
            )

        sorted_tris = np.sort(t, axis=1)
        uniq_tris = np.unique(sorted_tris, axis=0)
        if uniq_tris.shape[0] != t.shape[0]:
            raise MeshConformityError("repeated triangle in connectivity")

        edges = np.sort(
            np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1
        )
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        if counts.max() > 2:
            raise MeshConformityError("edge shared by more than two triangles")

        declared = np.sort(b[:, :2], axis=1) if b.size else np.empty((0, 2), np.int64)
        if declared.shape[0] != np.unique(declared, axis=0).shape[0]:
            raise MeshConformityError("duplicate boundary edge declaration")
        actual = uniq[counts == 1]
        if declared.shape[0] != actual.shape[0] or (
            actual.shape[0]
            and not np.array_equal(np.unique(declared, axis=0), actual)
        ):
            raise MeshConformityError(
                "declared boundary edges do not match the once-used mesh edges"
            )


@dataclass(frozen=True)
class MeshQuality:
    h_max: float
    h_min: float
    min_angle: float
    max_angle: float
    shape_regularity_ratio: float


def _edge_lengths(mesh):
    v, t = mesh.vertices, mesh.triangles
    p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    l0 = np.linalg.norm(p2 - p1, axis=1)
    l1 = np.linalg.norm(p0 - p2, axis=1)
    l2 = np.linalg.norm(p1 - p0, axis=1)
    return l0, l1, l2


def triangle_diameters(mesh):
    """Longest edge of every triangle."""
    l0, l1, l2 = _edge_lengths(mesh)
    return np.maximum(np.maximum(l0, l1), l2)


def mesh_quality(mesh):
    """Per-mesh quality summary: diameters, angle range, shape regularity.

    The shape regularity ratio is max_K (diameter of K / inradius of K).
    """
    l0, l1, l2 = _edge_lengths(mesh)
    h = np.maximum(np.maximum(l0, l1), l2)
    areas = mesh.signed_areas()
    s = 0.5 * (l0 + l1 + l2)
    inradius = areas / s

    def angle(a, b, c):
        # angle opposite to side a, by the law of cosines
        cosv = (b * b + c * c - a * a) / (2.0 * b * c)
        return np.arccos(np.clip(cosv, -1.0, 1.0))

    ang0 = angle(l0, l1, l2)
    ang1 = angle(l1, l2, l0)
    ang2 = angle(l2, l0, l1)
    angles = np.stack([ang0, ang1, ang2])
    return MeshQuality(
        h_max=float(h.max()),
        h_min=float(h.min()),
        min_angle=float(angles.min()),
        max_angle=float(angles.max()),
        shape_regularity_ratio=float((h / inradius).max()),
    )


def _criss_cross_arrays(nx, ny, rect):
    x0, y0, x1, y1 = rect
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    ccx, ccy = np.meshgrid(cx, cy)
    centers = np.column_stack([ccx.ravel(), ccy.ravel()])
    vertices = np.vstack([grid, centers])

    ngrid = (nx + 1) * (ny + 1)
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny))
    ix, iy = ix.ravel(), iy.ravel()
    a = iy * (nx + 1) + ix
    b = a + 1
    c = b + (nx + 1)
    d = a + (nx + 1)
    p = ngrid + iy * nx + ix

    tris = np.empty((4 * nx * ny, 3), dtype=np.int64)
    tris[0::4] = np.column_stack([a, b, p])
    tris[1::4] = np.column_stack([b, c, p])
    tris[2::4] = np.column_stack([c, d, p])
    tris[3::4] = np.column_stack([d, a, p])

    bnd = []
    bot = np.where(iy == 0)[0]
    bnd.append(np.column_stack([a[bot], b[bot]]))
    right = np.where(ix == nx - 1)[0]
    bnd.append(np.column_stack([b[right], c[right]]))
    top = np.where(iy == ny - 1)[0]
    bnd.append(np.column_stack([c[top], d[top]]))
    left = np.where(ix == 0)[0]
    bnd.append(np.column_stack([d[left], a[left]]))
    be = np.vstack(bnd)
    boundary = np.column_stack([be, np.ones(len(be), dtype=np.int64)])
    return vertices, tris, boundary


def generate_criss_cross(nx, ny, rect=(0.0, 0.0, 1.0, 1.0)):
    """Criss-cross mesh: each of nx*ny rectangular cells is split into four
    triangles by both diagonals, adding one centre vertex per cell.

    Parameters
    ----------
    nx, ny : int
        Number of cells per direction, >= 1.
    rect : tuple (x0, y0, x1, y1)
        Axis-aligned rectangle, x0 < x1 and y0 < y1.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError("nx and ny must be integers >= 1")
    x0, y0, x1, y1 = map(float, rect)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate rectangle")
    vertices, tris, boundary = _criss_cross_arrays(int(nx), int(ny), (x0, y0, x1, y1))
    return Mesh(vertices, tris, boundary)


def generate_obtuse_layer(level, rect=(-1.0, 0.0, 1.0, 1.0), apex_shift=None):
    """Structured mesh family with a persistent layer of obtuse triangles.

    The coarse mesh splits ``rect`` into two cells, each triangulated
    criss-cross style around an interior apex.  The left cell's apex sits at
    relative height ``apex_shift`` above the cell bottom, which makes the
    bottom triangle of that cell obtuse; the right cell keeps the centred
    apex.  Uniform red refinement preserves the similarity classes, so the
    obtuse triangles multiply into a layer while the maximal angle stays
    fixed across levels.

    With the default ``apex_shift`` the maximal angle is 100 degrees.
    ``level`` = 1 is the coarse eight-triangle mesh, each further level is
    one red refinement.
    """
    if int(level) != level or level < 1:
        raise ValueError("level must be an integer >= 1")
    x0, y0, x1, y1 = map(float, rect)
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate rectangle")
    w = 0.5 * (x1 - x0)
    hc = y1 - y0
    if apex_shift is None:
        # apex height making the apex angle of the shifted cell's bottom
        # triangle exactly 100 degrees
        apex_shift = w / (2.0 * hc * math.tan(math.radians(50.0)))
    apex_shift = float(apex_shift)
    if not (0.0 < apex_shift < 1.0) or not math.isfinite(apex_shift):
        raise ValueError("apex_shift must lie strictly between 0 and 1")

    xm = x0 + w
    vertices = np.array(
        [
            [x0, y0], [xm, y0], [x1, y0],
            [x0, y1], [xm, y1], [x1, y1],
            [x0 + 0.5 * w, y0 + apex_shift * hc],  # shifted apex, left cell
            [xm + 0.5 * w, y0 + 0.5 * hc],         # centred apex, right cell
        ]
    )
    tris = np.array(
        [
            [0, 1, 6], [1, 4, 6], [4, 3, 6], [3, 0, 6],
            [1, 2, 7], [2, 5, 7], [5, 4, 7], [4, 1, 7],
        ],
        dtype=np.int64,
    )
    boundary = np.array(
        [
            [0, 1, 1], [1, 2, 1], [2, 5, 1],
            [5, 4, 1], [4, 3, 1], [3, 0, 1],
        ],
        dtype=np.int64,
    )
    mesh = Mesh(vertices, tris, boundary)
    for _ in range(int(level) - 1):
        mesh = refine_uniform(mesh)
    return mesh


def refine_uniform(mesh):
    """One red refinement: every triangle is split into four congruent
    children through its edge midpoints; boundary markers are inherited."""
    v, t, b = mesh.vertices, mesh.triangles, mesh.boundary_edges
    nv, nt = mesh.nv, mesh.nt

    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    se = np.sort(edges, axis=1)
    uniq, inv = np.unique(se, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    mids = 0.5 * (v[uniq[:, 0]] + v[uniq[:, 1]])
    newv = np.vstack([v, mids])

    m01 = nv + inv[0:nt]
    m12 = nv + inv[nt:2 * nt]
    m20 = nv + inv[2 * nt:3 * nt]
    v0, v1, v2 = t[:, 0], t[:, 1], t[:, 2]

    children = np.empty((4 * nt, 3), dtype=np.int64)
    children[0::4] = np.column_stack([v0, m01, m20])
    children[1::4] = np.column_stack([v1, m12, m01])
    children[2::4] = np.column_stack([v2, m20, m12])
    children[3::4] = np.column_stack([m01, m12, m20])

    if b.size:
        keys = uniq[:, 0] * np.int64(nv) + uniq[:, 1]
        sb = np.sort(b[:, :2], axis=1)
        bq = sb[:, 0] * np.int64(nv) + sb[:, 1]
        pos = np.searchsorted(keys, bq)
        if pos.size and (
            pos.max() >= keys.size or not np.array_equal(keys[pos], bq)
        ):
            raise MeshConformityError("boundary edge missing from triangulation")
        bm = nv + pos
        newb = np.empty((2 * b.shape[0], 3), dtype=np.int64)
        newb[0::2] = np.column_stack([b[:, 0], bm, b[:, 2]])
        newb[1::2] = np.column_stack([bm, b[:, 1], b[:, 2]])
    else:
        newb = np.empty((0, 3), dtype=np.int64)
    return Mesh(newv, children, newb)


def read_mesh(path):
    """Read a mesh from the text format described in the module docstring.

    Raises MeshFormatError for parse problems, MeshOrientationError for
    inverted triangles and MeshConformityError for non-conforming
    connectivity.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    tokens = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0]
        tokens.extend(line.split())
    pos = 0

    def take(n, conv, what):
        nonlocal pos
        if pos + n > len(tokens):
            raise MeshFormatError(f"unexpected end of file while reading {what}")
        out = []
        for k in range(n):
            try:
                out.append(conv(tokens[pos + k]))
            except ValueError as exc:
                raise MeshFormatError(
                    f"bad token {tokens[pos + k]!r} while reading {what}"
                ) from exc
        pos += n
        return out

    nv, nt, nbe = take(3, int, "header")
    if nv < 3 or nt < 1 or nbe < 0:
        raise MeshFormatError("implausible header counts")
    coords = take(2 * nv, float, "vertices")
    tri = take(3 * nt, int, "triangles")
    bed = take(3 * nbe, int, "boundary edges")
    if pos != len(tokens):
        raise MeshFormatError("trailing tokens after boundary edges")

    vertices = np.asarray(coords, dtype=float).reshape(nv, 2)
    triangles = np.asarray(tri, dtype=np.int64).reshape(nt, 3)
    boundary = np.asarray(bed, dtype=np.int64).reshape(nbe, 3)
    if triangles.size and (triangles.min() < 0 or triangles.max() >= nv):
        raise MeshFormatError("triangle vertex index out of range")
    if boundary.size and (boundary[:, :2].min() < 0 or boundary[:, :2].max() >= nv):
        raise MeshFormatError("boundary edge vertex index out of range")

    mesh = Mesh(vertices, triangles, boundary)
    mesh.validate()
    return mesh


def write_mesh(mesh, path):
    """Write a mesh in the text format; coordinates keep full precision."""
    v, t, b = mesh.vertices, mesh.triangles, mesh.boundary_edges
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{mesh.nv} {mesh.nt} {b.shape[0]}\n")
        for x, y in v:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for a, bb, c in t:
            fh.write(f"{a} {bb} {c}\n")
        for a, bb, m in b:
            fh.write(f"{a} {bb} {m}\n")
