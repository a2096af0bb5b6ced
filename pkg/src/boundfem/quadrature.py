"""Quadrature rules on the reference triangle.

The reference triangle is T = {(x, y) : x >= 0, y >= 0, x + y <= 1}.  A rule
is a pair (points, weights) with points inside T and positive weights summing
to the reference area 1/2.  An integral over a physical triangle K is then
|det J_K| * sum_q w_q f(x_q) with |det J_K| = 2 * area(K).

Low degrees use the classical symmetric interior rules; higher degrees fall
back to a collapsed tensor Gauss-Legendre rule whose exactness follows by
construction from the one-dimensional rule.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import permutations

import numpy as np

__all__ = ["triangle_rule"]

# Symmetric rules stated as barycentric orbits (point, weight per point);
# the weights of each full rule sum to 1 and are halved on output.
_ORBITS = {
    1: [((1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), 1.0)],
    2: [((2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0), 1.0 / 3.0)],
    4: [
        ((0.108103018168070, 0.445948490915965, 0.445948490915965),
         0.223381589678011),
        ((0.816847572980459, 0.091576213509771, 0.091576213509771),
         0.109951743655322),
    ],
    5: [
        ((1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), 0.225),
        ((0.059715871789770, 0.470142064105115, 0.470142064105115),
         0.132394152788506),
        ((0.797426985353087, 0.101286507323456, 0.101286507323456),
         0.125939180544827),
    ],
}


def _expand(orbits):
    pts, wts = [], []
    for bary, w in orbits:
        seen = set()
        for perm in permutations(bary):
            if perm in seen:
                continue
            seen.add(perm)
            pts.append((perm[1], perm[2]))
            wts.append(w)
    return np.asarray(pts, dtype=float), 0.5 * np.asarray(wts, dtype=float)


def _collapsed(degree):
    # Map the unit square onto T by (u, v) -> (u, v * (1 - u)).  The Jacobian
    # factor (1 - u) raises the u-degree of the integrand by one, so n points
    # per direction integrate total degree <= 2n - 2 exactly.
    n = (degree + 3) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    pts = np.column_stack([u.ravel(), (v * (1.0 - u)).ravel()])
    wts = (wu * wv * (1.0 - u)).ravel()
    return pts, wts


@lru_cache(maxsize=None)
def _rule(degree):
    if degree <= 1:
        pts, wts = _expand(_ORBITS[1])
    elif degree == 2:
        pts, wts = _expand(_ORBITS[2])
    elif degree in (3, 4):
        pts, wts = _expand(_ORBITS[4])
    elif degree == 5:
        pts, wts = _expand(_ORBITS[5])
    else:
        pts, wts = _collapsed(degree)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def triangle_rule(degree):
    """Return (points, weights) exact for polynomials of total degree <= degree.

    Parameters
    ----------
    degree : int
        Requested degree of exactness, >= 0.

    Returns
    -------
    points : ndarray, shape (nq, 2)
    weights : ndarray, shape (nq,)
        Positive weights summing to 1/2.
    """
    if degree < 0:
        raise ValueError("quadrature degree must be >= 0")
    return _rule(int(degree))
