"""Nodal box projection: split a field into its constrained part and the
complementary remainder.

The box constrains interior dofs only; boundary dofs carry Dirichlet data
and pass through the split unchanged.  All arithmetic is exact nodewise
clipping, so admissibility of the constrained part holds with zero
tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import NodalField

__all__ = ["BoundsBox", "bounds_arrays", "split", "is_admissible"]


@dataclass(frozen=True, eq=False)
class BoundsBox:
    """Nodewise bounds [lower, upper]; either side may be a scalar, a
    per-dof array, or a NodalField; upper may be +inf."""

    lower: object = 0.0
    upper: object = np.inf

    def __post_init__(self):
        lo, hi = self.lower, self.upper
        if np.isscalar(lo) and np.isscalar(hi) and not float(lo) < float(hi):
            raise ValueError(f"empty box: lower {lo} must be below upper {hi}")


def bounds_arrays(box, space):
    """Expand a BoundsBox to per-dof (lower, upper) arrays over a space."""

    def expand(val, name):
        arr = val.values if isinstance(val, NodalField) else np.asarray(val, float)
        if arr.ndim == 0:
            arr = np.full(space.ndof, float(arr))
        if arr.shape != (space.ndof,):
            raise ValueError(f"{name} bound has shape {arr.shape}, "
                             f"expected scalar or ({space.ndof},)")
        return arr

    lo = expand(box.lower, "lower")
    hi = expand(box.upper, "upper")
    if not np.all(lo < hi):
        raise ValueError("empty box: lower must be strictly below upper")
    return lo, hi


def split(v, box):
    """Split v into (v_plus, v_minus) with v = v_plus + v_minus.

    v_plus clips every interior nodal value into the box; boundary values
    pass through unchanged with v_minus = 0 there.
    """
    space = v.space
    lo, hi = bounds_arrays(box, space)
    plus = v.values.copy()
    idx = space.interior_dofs
    plus[idx] = np.clip(v.values[idx], lo[idx], hi[idx])
    return NodalField(space, plus), NodalField(space, v.values - plus)


def is_admissible(v, box):
    """True iff every interior nodal value lies in the closed box, with no
    tolerance."""
    space = v.space
    lo, hi = bounds_arrays(box, space)
    idx = space.interior_dofs
    vals = v.values[idx]
    return bool(np.all(vals >= lo[idx]) and np.all(vals <= hi[idx]))
