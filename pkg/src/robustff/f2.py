"""Affine geometry of designs over GF(2).

Level +1 maps to 0 and level -1 maps to 1, which is exactly the row code
used by :mod:`robustff.design`, so a design's GF(2) image is its row codes.
"""

from __future__ import annotations

from typing import Iterable

from .design import Design, j_vector


def gf2_rank(vectors: Iterable[int]) -> int:
    """Rank of a set of bit vectors over GF(2) (xor basis elimination)."""
    basis: dict[int, int] = {}  # leading bit -> basis vector
    for v in vectors:
        while v:
            lead = v.bit_length() - 1
            if lead not in basis:
                basis[lead] = v
                break
            v ^= basis[lead]
    return len(basis)


def affine_dimension(d: Design) -> int:
    """Dimension of the affine hull of the design points in GF(2)^m."""
    points = sorted(set(d.rows))
    origin = points[0]
    return gf2_rank(p ^ origin for p in points[1:])


def is_affinely_full_dimensional(d: Design) -> bool:
    """True when no affine hyperplane of GF(2)^m contains every run."""
    return affine_dimension(d) == d.m


def max_abs_ratio_below_one(d: Design) -> bool:
    """The j-value characterization: |j_S(d)| < n for every nonempty S."""
    jv = j_vector(d)
    return all(abs(v) < d.n for v in jv[1:])
