"""Reference 12-run, 5-factor designs and an order-12 Hadamard matrix."""

from __future__ import annotations

import itertools
from typing import Iterator

import numpy as np

from .design import Design, parse_design

# Minimizes S^2_{f,0} for f = 1..5 and S^2_{3,1} among 12-run, 5-factor designs.
OPTIMAL_12x5_TEXT = """\
 1  1  1  1  1
 1  1 -1 -1 -1
 1 -1  1  1 -1
 1 -1  1 -1  1
 1 -1 -1  1  1
-1  1  1  1 -1
-1  1  1 -1  1
-1  1 -1  1  1
-1 -1  1  1  1
-1 -1  1 -1 -1
-1 -1 -1  1 -1
-1 -1 -1 -1  1
"""


def optimal_12x5() -> Design:
    return parse_design(OPTIMAL_12x5_TEXT)


def quadratic_character(a: int, q: int) -> int:
    a %= q
    if a == 0:
        return 0
    return 1 if pow(a, (q - 1) // 2, q) == 1 else -1


def paley_hadamard(q: int = 11) -> np.ndarray:
    """Hadamard matrix of order q+1 for a prime q = 3 (mod 4), first column all ones."""
    if q % 4 != 3 or any(q % k == 0 for k in range(2, int(q ** 0.5) + 1)):
        raise ValueError(f"q={q} must be a prime congruent to 3 mod 4")
    jac = np.array([[quadratic_character(j - i, q) for j in range(q)] for i in range(q)])
    size = q + 1
    S = np.zeros((size, size), dtype=int)
    S[0, 1:] = 1
    S[1:, 0] = -1
    S[1:, 1:] = jac
    H = np.eye(size, dtype=int) + S
    H = H * H[:, :1]  # normalize rows so the first column is all ones
    if not np.array_equal(H.T @ H, size * np.eye(size, dtype=int)):
        raise RuntimeError("Paley construction failed the H'H = nI check")
    return H


def hadamard_designs(m: int = 5, order: int = 12) -> Iterator[Design]:
    """Every design formed by m non-constant columns of the order-12 Hadamard matrix."""
    if order != 12:
        raise ValueError("only the order-12 construction is provided")
    if not 1 <= m <= order - 1:
        raise ValueError(f"can pick at most {order - 1} columns, asked for {m}")
    H = paley_hadamard(order - 1)
    for cols in itertools.combinations(range(1, order), m):
        yield Design.from_levels(H[:, cols].tolist())
