import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import strategies as st

from robustff.design import Design
from robustff.reference import hadamard_designs, optimal_12x5


def direct_j(levels, subset_indices):
    """j_S by the definition: sum over runs of the product of the S columns."""
    total = 0
    for row in levels:
        prod = 1
        for j in subset_indices:
            prod *= row[j]
        total += prod
    return total


def brute_offdiag(levels, effects):
    """Off-diagonal sum of squares of X'X/n, building X column by column."""
    n = len(levels)
    cols = []
    for eff in effects:
        cols.append([direct_prod(row, eff) for row in levels])
    total = Fraction(0)
    for a, b in itertools.permutations(range(len(cols)), 2):
        total += Fraction(sum(x * y for x, y in zip(cols[a], cols[b])), n) ** 2
    return total


def direct_prod(row, indices):
    prod = 1
    for j in indices:
        prod *= row[j]
    return prod


def cofactor_det(matrix):
    """Laplace expansion along rows, memoized on the set of columns still free."""
    size = len(matrix)
    memo = {}

    def det(row, cols_mask):
        if row == size:
            return 1
        key = cols_mask
        if key in memo:
            return memo[key]
        total = 0
        sign = 1
        for c in range(size):
            if cols_mask & (1 << c):
                entry = matrix[row][c]
                if entry:
                    total += sign * entry * det(row + 1, cols_mask & ~(1 << c))
                sign = -sign
        memo[key] = total
        return total

    return det(0, (1 << size) - 1)


def random_design(rng: random.Random, n: int, m: int, distinct: bool = False) -> Design:
    if distinct:
        return Design(m, tuple(rng.sample(range(1 << m), n)))
    return Design(m, tuple(rng.randrange(1 << m) for _ in range(n)))


@st.composite
def designs(draw, max_m=5, max_n=12, min_m=1):
    m = draw(st.integers(min_m, max_m))
    n = draw(st.integers(1, max_n))
    rows = draw(st.lists(st.integers(0, (1 << m) - 1), min_size=n, max_size=n))
    return Design(m, tuple(rows))


@pytest.fixture(scope="session")
def d_s():
    return optimal_12x5()


@pytest.fixture(scope="session")
def d_h_all():
    return list(hadamard_designs(5))


@pytest.fixture(scope="session")
def d_h(d_h_all):
    return d_h_all[0]
