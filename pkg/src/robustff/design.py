"""Two-level designs, their j-values and the B_s characteristic.

A design is stored as a tuple of row codes: bit ``j`` of a code is set when
factor ``j`` sits at level -1 in that run.  Subsets of factors use the same
bitmask convention, so the product column of a subset ``S`` evaluated on row
``r`` is ``(-1) ** popcount(r & S)``.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

MAX_FACTORS = 16

_SEPARATORS = re.compile(r"[,\s]+")


class Encoding(Enum):
    PLUS_MINUS = "pm"
    ZERO_ONE = "01"


class DesignParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def popcount(x: int) -> int:
    return bin(x).count("1")


def subset_mask(factors: Iterable[int]) -> int:
    """Bitmask for a set of 0-based factor indices."""
    mask = 0
    for j in factors:
        mask |= 1 << j
    return mask


def mask_members(mask: int) -> tuple[int, ...]:
    """0-based factor indices contained in ``mask``."""
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return tuple(out)


def encode_row(levels: Sequence[int]) -> int:
    code = 0
    for j, x in enumerate(levels):
        if x == -1:
            code |= 1 << j
        elif x != 1:
            raise ValueError(f"level {x!r} is not +1 or -1")
    return code


def decode_row(code: int, m: int) -> tuple[int, ...]:
    return tuple(-1 if (code >> j) & 1 else 1 for j in range(m))


@dataclass(frozen=True)
class Design:
    """An n-run, m-factor two-level design (rows form a multiset)."""

    m: int
    rows: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= self.m <= MAX_FACTORS:
            raise ValueError(f"number of factors must be in 1..{MAX_FACTORS}, got {self.m}")
        if not self.rows:
            raise ValueError("a design needs at least one run")
        limit = 1 << self.m
        for code in self.rows:
            if not 0 <= code < limit:
                raise ValueError(f"row code {code} has bits above factor {self.m}")

    @property
    def n(self) -> int:
        return len(self.rows)

    @classmethod
    def from_levels(cls, matrix: Sequence[Sequence[int]]) -> "Design":
        matrix = [tuple(int(x) for x in row) for row in matrix]
        if not matrix:
            raise ValueError("a design needs at least one run")
        m = len(matrix[0])
        if any(len(row) != m for row in matrix):
            raise ValueError("ragged design matrix")
        return cls(m, tuple(encode_row(row) for row in matrix))

    def levels(self) -> list[tuple[int, ...]]:
        """The n x m matrix of +1/-1 entries, row order preserved."""
        return [decode_row(code, self.m) for code in self.rows]

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(-1 if (code >> j) & 1 else 1 for code in self.rows)

    def has_distinct_rows(self) -> bool:
        return len(set(self.rows)) == len(self.rows)

    def to_text(self, encoding: Encoding = Encoding.PLUS_MINUS) -> str:
        lines = []
        for row in self.levels():
            if encoding is Encoding.ZERO_ONE:
                lines.append(" ".join("1" if x == 1 else "0" for x in row))
            else:
                lines.append(" ".join(f"{x:2d}" for x in row))
        return "\n".join(lines) + "\n"


def full_factorial(m: int) -> Design:
    return Design(m, tuple(range(1 << m)))


def parse_design(text, encoding: Encoding = Encoding.PLUS_MINUS) -> Design:
    """Read a design from text or a file-like object.

    One run per line, tokens separated by spaces, tabs or commas.  Blank
    lines and lines starting with ``#`` are skipped.  Under ``ZERO_ONE`` the
    token 0 means level -1 and 1 means level +1.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    if encoding is Encoding.ZERO_ONE:
        alphabet = {"0": -1, "1": 1}
    else:
        alphabet = {"1": 1, "+1": 1, "-1": -1}

    rows = []
    m = None
    for lineno, raw in enumerate(text, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = [t for t in _SEPARATORS.split(line) if t]
        if m is None:
            m = len(tokens)
            if m > MAX_FACTORS:
                raise DesignParseError(f"{m} factors exceeds the limit of {MAX_FACTORS}", lineno)
        elif len(tokens) != m:
            raise DesignParseError(f"expected {m} entries, found {len(tokens)}", lineno)
        levels = []
        for tok in tokens:
            if tok not in alphabet:
                raise DesignParseError(f"token {tok!r} is not a valid level", lineno)
            levels.append(alphabet[tok])
        rows.append(encode_row(levels))
    if m is None:
        raise DesignParseError("no design rows found")
    return Design(m, tuple(rows))


def walsh_hadamard(values: Sequence[int]) -> list[int]:
    """Unnormalized Walsh-Hadamard transform of a length-2^k integer table."""
    out = list(values)
    size = len(out)
    h = 1
    while h < size:
        for start in range(0, size, 2 * h):
            for i in range(start, start + h):
                a, b = out[i], out[i + h]
                out[i], out[i + h] = a + b, a - b
        h *= 2
    return out


def row_counts(d: Design) -> list[int]:
    counts = [0] * (1 << d.m)
    for code in d.rows:
        counts[code] += 1
    return counts


def j_vector(d: Design) -> tuple[int, ...]:
    """All j_S(d), indexed by subset mask.

    j_S is the sum over runs of the product of the columns in S; tallying
    the rows and transforming the count table gives every j_S at once.
    """
    return tuple(walsh_hadamard(row_counts(d)))


def j_value(d: Design, subset: int) -> int:
    """j_S(d) for a single subset, by direct summation."""
    return sum(-1 if popcount(code & subset) & 1 else 1 for code in d.rows)


@dataclass(frozen=True)
class BsSpectrum:
    """n^2 * B_s(d) for s = 0..m, kept as integers."""

    numerators: tuple[int, ...]
    n: int

    @property
    def m(self) -> int:
        return len(self.numerators) - 1

    @property
    def denominator(self) -> int:
        return self.n * self.n

    def __getitem__(self, s: int) -> Fraction:
        return Fraction(self.numerators[s], self.denominator)

    def values(self) -> tuple[Fraction, ...]:
        """(B_1, ..., B_m) as exact fractions."""
        return tuple(self[s] for s in range(1, self.m + 1))

    def gma_key(self) -> tuple[int, ...]:
        # same denominator for every entry, so the integers order exactly like B_s
        return self.numerators[1:]


def spectrum_from_j(jv: Sequence[int], m: int, n: int) -> BsSpectrum:
    sums = [0] * (m + 1)
    for subset, value in enumerate(jv):
        sums[popcount(subset)] += value * value
    return BsSpectrum(tuple(sums), n)


def bs_spectrum(d: Design) -> BsSpectrum:
    return spectrum_from_j(j_vector(d), d.m, d.n)


def indicator_ratio(d: Design, subset: int) -> Fraction:
    """j_S(d)/n, which equals the indicator-function coefficient ratio b_S/b_0."""
    if subset == 0:
        raise ValueError("the ratio is only defined for nonempty subsets")
    if subset >> d.m:
        raise ValueError(f"subset {subset:#b} names factors beyond m={d.m}")
    return Fraction(j_value(d, subset), d.n)


def _check_permutation(perm: Sequence[int], size: int, what: str) -> None:
    if sorted(perm) != list(range(size)):
        raise ValueError(f"{what} {list(perm)!r} is not a permutation of 0..{size - 1}")


def permute_code(code: int, colperm: Sequence[int]) -> int:
    """Row code after moving old column ``colperm[k]`` to position ``k``."""
    out = 0
    for k, src in enumerate(colperm):
        if (code >> src) & 1:
            out |= 1 << k
    return out


def permute_subset(subset: int, colperm: Sequence[int]) -> int:
    """Image of a factor subset under the same column move as ``permute_code``."""
    return permute_code(subset, colperm)


def transform(
    d: Design,
    colperm: Sequence[int] | None = None,
    colsigns: int = 0,
    rowperm: Sequence[int] | None = None,
) -> Design:
    """Permute columns, negate the columns flagged in ``colsigns``, reorder rows.

    Output column ``k`` is input column ``colperm[k]``; bit ``k`` of
    ``colsigns`` negates output column ``k``; output row ``i`` is input row
    ``rowperm[i]``.
    """
    colperm = list(range(d.m)) if colperm is None else list(colperm)
    _check_permutation(colperm, d.m, "column permutation")
    if not 0 <= colsigns < (1 << d.m):
        raise ValueError(f"sign mask {colsigns:#b} has bits beyond m={d.m}")
    rows = d.rows
    if rowperm is not None:
        _check_permutation(rowperm, d.n, "row permutation")
        rows = tuple(rows[i] for i in rowperm)
    return Design(d.m, tuple(permute_code(code, colperm) ^ colsigns for code in rows))
