"""Information matrices and the S^2 / D model-robustness criteria.

Every quantity here is exact.  An information-matrix entry for effects A and
B is j_{A xor B}(d)/n, so matrices are kept as integer Gram matrices over a
common denominator n.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Sequence

from .design import Design, bs_spectrum, j_vector, popcount
from .models import ModelDistribution, ModelPair

MAX_DET_ORDER = 30


@dataclass(frozen=True)
class InformationMatrix:
    """M = X'X / n for the columns listed in ``effects`` (subset masks)."""

    gram: tuple[tuple[int, ...], ...]
    n: int
    effects: tuple[int, ...]

    @property
    def order(self) -> int:
        return len(self.effects)

    @property
    def entries(self) -> tuple[tuple[Fraction, ...], ...]:
        return tuple(tuple(Fraction(v, self.n) for v in row) for row in self.gram)

    def total_sum_squares(self) -> Fraction:
        return Fraction(sum(v * v for row in self.gram for v in row), self.n * self.n)


def information_matrix(d: Design, mp: ModelPair, jv: Sequence[int] | None = None) -> InformationMatrix:
    if mp.max_factor() >= d.m:
        raise ValueError(f"model {mp} uses a factor beyond m={d.m}")
    if jv is None:
        jv = j_vector(d)
    effects = tuple(mp.effects(d.m))
    gram = tuple(tuple(jv[a ^ b] for b in effects) for a in effects)
    return InformationMatrix(gram, d.n, effects)


def _offdiag_numerator(gram: Sequence[Sequence[int]]) -> int:
    total = 0
    for i, row in enumerate(gram):
        for k, v in enumerate(row):
            if i != k:
                total += v * v
    return total


def ss_offdiagonal(M) -> Fraction:
    """Sum of squared off-diagonal entries of an information matrix or any square matrix."""
    if isinstance(M, InformationMatrix):
        return Fraction(_offdiag_numerator(M.gram), M.n * M.n)
    total = Fraction(0)
    for i, row in enumerate(M):
        for k, v in enumerate(row):
            if i != k:
                total += Fraction(v) ** 2
    return total


@dataclass(frozen=True)
class CriterionCoefficients:
    """Multipliers (a_1, ..., a_6) so that S^2 = sum_s a_s B_s(d)."""

    a: tuple[Fraction, ...]
    tag: str
    m: int
    f: int = 0
    g: int = 0

    def __post_init__(self):
        if len(self.a) != 6:
            raise ValueError("expected six coefficients")


def _ratio2(k: int, total: int) -> Fraction:
    # k(k-1) / (total(total-1)), zero when fewer than two items are drawn
    if k < 2:
        return Fraction(0)
    return Fraction(k * (k - 1), total * (total - 1))


def coefficients_sf0(m: int, f: int) -> CriterionCoefficients:
    """S^2_{f,0}: f active pairs drawn uniformly, no active triples."""
    if m < 2:
        raise ValueError("need at least two factors")
    F = comb(m, 2)
    if not 0 <= f <= F:
        raise ValueError(f"f={f} outside 0..{F} for m={m}")
    p1 = Fraction(f, F)
    p2 = _ratio2(f, F)
    a = (
        2 * (1 + p1 * (m - 1)),
        2 * (1 + p1 + p2 * (m - 2)),
        6 * p1,
        6 * p2,
        Fraction(0),
        Fraction(0),
    )
    return CriterionCoefficients(a, "sf0", m, f, 0)


def coefficients_sFg(m: int, g: int) -> CriterionCoefficients:
    """S^2_{F,g}: every pair active, g active triples drawn uniformly."""
    if m < 3:
        raise ValueError("need at least three factors")
    G = comb(m, 3)
    if not 0 <= g <= G:
        raise ValueError(f"g={g} outside 0..{G} for m={m}")
    p1 = Fraction(g, G)
    p2 = _ratio2(g, G)
    a = (
        2 * m + p1 * (m - 1) * (m - 2),
        2 * m + 2 * p1 * (m - 2) + p2 * (m - 2) * (m - 3),
        6 + 2 * p1 + 6 * p1 * (m - 3),
        6 + 8 * p1 + 6 * p2 * (m - 4),
        20 * p1,
        20 * p2,
    )
    return CriterionCoefficients(a, "sFg", m, comb(m, 2), g)


def coefficients_s31(m: int) -> CriterionCoefficients:
    """S^2_{3,1}: one triple, uniform over all triples, with its three pairs.

    The pair-pair block of M only holds the three pairs inside the active
    triple, each reached twice, so it contributes 2(m-2)/G * B_2 and
    a_2 = 2 + 6(m-2)/G.
    """
    if m < 3:
        raise ValueError("need at least three factors")
    G = comb(m, 3)
    a = (
        2 * (1 + Fraction(9, m)),
        2 + Fraction(6 * (m - 2), G),
        Fraction(2 * (3 * m - 5), G),
        Fraction(8, G),
        Fraction(0),
        Fraction(0),
    )
    return CriterionCoefficients(a, "s31", m, 3, 1)


@dataclass(frozen=True)
class CriterionValue:
    value: Fraction
    criterion: str
    provenance: str  # "closed-form" or "oracle"

    def __float__(self) -> float:
        return float(self.value)


def closed_form_s2(d: Design, coeffs: CriterionCoefficients) -> CriterionValue:
    if coeffs.m != d.m:
        raise ValueError(f"coefficients are for m={coeffs.m}, design has m={d.m}")
    spectrum = bs_spectrum(d)
    value = sum((a * spectrum[s] for s, a in enumerate(coeffs.a, start=1) if s <= d.m), Fraction(0))
    label = coeffs.tag
    if coeffs.tag == "sf0":
        label = f"sf0:f={coeffs.f}"
    elif coeffs.tag == "sFg":
        label = f"sFg:g={coeffs.g}"
    return CriterionValue(value, label, "closed-form")


def _check_support(d: Design, mp: ModelPair) -> None:
    if mp.max_factor() >= d.m:
        raise ValueError(f"model {mp} uses a factor beyond m={d.m}")


def s2_oracle(d: Design, dist: ModelDistribution) -> CriterionValue:
    """E_p[sum of squared off-diagonal entries of M], by enumerating the support."""
    jv = j_vector(d)
    total = Fraction(0)
    seen = False
    for mp, w in dist.support():
        _check_support(d, mp)
        seen = True
        M = information_matrix(d, mp, jv)
        total += w * ss_offdiagonal(M)
    if not seen:
        raise ValueError("empty support")
    return CriterionValue(total, dist.label(), "oracle")


BLOCKS = ("intercept", "main", "pairs", "triples")


def expansion_terms(d: Design, dist: ModelDistribution) -> dict[tuple[str, str], Fraction]:
    """Expected contribution of each block pair of M to the off-diagonal sum.

    Keys are ``(block, block)`` with blocks ordered intercept < main < pairs
    < triples; cross-block entries count both triangles, within-block entries
    count ordered pairs of distinct effects.  The values add up to S^2.
    """
    jv = j_vector(d)
    nn = d.n * d.n
    out = {(a, b): Fraction(0) for i, a in enumerate(BLOCKS) for b in BLOCKS[i:]}
    mains = [1 << i for i in range(d.m)]
    for mp, w in dist.support():
        _check_support(d, mp)
        groups = {"intercept": [0], "main": mains, "pairs": sorted(mp.pairs), "triples": sorted(mp.triples)}
        for i, a in enumerate(BLOCKS):
            for b in BLOCKS[i:]:
                acc = 0
                for x in groups[a]:
                    for y in groups[b]:
                        if x != y:
                            v = jv[x ^ y]
                            acc += v * v
                if a != b:
                    acc *= 2
                out[(a, b)] += w * Fraction(acc, nn)
    return out


def bareiss_determinant(matrix: Sequence[Sequence[int]]) -> int:
    """Determinant of an integer matrix by fraction-free elimination."""
    a = [list(row) for row in matrix]
    size = len(a)
    if any(len(row) != size for row in a):
        raise ValueError("matrix is not square")
    if size == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(size - 1):
        if a[k][k] == 0:
            for r in range(k + 1, size):
                if a[r][k] != 0:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        pivot = a[k][k]
        for i in range(k + 1, size):
            for j in range(k + 1, size):
                # exact division is guaranteed by Sylvester's identity
                a[i][j] = (a[i][j] * pivot - a[i][k] * a[k][j]) // prev
            a[i][k] = 0
        prev = pivot
    return sign * a[-1][-1]


def determinant(M: InformationMatrix) -> Fraction:
    return Fraction(bareiss_determinant(M.gram), M.n ** M.order)


def d_fg(d: Design, dist: ModelDistribution, max_order: int = MAX_DET_ORDER) -> Fraction:
    """E_p[det M_{F,G}(d)]."""
    jv = j_vector(d)
    total = Fraction(0)
    seen = False
    for mp, w in dist.support():
        _check_support(d, mp)
        seen = True
        p = 1 + d.m + mp.f + mp.g
        if p > max_order:
            raise ValueError(f"information matrix order {p} exceeds the cap of {max_order}")
        total += w * determinant(information_matrix(d, mp, jv))
    if not seen:
        raise ValueError("empty support")
    return total


def gma_compare(d1: Design, d2: Design) -> int:
    """-1 if d1 has less aberration than d2, 0 if tied, 1 otherwise."""
    if d1.m != d2.m:
        raise ValueError(f"designs have different numbers of factors ({d1.m} vs {d2.m})")
    k1 = bs_spectrum(d1).values()
    k2 = bs_spectrum(d2).values()
    return (k1 > k2) - (k1 < k2)


@dataclass
class OrderingReport:
    m: int
    checked: list[str] = field(default_factory=list)
    violations: list[tuple[str, int, str]] = field(default_factory=list)
    boundary_equalities: list[tuple[str, int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _strict_chain(a: Sequence[Fraction], order: Sequence[int]) -> list[str]:
    # indices are 1-based coefficient positions; returns the failing links
    bad = []
    for hi, lo in zip(order, order[1:]):
        if not a[hi - 1] > a[lo - 1]:
            bad.append(f"a_{hi}={a[hi - 1]} <= a_{lo}={a[lo - 1]}")
    return bad


def check_proposition_orderings(m: int, which: Sequence[str] = ("sf0", "sFg", "s31")) -> OrderingReport:
    """Check the coefficient orderings claimed for each closed form.

    * sf0, m > 3: a_1 > a_2 > a_3 > a_4 for 1 <= f < F
    * sFg, m > 5: a_1 > ... > a_6 for 1 <= g < G
    * s31, m > 3: a_2 > a_1 > a_3 > a_4

    Orderings outside their stated range of m are skipped.  At f = F and
    g = G the last links tie; those are recorded as boundary equalities.
    """
    report = OrderingReport(m)
    F, G = comb(m, 2), comb(m, 3)
    if "sf0" in which and m > 3:
        report.checked.append("sf0")
        for f in range(1, F):
            for msg in _strict_chain(coefficients_sf0(m, f).a, (1, 2, 3, 4)):
                report.violations.append(("sf0", m, f"f={f}: {msg}"))
        a = coefficients_sf0(m, F).a
        if a[2] == a[3]:
            report.boundary_equalities.append(("sf0", m, f"f={F}: a_3 = a_4 = {a[2]}"))
    if "sFg" in which and m > 5:
        report.checked.append("sFg")
        for g in range(1, G):
            for msg in _strict_chain(coefficients_sFg(m, g).a, (1, 2, 3, 4, 5, 6)):
                report.violations.append(("sFg", m, f"g={g}: {msg}"))
        a = coefficients_sFg(m, G).a
        if a[4] == a[5]:
            report.boundary_equalities.append(("sFg", m, f"g={G}: a_5 = a_6 = {a[4]}"))
    if "s31" in which and m > 3:
        report.checked.append("s31")
        for msg in _strict_chain(coefficients_s31(m).a, (2, 1, 3, 4)):
            report.violations.append(("s31", m, msg))
    return report


@dataclass(frozen=True)
class CriterionSpec:
    """A closed-form S^2 criterion: ``sf0`` (with f), ``sFg`` (with g) or ``s31``."""

    tag: str
    f: int = 0
    g: int = 0

    def __post_init__(self):
        if self.tag not in ("sf0", "sFg", "s31"):
            raise ValueError(f"unknown criterion {self.tag!r}")

    def coefficients(self, m: int) -> CriterionCoefficients:
        if self.tag == "sf0":
            return coefficients_sf0(m, self.f)
        if self.tag == "sFg":
            return coefficients_sFg(m, self.g)
        return coefficients_s31(m)

    def distribution(self, m: int) -> ModelDistribution:
        from .models import all_pairs_uniform_g, hierarchical_31, uniform_f

        if self.tag == "sf0":
            return uniform_f(m, self.f)
        if self.tag == "sFg":
            return all_pairs_uniform_g(m, self.g)
        return hierarchical_31(m)

    def __str__(self) -> str:
        if self.tag == "sf0":
            return f"sf0:f={self.f}"
        if self.tag == "sFg":
            return f"sFg:g={self.g}"
        return "s31"


def _int_range(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    if sep:
        return list(range(int(lo), int(hi) + 1))
    return [int(text)]


def parse_criteria(text: str) -> list[CriterionSpec]:
    """Parse ``s31``, ``sf0:f=3``, ``sf0:f=1..5`` or ``sFg:g=0..2``."""
    tag, _, params = text.partition(":")
    if tag == "s31":
        if params:
            raise ValueError("s31 takes no parameters")
        return [CriterionSpec("s31")]
    key = {"sf0": "f", "sFg": "g"}.get(tag)
    if key is None:
        raise ValueError(f"unknown criterion {text!r}")
    name, eq, values = params.partition("=")
    if name != key or not eq:
        raise ValueError(f"{tag} needs a parameter like {tag}:{key}=1")
    try:
        ks = _int_range(values)
    except ValueError as exc:
        raise ValueError(f"bad parameter range {values!r}") from exc
    return [CriterionSpec(tag, **{key: k}) for k in ks]
