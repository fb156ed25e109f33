"""Active-interaction model pairs (F, G) and distributions over them.

Effects are subset masks as in :mod:`robustff.design`; a model pair holds
the masks of the active two-factor interactions (F) and three-factor
interactions (G).  Distributions stream their support lazily with exact
rational weights.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import comb
from typing import Iterable, Iterator

from .design import mask_members, popcount, subset_mask


class Scenario(Enum):
    UNIFORM_F_G_ZERO = "sf0"        # uniform over f-subsets of all pairs, no triples
    ALL_PAIRS_UNIFORM_G = "sFg"     # every pair active, uniform over g-subsets of triples
    HIERARCHICAL_31 = "s31"         # one triple plus its three pairs
    UNIFORM_CONSISTENT = "hier"     # uniform over all consistent (F, G) with |F|=f, |G|=g
    UNIFORM_G_THEN_F = "hier-gf"    # uniform over G, then uniform over consistent F
    EXPLICIT = "explicit"


def all_pairs(m: int) -> list[int]:
    return [subset_mask(c) for c in itertools.combinations(range(m), 2)]


def all_triples(m: int) -> list[int]:
    return [subset_mask(c) for c in itertools.combinations(range(m), 3)]


def triple_pairs(triple: int) -> frozenset[int]:
    a, b, c = mask_members(triple)
    return frozenset({subset_mask((a, b)), subset_mask((a, c)), subset_mask((b, c))})


@dataclass(frozen=True)
class ScenarioCounts:
    m: int
    f: int = 0
    g: int = 0

    @property
    def F(self) -> int:
        return comb(self.m, 2)

    @property
    def G(self) -> int:
        return comb(self.m, 3)


def _sort_key(mask: int) -> tuple[int, tuple[int, ...]]:
    return popcount(mask), mask_members(mask)


@dataclass(frozen=True)
class ModelPair:
    pairs: frozenset[int] = frozenset()
    triples: frozenset[int] = frozenset()

    def __post_init__(self):
        for s in self.pairs:
            if popcount(s) != 2:
                raise ValueError(f"{mask_members(s)} is not a two-factor interaction")
        for s in self.triples:
            if popcount(s) != 3:
                raise ValueError(f"{mask_members(s)} is not a three-factor interaction")

    @property
    def f(self) -> int:
        return len(self.pairs)

    @property
    def g(self) -> int:
        return len(self.triples)

    def max_factor(self) -> int:
        """Largest factor index used, or -1 for the empty model."""
        masks = self.pairs | self.triples
        return max((mask.bit_length() - 1 for mask in masks), default=-1)

    def effects(self, m: int) -> list[int]:
        """Columns of the model matrix: intercept, main effects, F, then G."""
        return ([0] + [1 << i for i in range(m)]
                + sorted(self.pairs, key=_sort_key) + sorted(self.triples, key=_sort_key))

    def __str__(self) -> str:
        def fmt(masks):
            return " ".join("{" + ",".join(str(i + 1) for i in mask_members(s)) + "}"
                            for s in sorted(masks, key=_sort_key))
        return f"{fmt(self.pairs)} | {fmt(self.triples)}".strip()


def is_hierarchically_consistent(mp: ModelPair) -> bool:
    return all(triple_pairs(t) <= mp.pairs for t in mp.triples)


@dataclass
class ModelDistribution:
    """A probability distribution over model pairs with exact weights.

    Enumerated scenarios generate their support on demand; ``EXPLICIT``
    carries a stored list of ``(ModelPair, weight)``.
    """

    scenario: Scenario
    counts: ScenarioCounts
    explicit: list[tuple[ModelPair, Fraction]] = field(default_factory=list)

    def support(self) -> Iterator[tuple[ModelPair, Fraction]]:
        return enumerate_models(self.counts, self.scenario, self.explicit)

    def support_size(self) -> int:
        return support_size(self.counts, self.scenario, self.explicit)

    def label(self) -> str:
        c = self.counts
        if self.scenario is Scenario.UNIFORM_F_G_ZERO:
            return f"sf0:f={c.f}"
        if self.scenario is Scenario.ALL_PAIRS_UNIFORM_G:
            return f"sFg:g={c.g}"
        if self.scenario is Scenario.HIERARCHICAL_31:
            return "s31"
        if self.scenario is Scenario.EXPLICIT:
            return "explicit"
        return f"{self.scenario.value}:f={c.f},g={c.g}"


def uniform_f(m: int, f: int) -> ModelDistribution:
    return ModelDistribution(Scenario.UNIFORM_F_G_ZERO, ScenarioCounts(m, f, 0))


def all_pairs_uniform_g(m: int, g: int) -> ModelDistribution:
    return ModelDistribution(Scenario.ALL_PAIRS_UNIFORM_G, ScenarioCounts(m, comb(m, 2), g))


def hierarchical_31(m: int) -> ModelDistribution:
    return ModelDistribution(Scenario.HIERARCHICAL_31, ScenarioCounts(m, 3, 1))


def point_mass(m: int, mp: ModelPair) -> ModelDistribution:
    return explicit_distribution(m, [(mp, Fraction(1))])


def explicit_distribution(m: int, support: Iterable[tuple[ModelPair, Fraction]]) -> ModelDistribution:
    support = [(mp, Fraction(w)) for mp, w in support]
    if not support:
        raise ValueError("empty support")
    total = sum(w for _, w in support)
    if total != 1:
        raise ValueError(f"weights sum to {total}, not 1")
    if any(w < 0 for _, w in support):
        raise ValueError("negative weight")
    for mp, _ in support:
        if mp.max_factor() >= m:
            raise ValueError(f"model {mp} uses a factor beyond m={m}")
    return ModelDistribution(Scenario.EXPLICIT, ScenarioCounts(m), support)


def _validate(counts: ScenarioCounts, scenario: Scenario) -> None:
    m, f, g = counts.m, counts.f, counts.g
    if not 0 <= f <= counts.F:
        raise ValueError(f"f={f} outside 0..{counts.F} for m={m}")
    if not 0 <= g <= counts.G:
        raise ValueError(f"g={g} outside 0..{counts.G} for m={m}")
    if scenario is Scenario.UNIFORM_F_G_ZERO and g != 0:
        raise ValueError("the uniform-F scenario has no active triples (g=0)")
    if scenario is Scenario.ALL_PAIRS_UNIFORM_G and f != counts.F:
        raise ValueError(f"the all-pairs scenario needs f=F={counts.F}")
    if scenario is Scenario.HIERARCHICAL_31 and (f, g) != (3, 1):
        raise ValueError("the hierarchical (3,1) scenario needs f=3, g=1")
    if scenario is Scenario.HIERARCHICAL_31 and m < 3:
        raise ValueError("the hierarchical (3,1) scenario needs m >= 3")


def _consistent_completions(triples: tuple[int, ...], pairs: list[int], f: int) -> Iterator[frozenset[int]]:
    required = frozenset().union(*(triple_pairs(t) for t in triples))
    if len(required) > f:
        return
    rest = [p for p in pairs if p not in required]
    for extra in itertools.combinations(rest, f - len(required)):
        yield required | frozenset(extra)


def _consistent_models(m: int, f: int, g: int) -> Iterator[ModelPair]:
    pairs = all_pairs(m)
    for triples in itertools.combinations(all_triples(m), g):
        for fset in _consistent_completions(triples, pairs, f):
            yield ModelPair(fset, frozenset(triples))


def enumerate_models(
    counts: ScenarioCounts,
    scenario: Scenario,
    explicit: list[tuple[ModelPair, Fraction]] | None = None,
) -> Iterator[tuple[ModelPair, Fraction]]:
    """Stream the support of a scenario with its exact weights."""
    if scenario is Scenario.EXPLICIT:
        if not explicit:
            raise ValueError("empty support")
        yield from explicit
        return
    _validate(counts, scenario)
    m, f, g = counts.m, counts.f, counts.g

    if scenario is Scenario.UNIFORM_F_G_ZERO:
        w = Fraction(1, comb(counts.F, f))
        for fset in itertools.combinations(all_pairs(m), f):
            yield ModelPair(frozenset(fset)), w
    elif scenario is Scenario.ALL_PAIRS_UNIFORM_G:
        w = Fraction(1, comb(counts.G, g))
        pairs = frozenset(all_pairs(m))
        for gset in itertools.combinations(all_triples(m), g):
            yield ModelPair(pairs, frozenset(gset)), w
    elif scenario is Scenario.HIERARCHICAL_31:
        w = Fraction(1, counts.G)
        for t in all_triples(m):
            yield ModelPair(triple_pairs(t), frozenset({t})), w
    elif scenario is Scenario.UNIFORM_CONSISTENT:
        total = support_size(counts, scenario)
        if total == 0:
            raise ValueError(f"no hierarchically consistent model with f={f}, g={g}, m={m}")
        w = Fraction(1, total)
        for mp in _consistent_models(m, f, g):
            yield mp, w
    elif scenario is Scenario.UNIFORM_G_THEN_F:
        pairs = all_pairs(m)
        feasible = [t for t in itertools.combinations(all_triples(m), g)
                    if len(frozenset().union(*(triple_pairs(x) for x in t))) <= f]
        if not feasible:
            raise ValueError(f"no hierarchically consistent model with f={f}, g={g}, m={m}")
        for triples in feasible:
            completions = list(_consistent_completions(triples, pairs, f))
            w = Fraction(1, len(feasible) * len(completions))
            for fset in completions:
                yield ModelPair(fset, frozenset(triples)), w
    else:  # pragma: no cover
        raise ValueError(f"unknown scenario {scenario}")


def support_size(
    counts: ScenarioCounts,
    scenario: Scenario,
    explicit: list[tuple[ModelPair, Fraction]] | None = None,
) -> int:
    """Number of model pairs in the support, without building it."""
    if scenario is Scenario.EXPLICIT:
        return len(explicit or ())
    _validate(counts, scenario)
    if scenario is Scenario.UNIFORM_F_G_ZERO:
        return comb(counts.F, counts.f)
    if scenario is Scenario.ALL_PAIRS_UNIFORM_G:
        return comb(counts.G, counts.g)
    if scenario is Scenario.HIERARCHICAL_31:
        return counts.G
    # consistent scenarios: count completions per triple set
    total = 0
    rest_total = counts.F
    for triples in itertools.combinations(all_triples(counts.m), counts.g):
        need = len(frozenset().union(*(triple_pairs(t) for t in triples)))
        if need <= counts.f:
            total += comb(rest_total - need, counts.f - need)
    return total


_WEIGHT_LINE = re.compile(r"^\s*([^:]+?)\s*:(.*)$")
_BRACES = re.compile(r"\{([^}]*)\}")


def parse_explicit_weights(text: str, m: int) -> ModelDistribution:
    """Parse lines of the form ``w : {i,j} {k,l} | {a,b,c}`` (1-based factors)."""
    support = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        match = _WEIGHT_LINE.match(line)
        if not match:
            raise ValueError(f"line {lineno}: expected 'weight : pairs | triples'")
        try:
            weight = Fraction(match.group(1))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad weight {match.group(1)!r}") from exc
        body = match.group(2)
        left, _, right = body.partition("|")
        groups = []
        for part, size in ((left, 2), (right, 3)):
            masks = set()
            for inner in _BRACES.findall(part):
                idx = [int(tok) - 1 for tok in re.split(r"[,\s]+", inner.strip()) if tok]
                if len(set(idx)) != size or any(not 0 <= i < m for i in idx):
                    raise ValueError(f"line {lineno}: {{{inner}}} is not a valid {size}-factor interaction for m={m}")
                masks.add(subset_mask(idx))
            groups.append(frozenset(masks))
        support.append((ModelPair(groups[0], groups[1]), weight))
    return explicit_distribution(m, support)
