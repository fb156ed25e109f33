import itertools
from collections import defaultdict
from fractions import Fraction
from math import comb

import pytest

from robustff.design import subset_mask
from robustff.models import (
    ModelDistribution,
    ModelPair,
    Scenario,
    ScenarioCounts,
    all_pairs,
    enumerate_models,
    explicit_distribution,
    hierarchical_31,
    is_hierarchically_consistent,
    parse_explicit_weights,
    support_size,
)


def P(*pairs):
    return frozenset(subset_mask(i - 1 for i in p) for p in pairs)


def test_hierarchical_consistency_examples():
    assert is_hierarchically_consistent(ModelPair(P((1, 2), (1, 3), (2, 3)), P((1, 2, 3))))
    assert not is_hierarchically_consistent(ModelPair(P((1, 2), (1, 3)), P((1, 2, 3))))
    assert is_hierarchically_consistent(ModelPair(P((1, 4)), frozenset()))


def test_model_pair_rejects_wrong_sizes():
    with pytest.raises(ValueError):
        ModelPair(P((1, 2, 3)))
    with pytest.raises(ValueError):
        ModelPair(frozenset(), P((1, 2)))


def test_scenario_counts():
    c = ScenarioCounts(5, 2, 1)
    assert (c.F, c.G) == (10, 10)


def test_hierarchical_31_support_m5():
    support = list(hierarchical_31(5).support())
    assert len(support) == 10
    assert all(w == Fraction(1, 10) for _, w in support)
    assert all(is_hierarchically_consistent(mp) and mp.f == 3 and mp.g == 1 for mp, _ in support)


def test_uniform_f_all_pairs_m4():
    support = list(enumerate_models(ScenarioCounts(4, 6, 0), Scenario.UNIFORM_F_G_ZERO))
    assert support == [(ModelPair(frozenset(all_pairs(4))), Fraction(1))]


def test_uniform_f_m5_f2_brute_force():
    support = list(enumerate_models(ScenarioCounts(5, 2, 0), Scenario.UNIFORM_F_G_ZERO))
    pairs = list(itertools.combinations(range(5), 2))
    expected = {frozenset(subset_mask(p) for p in two) for two in itertools.combinations(pairs, 2)}
    assert {mp.pairs for mp, _ in support} == expected
    assert len(support) == 45


@pytest.mark.parametrize("m", range(2, 7))
def test_support_sizes_and_weights(m):
    F, G = comb(m, 2), comb(m, 3)
    for f in range(F + 1):
        counts = ScenarioCounts(m, f, 0)
        support = list(enumerate_models(counts, Scenario.UNIFORM_F_G_ZERO))
        assert len(support) == comb(F, f) == support_size(counts, Scenario.UNIFORM_F_G_ZERO)
        assert sum(w for _, w in support) == 1
    for g in range(min(G, 4) + 1):
        counts = ScenarioCounts(m, F, g)
        support = list(enumerate_models(counts, Scenario.ALL_PAIRS_UNIFORM_G))
        assert len(support) == comb(G, g)
        assert sum(w for _, w in support) == 1


def test_hierarchical_31_marginal_on_pairs():
    m = 5
    marginal = defaultdict(Fraction)
    for mp, w in hierarchical_31(m).support():
        marginal[mp.pairs] += w
    assert all(w == Fraction(1, comb(m, 3)) for w in marginal.values())
    # only pair sets forming a triangle carry mass
    assert len(marginal) == comb(m, 3)


def _brute_consistent(m, f, g):
    pairs = all_pairs(m)
    triples = [subset_mask(t) for t in itertools.combinations(range(m), 3)]
    out = set()
    for fs in itertools.combinations(pairs, f):
        for gs in itertools.combinations(triples, g):
            mp = ModelPair(frozenset(fs), frozenset(gs))
            if is_hierarchically_consistent(mp):
                out.add(mp)
    return out


@pytest.mark.parametrize("m, f, g", [(4, 3, 1), (4, 4, 1), (5, 3, 1), (5, 5, 2), (4, 6, 2)])
def test_uniform_consistent_matches_rejection(m, f, g):
    counts = ScenarioCounts(m, f, g)
    support = list(enumerate_models(counts, Scenario.UNIFORM_CONSISTENT))
    assert {mp for mp, _ in support} == _brute_consistent(m, f, g)
    assert len({w for _, w in support}) == 1
    assert sum(w for _, w in support) == 1
    assert support_size(counts, Scenario.UNIFORM_CONSISTENT) == len(support)


@pytest.mark.parametrize("m, f, g", [(4, 4, 1), (5, 5, 2)])
def test_g_then_f_marginal_uniform_over_g(m, f, g):
    support = list(enumerate_models(ScenarioCounts(m, f, g), Scenario.UNIFORM_G_THEN_F))
    assert {mp for mp, _ in support} == _brute_consistent(m, f, g)
    by_g = defaultdict(Fraction)
    for mp, w in support:
        by_g[mp.triples] += w
    assert len(set(by_g.values())) == 1
    assert sum(by_g.values()) == 1


def test_consistent_scenarios_reduce_to_31():
    base = sorted((str(mp), w) for mp, w in hierarchical_31(5).support())
    for scenario in (Scenario.UNIFORM_CONSISTENT, Scenario.UNIFORM_G_THEN_F):
        got = sorted((str(mp), w) for mp, w in enumerate_models(ScenarioCounts(5, 3, 1), scenario))
        assert got == base


@pytest.mark.parametrize(
    "counts, scenario",
    [
        (ScenarioCounts(4, 7, 0), Scenario.UNIFORM_F_G_ZERO),
        (ScenarioCounts(4, 2, 1), Scenario.UNIFORM_F_G_ZERO),
        (ScenarioCounts(4, 5, 1), Scenario.ALL_PAIRS_UNIFORM_G),
        (ScenarioCounts(5, 3, 2), Scenario.HIERARCHICAL_31),
        (ScenarioCounts(4, 2, 1), Scenario.UNIFORM_CONSISTENT),
    ],
)
def test_infeasible_scenarios(counts, scenario):
    with pytest.raises(ValueError):
        list(enumerate_models(counts, scenario))


def test_explicit_weights_file():
    text = """
    # asymmetric support
    1/2 : {1,2} {3,4} | {1,2,3}
    0.25 : {4,5} |
    1/4 : |
    """
    dist = parse_explicit_weights(text, 5)
    support = list(dist.support())
    assert [w for _, w in support] == [Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)]
    assert support[0][0] == ModelPair(P((1, 2), (3, 4)), P((1, 2, 3)))
    assert support[2][0] == ModelPair()


@pytest.mark.parametrize(
    "text",
    ["1/2 : {1,2} |", "1 : {1,2,3} |", "1 : | {1,2}", "1 : {1,9} |", "x : |", "no colon"],
)
def test_explicit_weights_errors(text):
    with pytest.raises(ValueError):
        parse_explicit_weights(text, 5)


def test_explicit_distribution_validation():
    with pytest.raises(ValueError):
        explicit_distribution(3, [])
    with pytest.raises(ValueError):
        explicit_distribution(3, [(ModelPair(P((1, 4))), 1)])
    dist = explicit_distribution(4, [(ModelPair(P((1, 4))), 1)])
    assert isinstance(dist, ModelDistribution) and dist.support_size() == 1
