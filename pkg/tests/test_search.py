import itertools
import random
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_design
from robustff.criteria import CriterionSpec, closed_form_s2, s2_oracle
from robustff.design import Design, bs_spectrum, full_factorial, j_vector, transform
from robustff.f2 import is_affinely_full_dimensional
from robustff.reference import paley_hadamard
from robustff.search import (
    SearchConfig,
    SearchSpaceTooLarge,
    _characters,
    canonicalize,
    exchange_search,
    exhaustive_search,
    hadamard_designs,
    is_canonical,
)


def _orbit(rows, m):
    out = set()
    for perm in itertools.permutations(range(m)):
        for signs in range(1 << m):
            out.add(tuple(sorted(transform(Design(m, rows), perm, signs).rows)))
    return out


def test_canonical_form_of_transformed_design(d_s):
    rng = random.Random(8)
    base = canonicalize(d_s)
    for _ in range(100):
        d = random_design(rng, 12, 5)
        perm = list(range(5))
        rng.shuffle(perm)
        rowperm = list(range(12))
        rng.shuffle(rowperm)
        g = (perm, rng.randrange(32), rowperm)
        assert canonicalize(transform(d, *g)) == canonicalize(d)
        assert canonicalize(transform(d_s, *g)) == base


def test_canonical_form_is_orbit_minimum():
    rng = random.Random(1)
    for _ in range(20):
        m = rng.randint(1, 3)
        d = random_design(rng, rng.randint(1, 5), m)
        assert canonicalize(d).rows == min(_orbit(d.rows, m))


def test_canonicalize_full_factorial_and_idempotence(d_s):
    assert canonicalize(full_factorial(4)).rows == tuple(range(16))
    cf = canonicalize(d_s)
    assert canonicalize(cf.design()) == cf
    assert is_canonical(cf.design())


def test_canonicalize_limits():
    with pytest.raises(ValueError):
        canonicalize(Design(9, (0,)))


def test_canonicalize_m8_runs():
    d = random_design(random.Random(0), 6, 8)
    assert canonicalize(transform(d, list(range(7, -1, -1)), 0b1010)) == canonicalize(d)


def test_hadamard_matrix():
    H = paley_hadamard(11)
    assert (H.T @ H == 12 * np.eye(12, dtype=int)).all()
    assert (H[:, 0] == 1).all()
    with pytest.raises(ValueError):
        paley_hadamard(13)


def test_hadamard_designs(d_h_all):
    assert len(d_h_all) == 462
    for d in d_h_all:
        b = bs_spectrum(d)
        assert b[1] == b[2] == 0
        assert b.numerators[3:5] == (160, 80)  # 10/9 and 5/9
        assert is_affinely_full_dimensional(d)
    assert len(list(hadamard_designs(3))) == 165
    with pytest.raises(ValueError):
        next(hadamard_designs(12))


def _brute_minimum(n, m, spec):
    dist = spec.distribution(m)
    values = {}
    for rows in itertools.combinations(range(1 << m), n):
        values[rows] = s2_oracle(Design(m, rows), dist).value
    best = min(values.values())
    return best, {rows for rows, v in values.items() if v == best}


@pytest.mark.parametrize("spec", [CriterionSpec("sf0", f=1), CriterionSpec("s31")])
def test_exhaustive_m4_matches_brute_force(spec):
    result = exhaustive_search(SearchConfig(12, 4, spec, method="exhaustive"))
    best, argmins = _brute_minimum(12, 4, spec)
    assert result.value == best
    for d in result.designs:
        assert s2_oracle(d, spec.distribution(4)).value == best
    # every brute-force minimizer falls in one of the reported classes
    forms = {cf.rows for cf in result.canonical_forms}
    assert {canonicalize(Design(4, rows)).rows for rows in argmins} == forms


def test_exhaustive_full_factorial_2x2():
    result = exhaustive_search(SearchConfig(4, 2, CriterionSpec("sf0", f=1), method="exhaustive"))
    assert result.value == 0
    assert [d.rows for d in result.designs] == [(0, 1, 2, 3)]


def test_exhaustive_class_count_m2_n3():
    orbits = {min(_orbit(rows, 2)) for rows in itertools.combinations(range(4), 3)}
    result = exhaustive_search(SearchConfig(3, 2, CriterionSpec("sf0", f=1), method="exhaustive"))
    assert result.visited == len(orbits) == 1


@pytest.mark.parametrize("m, n", [(3, 4), (3, 5), (4, 6)])
def test_exhaustive_class_count_against_orbits(m, n):
    orbits = {min(_orbit(rows, m)) for rows in itertools.combinations(range(1 << m), n)}
    result = exhaustive_search(SearchConfig(n, m, CriterionSpec("sf0", f=1), method="exhaustive"))
    assert result.visited == len(orbits)


def test_exhaustive_replicated_class_count():
    orbits = {min(_orbit(rows, 2)) for rows in itertools.combinations_with_replacement(range(4), 3)}
    cfg = SearchConfig(3, 2, CriterionSpec("sf0", f=1), method="exhaustive", distinct_rows=False)
    assert exhaustive_search(cfg).visited == len(orbits)


def test_exhaustive_space_bound():
    cfg = SearchConfig(12, 5, CriterionSpec("s31"), method="exhaustive")
    with pytest.raises(SearchSpaceTooLarge):
        exhaustive_search(cfg)


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(17, 4, CriterionSpec("s31"))
    with pytest.raises(ValueError):
        SearchConfig(12, 5, CriterionSpec("sf0", f=11))
    with pytest.raises(ValueError):
        SearchConfig(12, 5, CriterionSpec("s31"), method="anneal")


def test_exchange_determinism():
    cfg = SearchConfig(12, 5, CriterionSpec("sf0", f=2), restarts=5, seed=3)
    a, b = exchange_search(cfg).to_dict(False), exchange_search(cfg).to_dict(False)
    assert a == b


def test_exchange_workers_do_not_change_result():
    cfg = SearchConfig(12, 5, CriterionSpec("s31"), restarts=6, seed=11)
    serial = exchange_search(cfg).to_dict(False)
    cfg.workers = 2
    assert exchange_search(cfg).to_dict(False) == serial


def test_exchange_reported_value_reevaluates():
    spec = CriterionSpec("sf0", f=3)
    result = exchange_search(SearchConfig(12, 5, spec, restarts=10, seed=5))
    for d in result.designs:
        assert closed_form_s2(d, spec.coefficients(5)).value == result.value
        assert s2_oracle(d, spec.distribution(5)).value == result.value


@pytest.mark.parametrize("spec", [CriterionSpec("sf0", f=1), CriterionSpec("sf0", f=4), CriterionSpec("s31"),
                                  CriterionSpec("sFg", g=1)])
def test_exchange_never_beats_exhaustive(spec):
    exhaustive = exhaustive_search(SearchConfig(12, 4, spec, method="exhaustive"))
    exchange = exchange_search(SearchConfig(12, 4, spec, restarts=10, seed=2))
    assert exchange.value >= exhaustive.value


def test_exchange_replicated_rows():
    spec = CriterionSpec("sf0", f=1)
    result = exchange_search(SearchConfig(6, 3, spec, restarts=5, seed=1, distinct_rows=False))
    assert closed_form_s2(result.designs[0], spec.coefficients(3)).value == result.value


def test_incremental_j_update_matches_recompute():
    rng = random.Random(6)
    chi = _characters(5)
    for _ in range(50):
        d = random_design(rng, 12, 5)
        jv = np.array(j_vector(d))
        i, new = rng.randrange(12), rng.randrange(32)
        updated = jv - chi[d.rows[i]] + chi[new]
        rows = list(d.rows)
        rows[i] = new
        assert tuple(int(v) for v in updated) == j_vector(Design(5, tuple(rows)))


def test_exchange_tolerance_stops_early():
    spec = CriterionSpec("sf0", f=1)
    loose = exchange_search(SearchConfig(12, 5, spec, restarts=3, seed=4, tolerance=Fraction(100)))
    assert all(t["steps"] == 0 for t in loose.trace)


def test_search_result_document(d_s):
    result = exchange_search(SearchConfig(12, 5, CriterionSpec("s31"), restarts=20, seed=7))
    doc = result.to_dict()
    assert doc["value"] == {"numerator": 16, "denominator": 9}
    assert doc["decimal"] == "1.77778"
    assert doc["canonical_forms"] == [list(canonicalize(d_s).rows)]
    assert "wall_time" in doc and "wall_time" not in result.to_dict(include_time=False)
