import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from permforce import Permutation, enumerate_permutations
from permforce.forcing import (
    VERDICT_CERTIFIED,
    VERDICT_UNDECIDED,
    FormalCombination,
    LemmaViolation,
    check_lemma_constraints,
    classify_set,
    coefficient_matrix,
    cover_matrix,
    dependence,
    explained_non_forcing,
    search_dependent_sets,
    valid_zero_sum_orders,
    verify_constant_cover,
    verify_zero_sums,
)
from permforce.gradpoly import gradient_polynomial, polynomial_sum

P = Permutation.parse
S3 = enumerate_permutations(3)


def names(perms):
    return tuple(str(p) for p in perms)


def test_cover_matrix_examples():
    assert cover_matrix(FormalCombination.of([P("12"), P("21")], [1, 1])) == [[1, 1], [1, 1]]
    assert cover_matrix(FormalCombination.of(S3, [1] * 6)) == [[2] * 3] * 3
    assert cover_matrix(FormalCombination.of([P("12"), P("21")], [1, -1])) == [[1, -1], [-1, 1]]
    with pytest.raises(ValueError):
        FormalCombination.of([P("12"), P("123")], [1, 1])
    with pytest.raises(ValueError):
        FormalCombination(())


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(enumerate_permutations(4)), min_size=1, max_size=6),
       st.lists(st.fractions(-3, 3, max_denominator=5), min_size=6, max_size=6))
def test_cover_line_sums(perms, ws):
    cov = cover_matrix(FormalCombination.of(perms, ws[: len(perms)]))
    total = sum(ws[: len(perms)])
    assert all(sum(r) == total for r in cov)
    assert all(sum(c) == total for c in zip(*cov))


def test_dependence_examples():
    r = dependence([P("12")])
    assert r.status == "independent" and r.certificate.rank == 1 and r.certificate.verdict == "not forcing"
    r = dependence([P("12"), P("21")])
    assert r.dependent and r.kernel == (1, 1)
    r = dependence(enumerate_permutations(4))
    assert r.dependent and r.nullity == 24 - 9


def test_dependence_rejections():
    for bad in ([], [P("1")], [P("12"), P("12")], [P("1"), P("12")]):
        with pytest.raises(ValueError):
            dependence(bad)


def test_kernel_normalization():
    r = dependence([P("12"), P("123"), P("321")])
    assert r.kernel == (1, F(-2, 3), F(2, 3))
    assert max(abs(t) for t in r.kernel) == 1


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([p for k in (2, 3, 4) for p in enumerate_permutations(k)]),
                min_size=1, max_size=5, unique=True), st.randoms(use_true_random=False))
def test_dependence_properties(perms, rnd):
    r = dependence(perms)
    shuffled = list(perms)
    rnd.shuffle(shuffled)
    assert dependence(shuffled).status == r.status
    if r.dependent:
        for v in r.kernel_basis:
            combo = polynomial_sum([gradient_polynomial(p) for p in perms], v)
            assert combo.is_zero()
        assert r.certificate is None
    else:
        assert r.certificate.rank == len(perms)


def test_coefficient_matrix_padding():
    m = coefficient_matrix([P("12"), P("1234")])
    assert len(m[0]) == 9 and m[0][0] == 4 and not any(m[0][1:])


def test_zero_sums_examples():
    assert verify_zero_sums([P("12"), P("21")], [1, 1], 2)
    assert not verify_zero_sums([P("12"), P("21")], [1, F(9, 10)], 2)
    with pytest.raises(ValueError):
        verify_zero_sums([P("12"), P("21")], [1, 1], 3)
    with pytest.raises(ValueError):
        verify_zero_sums([P("12"), P("123"), P("321")], [1, F(-2, 3), F(2, 3)], 2)
    assert valid_zero_sum_orders([P("12"), P("123"), P("321")]) == [3]
    assert valid_zero_sum_orders([P("123"), P("231"), P("312")]) == [2, 3]


def test_constant_cover_examples():
    assert verify_constant_cover(FormalCombination.of([P("12"), P("21")], [1, 1]))
    assert verify_constant_cover(FormalCombination.of(S3, [1] * 6))
    assert not verify_constant_cover(FormalCombination.of([P("12"), P("21")], [1, -1]))


def test_search_rejects_budget():
    with pytest.raises(ValueError):
        search_dependent_sets(6, 2)
    with pytest.raises(ValueError):
        search_dependent_sets(4, 4)


def test_search_small_goldens():
    assert search_dependent_sets(5, 1) == []
    pairs = search_dependent_sets(4, 2)
    assert [names(p) for p, _ in pairs] == [("12", "21")]
    triples = {names(p) for p, _ in search_dependent_sets(3, 3)}
    assert len(triples) == 10
    assert {("12", "123", "321"), ("123", "231", "312"), ("132", "213", "321")} <= triples
    # anything outside the equal-order ones must use 12 or 21
    assert all(all(len(s) == 3 for s in t) or "12" in t or "21" in t for t in triples)


def _brute_dependent(candidates, size):
    import itertools
    return sorted(names(c) for c in itertools.combinations(candidates, size) if dependence(c).dependent)


def test_search_matches_brute_force_order3():
    cands = [p for k in (2, 3) for p in enumerate_permutations(k)]
    for size in (2, 3):
        assert sorted(names(p) for p, _ in search_dependent_sets(3, size)) == _brute_dependent(cands, size)


def test_search_thread_invariance():
    a = search_dependent_sets(4, 3, threads=1)
    b = search_dependent_sets(4, 3, threads=2)
    assert [names(p) for p, _ in a] == [names(p) for p, _ in b]


def test_order4_triples_have_two_order2_members():
    for perms, res in search_dependent_sets(4, 3):
        orders = sorted(len(p) for p in perms)
        if orders[-1] >= 4:
            assert orders[:2] == [2, 2]
        for v in res.kernel_basis:
            support = [len(p) for p, t in zip(perms, v) if t]
            assert support.count(max(support)) >= 2
        check_lemma_constraints(res)


def test_lemma_checker_flags_fabricated_result():
    from permforce.forcing import DependenceResult
    fake = DependenceResult((P("12"), P("123")), "dependent", (F(1), F(1)), ((F(1), F(1)),))
    with pytest.raises(LemmaViolation):
        check_lemma_constraints(fake)


def test_classify_reports():
    rep = classify_set([P("12"), P("123")])
    assert rep["status"] == "independent" and rep["verdict"] == VERDICT_CERTIFIED and "certificate" in rep
    rep = classify_set([P("12"), P("21")])
    assert rep["status"] == "dependent" and rep["kernel"] == ["1", "1"] and rep["verdict"] == VERDICT_UNDECIDED
    rep = classify_set(enumerate_permutations(4))
    assert rep["status"] == "dependent" and rep["verdict"] == VERDICT_UNDECIDED
    with pytest.raises(ValueError):
        classify_set([P("1")])


def test_explained():
    assert explained_non_forcing([P("12"), P("21"), P("1234")])
    assert explained_non_forcing([P("123"), P("231"), P("312")])
    assert explained_non_forcing([P("2413")])
    assert not explained_non_forcing(enumerate_permutations(4))
