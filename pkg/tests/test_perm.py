import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from permforce import Permutation, enumerate_permutations, induced_pattern, pattern_density, permutation_matrix
from permforce.perm import format_rational, parse_permutations, parse_rational

import oracles

P = Permutation.parse

perms = st.integers(1, 9).flatmap(lambda n: st.permutations(range(1, n + 1))).map(Permutation)


def test_parse_forms():
    assert P("2413").image == (2, 4, 1, 3)
    assert P("10,1,2,3,4,5,6,7,8,9") == Permutation((10, 1, 2, 3, 4, 5, 6, 7, 8, 9))
    assert P([2, 1]) == P("21")
    assert str(P("10,1,2,3,4,5,6,7,8,9")) == "10,1,2,3,4,5,6,7,8,9"
    assert str(P("312")) == "312"


@pytest.mark.parametrize("bad", ["", "112", "0", "13", "2,2", "a"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        P(bad)


def test_induced_pattern_examples():
    assert induced_pattern(P("231"), (1, 3)) == P("21")
    assert induced_pattern(P("2413"), (1, 2, 3, 4)) == P("2413")
    assert induced_pattern(P("2413"), (2, 3)) == P("21")


@pytest.mark.parametrize("positions", [(0, 1), (1, 5), (2, 2), (3, 1)])
def test_induced_pattern_errors(positions):
    with pytest.raises(ValueError):
        induced_pattern(P("2413"), positions)


def test_pattern_density_examples():
    assert pattern_density(P("12"), P("231")) == Fraction(1, 3)
    assert pattern_density(P("12"), P("12")) == 1
    assert pattern_density(P("1234"), P("123")) == 0


@settings(max_examples=60, deadline=None)
@given(big=perms, k=st.integers(1, 4))
def test_densities_sum_to_one_and_match_bruteforce(big, k):
    if k > len(big):
        return
    ds = {pi: pattern_density(pi, big) for pi in enumerate_permutations(k)}
    assert sum(ds.values()) == 1
    for pi, d in ds.items():
        assert d == oracles.brute_density(pi.image, big.image)


@settings(max_examples=20, deadline=None)
@given(big=perms.filter(lambda p: len(p) >= 4), seed=st.integers(0, 1000))
def test_density_vs_subset_sampling(big, seed):
    pi = P("132")
    est, se = oracles.subset_mc_density(pi.image, big.image, 4000, seed)
    exact = float(pattern_density(pi, big))
    assert abs(est - exact) <= 3 * se + 1e-3


def test_permutation_matrix():
    assert permutation_matrix(P("12")).tolist() == [[1, 0], [0, 1]]
    assert permutation_matrix(P("21")).tolist() == [[0, 1], [1, 0]]
    m = permutation_matrix(P("2413"))
    assert (m.sum(axis=0) == 1).all() and (m.sum(axis=1) == 1).all()
    assert m[0, 1] == 1


def test_enumeration():
    assert [str(p) for p in enumerate_permutations(1)] == ["1"]
    assert [str(p) for p in enumerate_permutations(2)] == ["12", "21"]
    s3 = [str(p) for p in enumerate_permutations(3)]
    assert s3 == ["123", "132", "213", "231", "312", "321"]
    s8 = enumerate_permutations(8)
    assert len(s8) == math.factorial(8) and list(s8) == sorted(s8)


@given(perms)
def test_symmetries(p):
    assert p.inverse().inverse() == p
    assert p.reverse().reverse() == p
    assert p.complement().complement() == p
    if len(p) <= 7:
        assert enumerate_permutations(len(p))[p.lex_rank()] == p


def test_rational_text():
    assert format_rational(Fraction(-3, 6)) == "-1/2"
    assert format_rational(Fraction(4)) == "4"
    assert parse_rational("6/4") == Fraction(3, 2)
    assert parse_permutations(["12", "21"]) == [P("12"), P("21")]
