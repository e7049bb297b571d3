"""Linear dependence of gradient polynomials and the cover-matrix lemmas.

A set whose gradient polynomials are linearly independent is certified not
forcing.  Dependence proves nothing by itself; the tool never claims that a
set is forcing.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .exact import nullspace, rank
from .gradpoly import b_vector, gradient_polynomial
from .perm import Permutation, enumerate_permutations, format_rational

__all__ = [
    "LemmaViolation",
    "FormalCombination",
    "NonForcingCertificate",
    "DependenceResult",
    "cover_matrix",
    "coefficient_matrix",
    "dependence",
    "verify_zero_sums",
    "valid_zero_sum_orders",
    "verify_constant_cover",
    "check_lemma_constraints",
    "search_dependent_sets",
    "classify_set",
    "VERDICT_CERTIFIED",
    "VERDICT_UNDECIDED",
]

VERDICT_CERTIFIED = "certified non-forcing (independent gradient polynomials)"
VERDICT_UNDECIDED = "dependent - forcing status not decided by this tool"

MAX_SEARCH_ORDER = 5
MAX_SEARCH_SIZE = 3


class LemmaViolation(AssertionError):
    """A dependent set contradicts one of the structural lemmas."""


@dataclass(frozen=True)
class FormalCombination:
    terms: tuple[tuple[Fraction, Permutation], ...]

    def __post_init__(self):
        terms = tuple((Fraction(t), Permutation.parse(p)) for t, p in self.terms)
        if not terms:
            raise ValueError("a formal combination needs at least one term")
        orders = {len(p) for _, p in terms}
        if len(orders) != 1:
            raise ValueError(f"all permutations must share one order, got orders {sorted(orders)}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def of(cls, perms: Iterable, weights: Iterable) -> "FormalCombination":
        return cls(tuple(zip(weights, perms)))

    @property
    def order(self) -> int:
        return len(self.terms[0][1])


def cover_matrix(omega: FormalCombination) -> list[list[Fraction]]:
    """Weighted sum of permutation matrices, as a k x k grid of Fractions."""
    k = omega.order
    cov = [[Fraction(0)] * k for _ in range(k)]
    for t, p in omega.terms:
        for i, v in enumerate(p.image):
            cov[i][v - 1] += t
    return cov


# --------------------------------------------------------------------------
# dependence


@dataclass(frozen=True)
class NonForcingCertificate:
    perms: tuple[Permutation, ...]
    coefficients: tuple[tuple[Fraction, ...], ...]  # one row per permutation
    rank: int
    verdict: str = "not forcing"

    def to_json(self) -> dict:
        return {
            "set": [str(p) for p in self.perms],
            "coefficients": [[format_rational(c) for c in row] for row in self.coefficients],
            "rank": self.rank,
            "verdict": self.verdict,
        }


@dataclass(frozen=True)
class DependenceResult:
    perms: tuple[Permutation, ...]
    status: str
    kernel: tuple[Fraction, ...] | None = None
    kernel_basis: tuple[tuple[Fraction, ...], ...] = ()
    certificate: NonForcingCertificate | None = None

    @property
    def dependent(self) -> bool:
        return self.status == "dependent"

    @property
    def nullity(self) -> int:
        return len(self.kernel_basis)


def _validate_set(perms: Sequence) -> tuple[Permutation, ...]:
    perms = tuple(Permutation.parse(p) for p in perms)
    if not perms:
        raise ValueError("the set must be non-empty")
    if len(set(perms)) != len(perms):
        raise ValueError("duplicate permutations: sets, not multisets")
    small = [str(p) for p in perms if len(p) < 2]
    if small:
        raise ValueError(
            f"order-1 permutations {small} are not supported: the lemmas assume order >= 2 "
            "and a single point has density 1 in every permuton"
        )
    return perms


def coefficient_matrix(perms: Sequence[Permutation]) -> list[list[Fraction]]:
    """Gradient-polynomial coefficients, one row per permutation, in a common grid.

    The grid has side K-1 for K the largest order; smaller polynomials are zero padded.
    """
    size = max(len(p) for p in perms) - 1
    return [gradient_polynomial(p).flat(size) for p in perms]


def _normalize_kernel(v: Sequence[Fraction]) -> tuple[Fraction, ...]:
    top = max(abs(x) for x in v)
    v = [x / top for x in v]
    first = next(x for x in v if x)
    if first < 0:
        v = [-x for x in v]
    return tuple(v)


def dependence(perms: Sequence) -> DependenceResult:
    """Exact linear (in)dependence of the gradient polynomials of `perms`."""
    perms = _validate_set(perms)
    coeffs = coefficient_matrix(perms)
    # columns = permutations, so the null space holds the vanishing combinations
    columns = [list(col) for col in zip(*coeffs)]
    basis = [_normalize_kernel(v) for v in nullspace(columns)]
    if basis:
        return DependenceResult(perms, "dependent", basis[0], tuple(basis))
    cert = NonForcingCertificate(perms, tuple(tuple(r) for r in coeffs), rank(coeffs))
    return DependenceResult(perms, "independent", certificate=cert)


# --------------------------------------------------------------------------
# cover matrix lemmas


def _top_order_part(perms: Sequence[Permutation], kernel: Sequence) -> tuple[FormalCombination, int, int]:
    k = max(len(p) for p in perms)
    top = [(Fraction(t), p) for t, p in zip(kernel, perms) if len(p) == k]
    rest = max((len(p) for p in perms if len(p) < k), default=0)
    return FormalCombination(tuple(top)), k, rest


def valid_zero_sum_orders(perms: Sequence) -> list[int]:
    """All h with 2 <= h <= k and every lower-order member of order <= h-1."""
    perms = [Permutation.parse(p) for p in perms]
    k = max(len(p) for p in perms)
    rest = max((len(p) for p in perms if len(p) < k), default=0)
    return list(range(max(2, rest + 1), k + 1))


def verify_zero_sums(perms: Sequence, kernel: Sequence, h: int) -> bool:
    """True iff Cov(omega) b_h and b_h^T Cov(omega) both vanish exactly.

    omega is the top-order part of the combination sum(kernel[i] * perms[i]).
    Structural preconditions (2 <= h <= k, lower orders below h) raise
    ValueError; whether `kernel` really annihilates the gradient polynomials
    is what the check is about, so it is not enforced.
    """
    perms = [Permutation.parse(p) for p in perms]
    if len(kernel) != len(perms):
        raise ValueError("kernel length must match the set size")
    omega, k, rest = _top_order_part(perms, kernel)
    if not 2 <= h <= k:
        raise ValueError(f"h={h} outside [2, {k}]")
    if rest > h - 1:
        raise ValueError(f"h={h} too small: a lower-order member has order {rest}")
    cov = cover_matrix(omega)
    b = b_vector(k, h).entries
    right = [sum(row[j] * b[j] for j in range(k)) for row in cov]
    left = [sum(b[i] * cov[i][j] for i in range(k)) for j in range(k)]
    return not any(right) and not any(left)


def verify_constant_cover(omega: FormalCombination) -> bool:
    """True iff every entry of Cov(omega) is the same."""
    cov = cover_matrix(omega)
    first = cov[0][0]
    return all(v == first for row in cov for v in row)


def _annihilates(perms: Sequence[Permutation], kernel: Sequence) -> bool:
    coeffs = coefficient_matrix(perms)
    return all(sum(Fraction(t) * row[c] for t, row in zip(kernel, coeffs)) == 0 for c in range(len(coeffs[0])))


def check_lemma_constraints(result: DependenceResult) -> list[str]:
    """Structural facts every dependent set must satisfy; raises LemmaViolation.

    Returns the names of the checks that applied.
    """
    perms = result.perms
    orders = [len(p) for p in perms]
    applied = []
    if not result.dependent:
        return applied

    def fail(msg):
        raise LemmaViolation(f"{{{', '.join(map(str, perms))}}}: {msg}")

    for v in result.kernel_basis:
        if not _annihilates(perms, v):
            fail("returned kernel does not annihilate the gradient polynomials")
    applied.append("kernel-annihilates")

    if len(perms) == 1:
        fail("a single gradient polynomial is never zero")
    if len(perms) == 2:
        applied.append("pair-has-order-two")
        if orders != [2, 2]:
            fail("a dependent pair must consist of order-2 permutations")
    if len(perms) == 3 and len(set(orders)) == 1:
        applied.append("equal-order-triple-is-order-three")
        if orders[0] != 3:
            fail("an equal-order dependent triple must have order 3")
    if len(perms) == 3 and max(orders) > 3:
        applied.append("large-triple-has-two-order-two")
        if sorted(orders)[:2] != [2, 2]:
            fail("a dependent triple with an order >= 4 member must contain two order-2 members")

    for v in result.kernel_basis:
        support = [p for t, p in zip(v, perms) if t]
        top = max(len(p) for p in support)
        if sum(1 for p in support if len(p) == top) < 2:
            fail("the vanishing combination has a unique member of maximal order")
        sub = [p for p in support]
        sub_t = [t for t in v if t]
        for h in valid_zero_sum_orders(sub):
            if not verify_zero_sums(sub, sub_t, h):
                fail(f"top-order cover matrix fails the zero-sum identity for h={h}")
        if len({len(p) for p in support}) == 1:
            if not verify_constant_cover(FormalCombination.of(sub, sub_t)):
                fail("equal-order vanishing combination has a non-constant cover matrix")
    applied += ["two-maximal-members", "zero-sums", "constant-cover"]
    return applied


# --------------------------------------------------------------------------
# exhaustive search


@lru_cache(maxsize=None)
def _candidates(max_order: int) -> tuple[Permutation, ...]:
    return tuple(p for k in range(2, max_order + 1) for p in enumerate_permutations(k))


@lru_cache(maxsize=None)
def _integer_vectors(max_order: int) -> np.ndarray:
    """Coefficient vectors of all candidates scaled by one common integer."""
    cands = _candidates(max_order)
    coeffs = coefficient_matrix(cands)
    scale = math.lcm(*(c.denominator for row in coeffs for c in row))
    vecs = np.array([[int(c * scale) for c in row] for row in coeffs], dtype=object)
    return vecs


def _dependent_triples_with(i: int, vecs: np.ndarray) -> list[tuple[int, int, int]]:
    """Indices (i, j, l), i < j < l, of triples whose vectors have rank < 3.

    For an independent pair (a, b) with non-zero 2x2 minor on rows r1, r2,
    c lies in their span iff every bordered 3x3 minor vanishes.
    """
    n = len(vecs)
    a = vecs[i]
    out = []
    for j in range(i + 1, n):
        b = vecs[j]
        minors = [(r1, r2, a[r1] * b[r2] - a[r2] * b[r1])
                  for r1 in range(len(a)) for r2 in range(r1 + 1, len(a))]
        nz = next(((r1, r2, d) for r1, r2, d in minors if d), None)
        if nz is None:
            # a and b already dependent: every triple containing them is
            out.extend((i, j, l) for l in range(j + 1, n))
            continue
        r1, r2, d = nz
        u = a[r2] * b - a * b[r2]
        w = a * b[r1] - a[r1] * b
        rest = vecs[j + 1:]
        resid = d * rest + np.outer(rest[:, r1], u) + np.outer(rest[:, r2], w)
        for off in np.nonzero(~np.any(resid != 0, axis=1))[0]:
            out.append((i, j, j + 1 + int(off)))
    return out


def _search_rows(size: int, max_order: int, start: int) -> list[tuple[int, ...]]:
    vecs = _integer_vectors(max_order)
    n = len(vecs)
    if size == 1:
        return [(start,)] if not any(vecs[start]) else []
    if size == 2:
        a = vecs[start]
        return [(start, j) for j in range(start + 1, n) if rank([a, vecs[j]]) < 2]
    return _dependent_triples_with(start, vecs)


def search_dependent_sets(max_order: int, size: int, threads: int = 1) -> list[tuple[tuple[Permutation, ...], DependenceResult]]:
    """Every dependent set of `size` permutations with orders in 2..max_order.

    Each hit is recomputed with `dependence` and checked against the
    structural lemmas; a violation raises LemmaViolation.  Output is sorted
    by (orders, one-line forms).
    """
    if not 2 <= max_order <= MAX_SEARCH_ORDER:
        raise ValueError(f"max_order must lie in [2, {MAX_SEARCH_ORDER}]")
    if not 1 <= size <= MAX_SEARCH_SIZE:
        raise ValueError(f"size must lie in [1, {MAX_SEARCH_SIZE}]")
    cands = _candidates(max_order)
    starts = range(len(cands))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_search_rows, itertools.repeat(size), itertools.repeat(max_order), starts))
    else:
        chunks = [_search_rows(size, max_order, s) for s in starts]
    hits = []
    for idx in sorted(t for chunk in chunks for t in chunk):
        perms = tuple(cands[i] for i in idx)
        res = dependence(perms)
        if not res.dependent:
            raise LemmaViolation(f"integer prefilter and exact dependence disagree on {perms}")
        check_lemma_constraints(res)
        hits.append((perms, res))
    return hits


# --------------------------------------------------------------------------
# reports


def _lemma_patterns(perms: Sequence[Permutation], res: DependenceResult) -> list[str]:
    orders = [len(p) for p in perms]
    names = set(map(str, perms))
    pats = []
    if len(perms) == 1:
        pats.append("singleton")
    if len(set(orders)) == 1:
        pats.append("equal orders")
    top = max(orders)
    if orders.count(top) == 1:
        pats.append("unique maximal order")
    if top <= 3:
        pats.append("all orders at most 3 (segment permuton matches every such density)")
    if {"12", "21"} <= names:
        pats.append("contains 12 and 21 (d(21) = 1 - d(12))")
        rest = [p for p in perms if str(p) != "21"]
        if res.dependent and not dependence(rest).dependent:
            pats.append("dropping 21 leaves an independent set")
    return pats


def classify_set(perms: Sequence) -> dict:
    """JSON-ready report for a set of permutations of order >= 2."""
    perms = _validate_set(perms)
    res = dependence(perms)
    report = {
        "set": [str(p) for p in perms],
        "status": res.status,
    }
    if res.dependent:
        report["kernel"] = [format_rational(t) for t in res.kernel]
    report["lemma_patterns"] = _lemma_patterns(perms, res)
    report["verdict"] = VERDICT_UNDECIDED if res.dependent else VERDICT_CERTIFIED
    if res.certificate is not None:
        report["certificate"] = res.certificate.to_json()
    return report


def explained_non_forcing(perms: Sequence) -> bool:
    """Whether a set of size <= 3 is shown non-forcing by independence or a known pattern.

    Known patterns: every order is at most 3, or the set holds 12 and 21 and
    stays independent once 21 is dropped.
    """
    perms = _validate_set(perms)
    if not dependence(perms).dependent:
        return True
    if max(len(p) for p in perms) <= 3:
        return True
    names = {str(p) for p in perms}
    if {"12", "21"} <= names:
        rest = [p for p in perms if str(p) != "21"]
        return not dependence(rest).dependent
    return False
