"""Permutations in one-line notation, induced patterns and pattern densities.

Everything here is 1-indexed: a k-permutation is a bijection on {1, ..., k}
written as the tuple of its images.  Exact quantities are `fractions.Fraction`.

>>> p = Permutation.parse("2413")
>>> induced_pattern(p, (2, 3))
Permutation(image=(2, 1))
>>> pattern_density(Permutation.parse("12"), Permutation.parse("231"))
Fraction(1, 3)
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Permutation",
    "induced_pattern",
    "pattern_density",
    "permutation_matrix",
    "enumerate_permutations",
    "format_rational",
    "parse_rational",
]


@dataclass(frozen=True, order=True)
class Permutation:
    """A bijection on [k] stored as its one-line image tuple."""

    image: tuple[int, ...]

    def __post_init__(self):
        image = tuple(int(v) for v in self.image)
        object.__setattr__(self, "image", image)
        if not image:
            raise ValueError("a permutation has order at least 1")
        if sorted(image) != list(range(1, len(image) + 1)):
            raise ValueError(f"{image} is not a bijection on [{len(image)}]")

    @classmethod
    def parse(cls, text: str | Sequence[int] | "Permutation") -> "Permutation":
        """Read "2413", "10,1,2,...", or a sequence of ints."""
        if isinstance(text, Permutation):
            return text
        if not isinstance(text, str):
            return cls(tuple(text))
        s = text.strip()
        if not s:
            raise ValueError("empty permutation string")
        if "," in s:
            parts = [t for t in s.split(",")]
            try:
                return cls(tuple(int(t) for t in parts))
            except ValueError as exc:
                raise ValueError(f"malformed permutation {text!r}: {exc}") from None
        if not s.isdigit():
            raise ValueError(f"malformed permutation {text!r}")
        if len(s) > 9:
            raise ValueError(f"{text!r}: orders above 9 need the comma-separated form")
        return cls(tuple(int(c) for c in s))

    @property
    def order(self) -> int:
        return len(self.image)

    def __len__(self) -> int:
        return len(self.image)

    def __call__(self, i: int) -> int:
        """pi(i) for 1 <= i <= k."""
        if not 1 <= i <= len(self.image):
            raise IndexError(f"{i} outside [1, {len(self.image)}]")
        return self.image[i - 1]

    def __str__(self) -> str:
        if len(self.image) <= 9:
            return "".join(str(v) for v in self.image)
        return ",".join(str(v) for v in self.image)

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.image)
        for i, v in enumerate(self.image, start=1):
            inv[v - 1] = i
        return Permutation(tuple(inv))

    def reverse(self) -> "Permutation":
        return Permutation(self.image[::-1])

    def complement(self) -> "Permutation":
        k = len(self.image)
        return Permutation(tuple(k + 1 - v for v in self.image))

    def lex_rank(self) -> int:
        """Position of this permutation in `enumerate_permutations(k)`."""
        k = len(self.image)
        rank = 0
        for i, v in enumerate(self.image):
            smaller = sum(1 for w in self.image[i + 1:] if w < v)
            rank += smaller * math.factorial(k - 1 - i)
        return rank


def _standardize(values: Sequence[int]) -> tuple[int, ...]:
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0] * len(values)
    for r, idx in enumerate(order, start=1):
        ranks[idx] = r
    return tuple(ranks)


def induced_pattern(big: Permutation, positions: Sequence[int]) -> Permutation:
    """The pattern of `big` at the strictly increasing 1-based `positions`."""
    n = len(big)
    positions = tuple(positions)
    if not positions:
        raise ValueError("need at least one position")
    for a, b in zip(positions, positions[1:]):
        if b <= a:
            raise ValueError(f"positions {positions} are not strictly increasing")
    if positions[0] < 1 or positions[-1] > n:
        raise ValueError(f"positions {positions} outside [1, {n}]")
    return Permutation(_standardize([big.image[a - 1] for a in positions]))


def pattern_density(pattern: Permutation, big: Permutation) -> Fraction:
    """Fraction of k-subsets of positions of `big` that induce `pattern`.

    Direct enumeration of all C(n, k) subsets; meant for n up to about 14.
    Returns 0 when the pattern is longer than `big`.
    """
    k, n = len(pattern), len(big)
    if k > n:
        return Fraction(0)
    target = pattern.image
    img = big.image
    hits = 0
    for subset in itertools.combinations(range(n), k):
        if _standardize([img[a] for a in subset]) == target:
            hits += 1
    return Fraction(hits, math.comb(n, k))


def permutation_matrix(p: Permutation) -> np.ndarray:
    """0/1 integer matrix with entry (i, j) = 1 iff p(i) = j (1-based)."""
    k = len(p)
    a = np.zeros((k, k), dtype=np.int64)
    a[np.arange(k), np.asarray(p.image) - 1] = 1
    return a


@lru_cache(maxsize=None)
def enumerate_permutations(k: int) -> tuple[Permutation, ...]:
    """All k! permutations of order k in lexicographic order."""
    if k < 1:
        raise ValueError("order must be at least 1")
    return tuple(Permutation(t) for t in itertools.permutations(range(1, k + 1)))


def format_rational(q: Fraction | int) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def parse_rational(text: str | int | Fraction) -> Fraction:
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    s = str(text).strip()
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"malformed rational {text!r}") from None


def parse_permutations(items: Iterable[str]) -> list[Permutation]:
    return [Permutation.parse(t) for t in items]
