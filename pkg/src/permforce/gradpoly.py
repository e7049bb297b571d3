"""Gradient polynomials of permutations.

For a k-permutation pi (k >= 2) the gradient polynomial P_pi(alpha, beta)
is the scaled limit of the density gradient at the uniform permuton.  It is
computed three independent ways here:

* `gradient_polynomial` - closed coefficient form K_ij * (b_{i+2}^T A b_{j+2});
* `sum_formula_eval` - the rational sum over m in [k];
* `n3_gradient_estimate` / `finite_n_estimate` - finite-n quantities that
  converge to it.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .perm import Permutation, format_rational, parse_rational
from .permuton import density_gradient

__all__ = [
    "BVector",
    "BivariatePolynomial",
    "ones_vector",
    "b_vector",
    "k_constant",
    "gradient_polynomial",
    "mirror_polynomial",
    "evaluate",
    "sum_formula_eval",
    "finite_n_estimate",
    "n3_gradient_estimate",
    "k_sign_canary",
    "polynomial_sum",
]

_CANARY = False


@contextlib.contextmanager
def k_sign_canary():
    """Deliberately corrupt `k_constant` by flipping the sign of K_{1,0}.

    Negative control for the lemma suite; never enable outside tests.
    """
    global _CANARY
    prev, _CANARY = _CANARY, True
    try:
        yield
    finally:
        _CANARY = prev


@dataclass(frozen=True)
class BVector:
    k: int
    a: int
    entries: tuple[int, ...]

    def dot(self, other: Sequence[int]) -> int:
        return sum(x * y for x, y in zip(self.entries, other))


def ones_vector(k: int) -> tuple[int, ...]:
    return (1,) * k


def b_vector(k: int, a: int) -> BVector:
    """Signed binomial vector: entry i is (-1)**(i-1) * C(a-1, i-1) for i <= a."""
    if not 1 <= a <= k:
        raise IndexError(f"index {a} outside [1, {k}]")
    entries = tuple((-1) ** (i - 1) * math.comb(a - 1, i - 1) if i <= a else 0 for i in range(1, k + 1))
    return BVector(k, a, entries)


def k_constant(k: int, i: int, j: int) -> Fraction:
    if not (0 <= i <= k - 2 and 0 <= j <= k - 2):
        raise ValueError(f"K^{k}_{{{i},{j}}} needs 0 <= i, j <= {k - 2}")
    f = math.factorial
    val = Fraction(f(k) * (-1) ** (i + j), f(i) * f(j) * f(k - i - 2) * f(k - j - 2))
    if _CANARY and (i, j) == (1, 0):
        val = -val
    return val


@dataclass(frozen=True, eq=False)
class BivariatePolynomial:
    """Dense coefficient grid: coeffs[i][j] multiplies alpha**i * beta**j."""

    coeffs: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        grid = tuple(tuple(Fraction(c) for c in row) for row in self.coeffs)
        if not grid or any(len(r) != len(grid) for r in grid):
            raise ValueError("coefficient grid must be square and non-empty")
        object.__setattr__(self, "coeffs", grid)

    @classmethod
    def zero(cls, size: int = 1) -> "BivariatePolynomial":
        return cls(tuple((Fraction(0),) * size for _ in range(size)))

    @property
    def size(self) -> int:
        return len(self.coeffs)

    def coefficient(self, i: int, j: int) -> Fraction:
        if 0 <= i < self.size and 0 <= j < self.size:
            return self.coeffs[i][j]
        return Fraction(0)

    def padded(self, size: int) -> "BivariatePolynomial":
        if size < self.size:
            if any(self.coefficient(i, j) for i in range(size, self.size) for j in range(self.size)) or any(
                self.coefficient(i, j) for i in range(self.size) for j in range(size, self.size)
            ):
                raise ValueError("cannot truncate non-zero coefficients")
        return BivariatePolynomial(tuple(tuple(self.coefficient(i, j) for j in range(size)) for i in range(size)))

    def flat(self, size: int | None = None) -> list[Fraction]:
        size = self.size if size is None else size
        return [self.coefficient(i, j) for i in range(size) for j in range(size)]

    def is_zero(self) -> bool:
        return all(c == 0 for row in self.coeffs for c in row)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BivariatePolynomial):
            return NotImplemented
        size = max(self.size, other.size)
        return self.flat(size) == other.flat(size)

    def __hash__(self):
        grid = [list(r) for r in self.coeffs]
        # strip trailing zero rows/columns so padding does not change the hash
        while len(grid) > 1 and not any(grid[-1]) and not any(r[-1] for r in grid):
            grid = [r[:-1] for r in grid[:-1]]
        return hash(tuple(map(tuple, grid)))

    def __add__(self, other: "BivariatePolynomial") -> "BivariatePolynomial":
        size = max(self.size, other.size)
        return BivariatePolynomial(
            tuple(tuple(self.coefficient(i, j) + other.coefficient(i, j) for j in range(size)) for i in range(size))
        )

    def scale(self, t) -> "BivariatePolynomial":
        t = Fraction(t)
        return BivariatePolynomial(tuple(tuple(t * c for c in row) for row in self.coeffs))

    def __neg__(self) -> "BivariatePolynomial":
        return self.scale(-1)

    def substitute_one_minus_alpha(self) -> "BivariatePolynomial":
        """The polynomial (alpha, beta) -> self(1 - alpha, beta)."""
        d = self.size
        out = [[Fraction(0)] * d for _ in range(d)]
        for i in range(d):
            for j in range(d):
                c = self.coeffs[i][j]
                if not c:
                    continue
                # (1 - a)^i = sum_t C(i, t) (-a)^t
                for t in range(i + 1):
                    out[t][j] += c * math.comb(i, t) * (-1) ** t
        return BivariatePolynomial(tuple(map(tuple, out)))

    def to_json(self, k: int | None = None) -> dict:
        return {
            "k": self.size + 1 if k is None else k,
            "coeffs": [[format_rational(c) for c in row] for row in self.coeffs],
        }

    @classmethod
    def from_json(cls, data: dict) -> "BivariatePolynomial":
        return cls(tuple(tuple(parse_rational(c) for c in row) for row in data["coeffs"]))


def _require_order(pi: Permutation) -> int:
    k = len(pi)
    if k < 2:
        raise ValueError(f"gradient polynomials need order >= 2; {pi} has order {k}")
    return k


def _bilinear(u: Sequence[int], rows_image: Sequence[int], v: Sequence[int]) -> int:
    """u^T A v for the permutation matrix with A[m, rows_image[m]] = 1 (1-based values)."""
    return sum(u[m] * v[rows_image[m] - 1] for m in range(len(rows_image)) if u[m])


def _coefficient_grid(pi: Permutation, image: Sequence[int], sign: int) -> BivariatePolynomial:
    k = _require_order(pi)
    bs = [b_vector(k, a).entries for a in range(2, k + 1)]
    grid = tuple(
        tuple(sign * k_constant(k, i, j) * _bilinear(bs[i], image, bs[j]) for j in range(k - 1))
        for i in range(k - 1)
    )
    return BivariatePolynomial(grid)


def gradient_polynomial(pi: Permutation) -> BivariatePolynomial:
    """Exact (k-1)x(k-1) coefficient grid of P_pi."""
    return _coefficient_grid(pi, pi.image, 1)


def mirror_polynomial(pi: Permutation) -> BivariatePolynomial:
    """Coefficients of P_pi(1 - alpha, beta) from the row-reversed permutation matrix."""
    return _coefficient_grid(pi, pi.image[::-1], -1)


def evaluate(poly: BivariatePolynomial, alpha, beta) -> Fraction:
    alpha, beta = Fraction(alpha), Fraction(beta)
    total = Fraction(0)
    for row in reversed(poly.coeffs):
        inner = Fraction(0)
        for c in reversed(row):
            inner = inner * beta + c
        total = total * alpha + inner
    return total


def _edge_factor(k: int, m: int, t: Fraction) -> Fraction:
    f = math.factorial
    return (Fraction(k - m) / (1 - t) - Fraction(m - 1) / t) * t ** (m - 1) * (1 - t) ** (k - m) / (f(m - 1) * f(k - m))


def sum_formula_eval(pi: Permutation, alpha, beta) -> Fraction:
    """P_pi(alpha, beta) from the explicit sum over m in [k]; needs 0 < alpha, beta < 1."""
    k = _require_order(pi)
    alpha, beta = Fraction(alpha), Fraction(beta)
    if not (0 < alpha < 1 and 0 < beta < 1):
        raise ValueError("the sum formula needs alpha and beta strictly inside (0, 1)")
    total = sum(_edge_factor(k, m, alpha) * _edge_factor(k, pi(m), beta) for m in range(1, k + 1))
    return math.factorial(k) * total


def _increasing_count_drop(k: int, n: int, m: int, i: int) -> int:
    """F[m -> i] - F[m -> i+1], F counting strictly increasing maps [k] -> [n] with f(m) = i."""
    def count(pos: int) -> int:
        return math.comb(pos - 1, m - 1) * math.comb(n - pos, k - m)

    return count(i) - count(i + 1)


def finite_n_estimate(pi: Permutation, alpha: float, beta: float, n: int) -> float:
    """Injective-map approximation of P_pi(alpha, beta) at grid size n.

    Uses binomial counts, O(k) work per call.  Requires k <= floor(alpha n)
    <= n - k and likewise for beta.
    """
    k = _require_order(pi)
    i, j = math.floor(alpha * n), math.floor(beta * n)
    for name, idx in (("alpha", i), ("beta", j)):
        if not k <= idx <= n - k:
            raise ValueError(f"n={n} too small: floor({name}*n)={idx} must lie in [{k}, {n - k}]")
    s = sum(
        _increasing_count_drop(k, n, m, i) * _increasing_count_drop(k, n, pi(m), j)
        for m in range(1, k + 1)
    )
    return float(Fraction(math.factorial(k) * s, n ** (2 * k - 4)))


def n3_gradient_estimate(pi: Permutation, alpha: float, beta: float, n: int) -> float:
    """n**3 times the exact density gradient at the uniform point, read at cell
    (floor(alpha n), floor(beta n))."""
    if n < 2 or len(pi) > n:
        raise ValueError(f"need 2 <= |pi| <= n, got |pi|={len(pi)}, n={n}")
    i, j = math.floor(alpha * n), math.floor(beta * n)
    if not (1 <= i <= n - 1 and 1 <= j <= n - 1):
        raise ValueError(f"cell ({i}, {j}) outside [1, {n - 1}]^2")
    grad = density_gradient(pi, n)
    return float(n**3 * grad[i - 1][j - 1])


def polynomial_sum(polys: Iterable[BivariatePolynomial], weights: Iterable | None = None) -> BivariatePolynomial:
    polys = list(polys)
    weights = [Fraction(1)] * len(polys) if weights is None else [Fraction(w) for w in weights]
    out = BivariatePolynomial.zero(max((p.size for p in polys), default=1))
    for p, w in zip(polys, weights):
        out = out + p.scale(w)
    return out
