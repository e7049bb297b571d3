"""Step permutons, their perturbations, and the segment family used for
patterns of order at most three.

Exact densities of step permutons are computed by summing over pairs of
non-decreasing maps [k] -> [n]; there are C(n+k-1, k) such maps, so one
density costs O(C(n+k-1, k)**2 * k) big-integer multiplications.
"""

from __future__ import annotations

import io
import json
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Sequence, Union

import numpy as np

from . import _kernels
from .perm import Permutation, enumerate_permutations, format_rational, parse_rational

__all__ = [
    "InvalidMatrixError",
    "DoublyStochasticMatrix",
    "StepPermuton",
    "Segment",
    "SegmentPermuton",
    "MCEstimate",
    "constant_matrix",
    "perturbation_basis",
    "perturb",
    "perturbed_array",
    "step_density",
    "step_density_matrix_gradient",
    "density_function",
    "density_gradient",
    "segment_permuton",
    "sample_points",
    "mc_pattern_counts",
    "mc_density",
    "matrix_to_json",
    "matrix_from_json",
    "samples_to_csv",
]

SHARD_DRAWS = 1 << 16


class InvalidMatrixError(ValueError):
    """A matrix is not doubly stochastic; `tile` names the first bad entry."""

    def __init__(self, message: str, tile: tuple[int, int] | None = None):
        super().__init__(message)
        self.tile = tile


@dataclass(frozen=True)
class DoublyStochasticMatrix:
    rows: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(Fraction(v) for v in row) for row in self.rows)
        object.__setattr__(self, "rows", rows)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise InvalidMatrixError("matrix must be square and non-empty")
        for i, row in enumerate(rows, start=1):
            for j, v in enumerate(row, start=1):
                if v < 0:
                    raise InvalidMatrixError(f"negative entry {v} at tile ({i}, {j})", (i, j))
        for i, row in enumerate(rows, start=1):
            if sum(row) != 1:
                raise InvalidMatrixError(f"row {i} sums to {sum(row)}", (i, 1))
        for j in range(n):
            s = sum(r[j] for r in rows)
            if s != 1:
                raise InvalidMatrixError(f"column {j + 1} sums to {s}", (1, j + 1))

    @property
    def n(self) -> int:
        return len(self.rows)

    def __getitem__(self, ij: tuple[int, int]) -> Fraction:
        """1-based entry access."""
        i, j = ij
        return self.rows[i - 1][j - 1]

    def transpose(self) -> "DoublyStochasticMatrix":
        return DoublyStochasticMatrix(tuple(zip(*self.rows)))

    def to_array(self) -> np.ndarray:
        return np.array([[float(v) for v in r] for r in self.rows])


@dataclass(frozen=True)
class StepPermuton:
    matrix: DoublyStochasticMatrix

    @property
    def n(self) -> int:
        return self.matrix.n


def constant_matrix(n: int) -> DoublyStochasticMatrix:
    if n < 1:
        raise ValueError("order must be at least 1")
    q = Fraction(1, n)
    return DoublyStochasticMatrix(tuple(tuple(q for _ in range(n)) for _ in range(n)))


def perturbation_basis(n: int, k: int, l: int) -> np.ndarray:
    """Integer n x n matrix with +1 at (k,l),(k+1,l+1) and -1 at (k+1,l),(k,l+1)."""
    if not (1 <= k < n and 1 <= l < n):
        raise IndexError(f"({k}, {l}) outside [1, {n - 1}]^2")
    b = np.zeros((n, n), dtype=np.int64)
    b[k - 1, l - 1] = b[k, l] = 1
    b[k, l - 1] = b[k - 1, l] = -1
    return b


def _as_grid(n: int, x) -> list[list]:
    """Accept an (n-1)x(n-1) grid or a row-concatenated flat vector."""
    m = n - 1
    if n < 2:
        raise ValueError("perturbations need n >= 2")
    arr = list(x)
    if arr and isinstance(arr[0], (list, tuple, np.ndarray)):
        grid = [list(r) for r in arr]
    else:
        if len(arr) != m * m:
            raise ValueError(f"expected {m * m} perturbation coordinates, got {len(arr)}")
        grid = [arr[i * m:(i + 1) * m] for i in range(m)]
    if len(grid) != m or any(len(r) != m for r in grid):
        raise ValueError(f"perturbation must be {m}x{m}")
    return grid


def _perturbed_entries(n: int, grid, base):
    rows = [[base for _ in range(n)] for _ in range(n)]
    for i in range(n - 1):
        for j in range(n - 1):
            v = grid[i][j]
            if v == 0:
                continue
            rows[i][j] += v
            rows[i + 1][j + 1] += v
            rows[i + 1][j] -= v
            rows[i][j + 1] -= v
    return rows


def perturb(n: int, x) -> DoublyStochasticMatrix:
    """The constant matrix plus sum of x[i][j] times the (i, j) basis perturbation.

    Any x keeping every entry non-negative is accepted; entries are exact.
    """
    grid = [[Fraction(v) for v in row] for row in _as_grid(n, x)]
    rows = _perturbed_entries(n, grid, Fraction(1, n))
    for i, row in enumerate(rows, start=1):
        for j, v in enumerate(row, start=1):
            if v < 0:
                raise InvalidMatrixError(
                    f"perturbation makes tile ({i}, {j}) negative: {format_rational(v)}", (i, j)
                )
    return DoublyStochasticMatrix(tuple(tuple(r) for r in rows))


def perturbed_array(n: int, x) -> np.ndarray:
    """Floating-point version of `perturb` without the validity check."""
    m = n - 1
    xg = np.asarray(x, dtype=np.float64).reshape(m, m)
    a = np.full((n, n), 1.0 / n)
    a[:-1, :-1] += xg
    a[1:, 1:] += xg
    a[1:, :-1] -= xg
    a[:-1, 1:] -= xg
    return a


# --------------------------------------------------------------------------
# exact step densities


@lru_cache(maxsize=None)
def _monotone_maps(k: int, n: int) -> tuple[tuple[tuple[int, ...], ...], tuple[int, ...]]:
    """Non-decreasing maps [k] -> [n] (0-based) and their weights k!/prod(mult!)."""
    maps = tuple(combinations_with_replacement(range(n), k))
    kf = math.factorial(k)
    weights = []
    for f in maps:
        denom = 1
        for c in Counter(f).values():
            denom *= math.factorial(c)
        weights.append(kf // denom)
    return maps, tuple(weights)


@lru_cache(maxsize=None)
def _monotone_arrays(k: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    maps, weights = _monotone_maps(k, n)
    kf = math.factorial(k)
    return np.array(maps, dtype=np.int64).reshape(len(maps), k), np.array(weights) / kf


def _integer_matrix(mat: DoublyStochasticMatrix) -> tuple[list[list[int]], int]:
    denom = math.lcm(*(v.denominator for r in mat.rows for v in r))
    return [[int(v * denom) for v in r] for r in mat.rows], denom


def step_density(pattern: Permutation, mat: DoublyStochasticMatrix) -> Fraction:
    """Exact density of `pattern` in the step permuton of `mat`.

    Uses integer arithmetic throughout: entries are scaled to a common
    denominator D and map weights to multinomials k!/prod(mult!), so the
    result is S / (k! * n**k * D**k) for an integer sum S.
    """
    k, n = len(pattern), mat.n
    maps, weights = _monotone_maps(k, n)
    nm, denom = _integer_matrix(mat)
    perm0 = [v - 1 for v in pattern.image]
    total = 0
    for f, cf in zip(maps, weights):
        rows = [nm[f[m]] for m in range(k)]
        inner = 0
        for g, cg in zip(maps, weights):
            prod = cg
            for m in range(k):
                prod *= rows[m][g[perm0[m]]]
                if not prod:
                    break
            inner += prod
        total += cf * inner
    return Fraction(total, math.factorial(k) * n**k * denom**k)


def step_density_matrix_gradient(pattern: Permutation, mat: DoublyStochasticMatrix) -> list[list[Fraction]]:
    """Exact partial derivatives of the step density in each matrix entry."""
    k, n = len(pattern), mat.n
    maps, weights = _monotone_maps(k, n)
    nm, denom = _integer_matrix(mat)
    perm0 = [v - 1 for v in pattern.image]
    acc = [[0] * n for _ in range(n)]
    for f, cf in zip(maps, weights):
        for g, cg in zip(maps, weights):
            terms = [nm[f[m]][g[perm0[m]]] for m in range(k)]
            w = cf * cg
            for m in range(k):
                rest = w
                for mm in range(k):
                    if mm != m:
                        rest *= terms[mm]
                if rest:
                    acc[f[m]][g[perm0[m]]] += rest
    scale = math.factorial(k) * n**k * denom ** (k - 1)
    return [[Fraction(v, scale) for v in row] for row in acc]


def _tile_grad_to_perturbation(gm) -> list[list[Fraction]]:
    n = len(gm)
    return [
        [gm[i][j] + gm[i + 1][j + 1] - gm[i + 1][j] - gm[i][j + 1] for j in range(n - 1)]
        for i in range(n - 1)
    ]


def density_function(pattern: Permutation, n: int, x) -> Fraction:
    return step_density(pattern, perturb(n, x))


@lru_cache(maxsize=4096)
def _uniform_gradient(pattern: Permutation, n: int) -> tuple[tuple[Fraction, ...], ...]:
    # At the constant matrix every factor equals 1/n, so the tile gradient
    # factorizes as U^T A U with U[m, p] = sum of weights of maps with f(m) = p.
    k = len(pattern)
    maps, weights = _monotone_maps(k, n)
    u = [[0] * n for _ in range(k)]
    for f, c in zip(maps, weights):
        for m in range(k):
            u[m][f[m]] += c
    gm_int = [[0] * n for _ in range(n)]
    for m in range(k):
        urow = u[m]
        vrow = u[pattern.image[m] - 1]
        for p in range(n):
            if urow[p]:
                for q in range(n):
                    gm_int[p][q] += urow[p] * vrow[q]
    # weights carry a factor k! each; density prefactor is k!/n^(2k-1)
    scale = math.factorial(k) * n ** (2 * k - 1)
    gm = [[Fraction(v, scale) for v in row] for row in gm_int]
    return tuple(tuple(r) for r in _tile_grad_to_perturbation(gm))


def density_gradient(pattern: Permutation, n: int, x=None) -> list[list[Fraction]]:
    """Exact gradient of x -> density of `pattern` in the perturbed constant matrix.

    Returned as an (n-1)x(n-1) grid; entry [i-1][j-1] is the derivative in
    the (i, j) coordinate.  Without `x` the gradient is taken at zero.
    """
    if n < 2:
        raise ValueError("gradients need n >= 2")
    if x is None:
        return [list(r) for r in _uniform_gradient(pattern, n)]
    gm = step_density_matrix_gradient(pattern, perturb(n, x))
    return _tile_grad_to_perturbation(gm)


# --------------------------------------------------------------------------
# segment permutons


@dataclass(frozen=True)
class Segment:
    """Piece of the line y = slope * x + intercept for x0 <= x <= x1."""

    slope: int
    intercept: float
    x0: float
    x1: float
    mass: float

    def contains(self, x: float, y: float, tol: float = 1e-12) -> bool:
        return (self.x0 - tol <= x <= self.x1 + tol) and abs(self.slope * x + self.intercept - y) <= tol


@dataclass(frozen=True)
class SegmentPermuton:
    alpha: float
    segments: tuple[Segment, ...]

    def on_support(self, x: float, y: float, tol: float = 1e-12) -> bool:
        return any(s.contains(x, y, tol) for s in self.segments)


def _segment_lines(alpha: float) -> list[tuple[int, float]]:
    h = alpha / 2
    anti = [1 - h, 1 + h, h, 2 - h]
    diag = [-h, h, 1 - h, h - 1]
    return [(-1, c) for c in anti] + [(1, d) for d in diag]


def segment_permuton(alpha: float) -> SegmentPermuton:
    """Mass spread uniformly (by length) over the eight lines of the family.

    Coincident lines (alpha in {0, 1}) are merged with their lengths added,
    and lines meeting the square in a single point are dropped.
    """
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    pieces: dict[tuple[int, float], list[float]] = {}
    for slope, b in _segment_lines(alpha):
        if slope < 0:
            x0, x1 = max(0.0, b - 1.0), min(1.0, b)
        else:
            x0, x1 = max(0.0, -b), min(1.0, 1.0 - b)
        if x1 - x0 <= 1e-15:
            continue
        key = next((key for key in pieces if key[0] == slope and abs(key[1] - b) <= 1e-12), None)
        if key is None:
            pieces[(slope, b)] = [x0, x1, x1 - x0]
        else:
            pieces[key][2] += x1 - x0
    total = sum(v[2] for v in pieces.values())
    segments = tuple(
        Segment(slope, b, x0, x1, length / total)
        for (slope, b), (x0, x1, length) in pieces.items()
    )
    return SegmentPermuton(alpha, segments)


# --------------------------------------------------------------------------
# sampling

Permuton = Union[StepPermuton, SegmentPermuton]


def _points_from_uniforms(p: Permuton, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map uniforms of shape (..., 3) to points of the measure.

    A fixed map from uniforms to points keeps draws coupled across different
    members of a family when the same uniforms are reused.
    """
    if isinstance(p, StepPermuton):
        n = p.n
        probs = p.matrix.to_array().ravel() / n
        cum = np.cumsum(probs)
        cum[-1] = 1.0
        tile = np.searchsorted(cum, u[..., 0], side="right")
        tile = np.minimum(tile, n * n - 1)
        i, j = np.divmod(tile, n)
        return (i + u[..., 1]) / n, (j + u[..., 2]) / n
    if isinstance(p, SegmentPermuton):
        masses = np.array([s.mass for s in p.segments])
        cum = np.cumsum(masses)
        cum[-1] = 1.0
        idx = np.minimum(np.searchsorted(cum, u[..., 0], side="right"), len(masses) - 1)
        slope = np.array([s.slope for s in p.segments], dtype=np.float64)[idx]
        icpt = np.array([s.intercept for s in p.segments])[idx]
        x0 = np.array([s.x0 for s in p.segments])[idx]
        x1 = np.array([s.x1 for s in p.segments])[idx]
        x = x0 + (x1 - x0) * u[..., 1]
        return x, slope * x + icpt
    raise TypeError(f"cannot sample from {type(p).__name__}")


def _shard_rng(seed: int, shard: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), shard])))


def sample_points(p: Permuton, count: int, seed: int) -> np.ndarray:
    """`count` i.i.d. points from `p` as a (count, 2) array; fixed by `seed`."""
    if count < 1:
        raise ValueError("count must be positive")
    rng = _shard_rng(seed, 0)
    x, y = _points_from_uniforms(p, rng.random((count, 3)))
    return np.column_stack([x, y])


def _count_shard(p: Permuton, k: int, draws: int, seed: int, shard: int) -> np.ndarray:
    rng = _shard_rng(seed, shard)
    counts = np.zeros(math.factorial(k), dtype=np.int64)
    remaining = draws
    while remaining:
        x, y = _points_from_uniforms(p, rng.random((remaining, k, 3)))
        codes = _kernels.pattern_codes(x, y)
        good = codes[codes >= 0]
        counts += np.bincount(good, minlength=counts.size)
        # draws with tied coordinates are redrawn
        remaining -= good.size
    return counts


def mc_pattern_counts(k: int, p: Permuton, samples: int, seed: int, threads: int = 1) -> np.ndarray:
    """Counts of each k-pattern (lexicographic order) over `samples` k-point draws.

    Work is split into fixed-size shards seeded by (seed, shard index), so the
    result does not depend on `threads`.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    shards = [(s, min(SHARD_DRAWS, samples - s * SHARD_DRAWS))
              for s in range((samples + SHARD_DRAWS - 1) // SHARD_DRAWS)]
    if threads > 1 and len(shards) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda sd: _count_shard(p, k, sd[1], seed, sd[0]), shards))
    else:
        parts = [_count_shard(p, k, d, seed, s) for s, d in shards]
    return np.sum(parts, axis=0)


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    stderr: float
    samples: int
    seed: int

    def to_json(self) -> dict:
        return {"estimate": self.estimate, "stderr": self.stderr, "samples": self.samples, "seed": self.seed}

    @classmethod
    def from_count(cls, hits: int, samples: int, seed: int) -> "MCEstimate":
        est = hits / samples
        return cls(est, math.sqrt(est * (1 - est) / samples), samples, seed)


def mc_density(pattern: Permutation, p: Permuton, samples: int, seed: int, threads: int = 1) -> MCEstimate:
    counts = mc_pattern_counts(len(pattern), p, samples, seed, threads)
    return MCEstimate.from_count(int(counts[pattern.lex_rank()]), samples, seed)


def mc_all_densities(k: int, p: Permuton, samples: int, seed: int, threads: int = 1) -> dict[Permutation, MCEstimate]:
    counts = mc_pattern_counts(k, p, samples, seed, threads)
    return {pi: MCEstimate.from_count(int(c), samples, seed)
            for pi, c in zip(enumerate_permutations(k), counts)}


# --------------------------------------------------------------------------
# serialization


def matrix_to_json(mat: DoublyStochasticMatrix) -> dict:
    return {"n": mat.n, "rows": [[format_rational(v) for v in r] for r in mat.rows]}


def matrix_from_json(data: dict | str) -> DoublyStochasticMatrix:
    if isinstance(data, str):
        data = json.loads(data)
    try:
        n = int(data["n"])
        rows = [[parse_rational(v) for v in r] for r in data["rows"]]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from None
    if len(rows) != n:
        raise ValueError(f"matrix JSON declares n={n} but has {len(rows)} rows")
    return DoublyStochasticMatrix(tuple(tuple(r) for r in rows))


def samples_to_csv(points: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("x,y\n")
    for x, y in points:
        buf.write(f"{x:.17g},{y:.17g}\n")
    return buf.getvalue()

