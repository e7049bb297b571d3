"""Numerical witnesses of non-forcing.

`find_witness` builds a non-uniform step permuton that has the uniform
density on every pattern of a set S, by pinning one perturbation coordinate
to r and Newton-solving for |S| others.  `find_alpha0` bisects the segment
family for the member whose 123-density is 1/6.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import __version__, _kernels
from .exact import echelon
from .perm import Permutation, enumerate_permutations, format_rational
from .permuton import (
    InvalidMatrixError,
    MCEstimate,
    _monotone_arrays,
    density_gradient,
    mc_pattern_counts,
    perturb,
    perturbed_array,
    segment_permuton,
    step_density,
)

logger = logging.getLogger(__name__)

__all__ = [
    "WitnessError",
    "DependentGradientsError",
    "WitnessReport",
    "WitnessVerification",
    "Alpha0Result",
    "default_order",
    "find_witness",
    "verify_witness",
    "find_alpha0",
]

DEFAULT_R = 1 / 20


class WitnessError(RuntimeError):
    pass


class DependentGradientsError(WitnessError):
    """The gradients at the uniform point are linearly dependent; no witness is attempted."""


@dataclass
class WitnessReport:
    perms: list[str]
    n: int
    pinned: tuple[int, int]
    free: list[tuple[int, int]]
    r_requested: float
    r: float
    x: list[float]
    residuals: list[float]
    max_norm: float
    iterations: int
    halvings: int
    tol: float
    trivial: bool = False
    residual_history: list[float] = field(default_factory=list)
    version: str = __version__

    @property
    def patterns(self) -> list[Permutation]:
        return [Permutation.parse(p) for p in self.perms]

    def to_json(self) -> dict:
        out = asdict(self)
        out["pinned"] = list(self.pinned)
        out["free"] = [list(c) for c in self.free]
        out["note"] = "trivial root, not a witness" if self.trivial else "non-uniform witness"
        return out


def default_order(size: int) -> int:
    """Smallest n with (n-1)**2 > size."""
    n = 2
    while (n - 1) ** 2 <= size:
        n += 1
    return n


def _cell(n: int, flat: int) -> tuple[int, int]:
    i, j = divmod(flat, n - 1)
    return i + 1, j + 1


class _FloatDensities:
    """Float densities of several patterns in perturbed constant matrices, with gradients."""

    def __init__(self, perms: Sequence[Permutation], n: int):
        self.n = n
        self.parts = []
        for p in perms:
            k = len(p)
            rows, w = _monotone_arrays(k, n)
            scale = math.factorial(k) / n**k
            self.parts.append((rows, w, np.asarray(p.image) - 1, scale))

    def __call__(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mat = perturbed_array(self.n, x)
        vals, grads = [], []
        for rows, w, perm0, scale in self.parts:
            s, gm = _kernels.step_value_grad(mat, rows, w, rows, w, perm0)
            vals.append(scale * s)
            gm = scale * gm
            gx = gm[:-1, :-1] + gm[1:, 1:] - gm[1:, :-1] - gm[:-1, 1:]
            grads.append(gx.ravel())
        return np.array(vals), np.array(grads)


def _feasible_fraction(n: int, x: np.ndarray, step: np.ndarray) -> float:
    """Largest t in [0, 1] keeping the perturbed matrix non-negative along x + t*step."""
    base = perturbed_array(n, x)
    delta = perturbed_array(n, x + step) - base
    t = 1.0
    neg = delta < 0
    if np.any(neg):
        t = min(1.0, float(np.min(base[neg] / -delta[neg])))
    return t


def _newton(dens: _FloatDensities, targets: np.ndarray, x0: np.ndarray, free: list[int],
            tol: float, max_iter: int) -> tuple[np.ndarray, list[float], int]:
    x = x0.copy()
    history = []
    for it in range(1, max_iter + 1):
        vals, grads = dens(x)
        res = vals - targets
        history.append(float(np.max(np.abs(res))))
        # polish past tol until the residual stops shrinking
        if history[-1] <= tol and (history[-1] < 1e-15 or (it > 1 and history[-1] > 0.5 * history[-2])):
            return x, history, it
        jac = grads[:, free]
        if np.linalg.cond(jac) > 1e12:
            raise WitnessError(f"Jacobian singular at iteration {it}")
        step = np.zeros_like(x)
        step[free] = np.linalg.solve(jac, -res)
        t = _feasible_fraction(dens.n, x, step)
        if t < 1.0:
            # stay strictly inside the non-negative region
            t *= 0.9
            if t < 1e-8:
                raise WitnessError("iteration pinned against the boundary of the valid region")
        x = x + t * step
    vals, _ = dens(x)
    history.append(float(np.max(np.abs(vals - targets))))
    if history[-1] <= tol:
        return x, history, max_iter
    raise WitnessError(f"no convergence in {max_iter} iterations (residual {history[-1]:.3g})")


def find_witness(perms: Sequence, n: int | None = None, r: float = DEFAULT_R, tol: float = 1e-10,
                 max_iter: int = 50, max_halvings: int = 10) -> WitnessReport:
    """Solve for a non-uniform perturbation keeping every density of `perms` uniform.

    Coordinates: |S| free ones where the exact gradients at zero have full
    rank, plus one pinned to `r`.  A failed solve is retried with r halved.
    """
    perms = [Permutation.parse(p) for p in perms]
    if not perms:
        raise ValueError("the set must be non-empty")
    if len(set(perms)) != len(perms):
        raise ValueError("duplicate permutations")
    n = default_order(len(perms)) if n is None else int(n)
    if n < 2 or (n - 1) ** 2 <= len(perms):
        raise ValueError(f"need (n-1)^2 > |S|; n={n}, |S|={len(perms)}")

    grads = [[g for row in density_gradient(p, n) for g in row] for p in perms]
    _, pivots = echelon(grads)
    if len(pivots) < len(perms):
        raise DependentGradientsError(
            f"gradients of {[str(p) for p in perms]} at n={n} are linearly dependent; "
            "run classify_set / `permforce depcheck` for the dependence certificate"
        )
    pinned = next(c for c in range(len(grads[0])) if c not in pivots)
    targets = np.array([1.0 / math.factorial(len(p)) for p in perms])
    dim = (n - 1) ** 2

    def report(x, history, iterations, halvings, r_used, trivial=False):
        dens = _FloatDensities(perms, n)
        vals, _ = dens(x)
        return WitnessReport(
            perms=[str(p) for p in perms],
            n=n,
            pinned=_cell(n, pinned),
            free=[_cell(n, c) for c in pivots],
            r_requested=float(r),
            r=float(r_used),
            x=[float(v) for v in x],
            residuals=[float(v) for v in np.abs(vals - targets)],
            max_norm=float(np.max(np.abs(x))),
            iterations=iterations,
            halvings=halvings,
            tol=tol,
            trivial=trivial,
            residual_history=history,
        )

    if r == 0:
        return report(np.zeros(dim), [], 0, 0, 0.0, trivial=True)

    dens = _FloatDensities(perms, n)
    r_try = float(r)
    last_error = None
    for halvings in range(max_halvings + 1):
        x0 = np.zeros(dim)
        x0[pinned] = r_try
        if np.min(perturbed_array(n, x0)) < 0:
            last_error = WitnessError(f"pinned value r={r_try} already leaves the valid region")
        else:
            try:
                x, history, its = _newton(dens, targets, x0, list(pivots), tol, max_iter)
                logger.debug("witness converged: r=%g, residuals %s", r_try, history)
                return report(x, history, its, halvings, r_try)
            except (WitnessError, np.linalg.LinAlgError) as exc:
                last_error = exc
        logger.debug("retrying with r=%g after: %s", r_try / 2, last_error)
        r_try /= 2
    raise WitnessError(f"no witness after {max_halvings} halvings of r: {last_error}")


@dataclass
class WitnessVerification:
    ok: bool
    nontrivial: bool
    residuals: list[Fraction]
    failed: list[str]

    def __bool__(self) -> bool:
        return self.ok

    @property
    def is_witness(self) -> bool:
        return self.ok and self.nontrivial

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "witness": self.is_witness,
            "residuals": [format_rational(v) for v in self.residuals],
            "failed": self.failed,
        }


def verify_witness(report: WitnessReport, digits: int = 12, tol: float | None = None) -> WitnessVerification:
    """Re-check a report in exact arithmetic.

    Each coordinate is replaced by its best rational approximation with
    denominator at most 10**digits, then every density is recomputed exactly.
    """
    tol = report.tol if tol is None else tol
    xq = [Fraction(v).limit_denominator(10**digits) for v in report.x]
    failed = []
    residuals: list[Fraction] = []
    try:
        mat = perturb(report.n, xq)
    except InvalidMatrixError as exc:
        return WitnessVerification(False, any(xq), [], [f"matrix validity: {exc}"])
    for p in report.patterns:
        d = step_density(p, mat)
        residuals.append(abs(d - Fraction(1, math.factorial(len(p)))))
    bad = [str(p) for p, res in zip(report.patterns, residuals) if res > Fraction(tol)]
    if bad:
        failed.append(f"residual above {tol:g} for {', '.join(bad)}")
    nontrivial = any(xq)
    if not nontrivial:
        failed.append("not a witness: x = 0 is the uniform permuton")
    ok = not bad
    return WitnessVerification(ok, nontrivial, residuals, failed)


# --------------------------------------------------------------------------
# the segment family


@dataclass
class Alpha0Result:
    alpha0: float
    bracket: tuple[float, float]
    densities: dict[str, MCEstimate]
    endpoints: dict[str, MCEstimate]
    evaluations: int
    samples: int
    seed: int

    def to_json(self) -> dict:
        return {
            "alpha0": self.alpha0,
            "bracket": list(self.bracket),
            "densities": {k: v.to_json() for k, v in self.densities.items()},
            "endpoints": {k: v.to_json() for k, v in self.endpoints.items()},
            "evaluations": self.evaluations,
            "samples": self.samples,
            "seed": self.seed,
            "version": __version__,
        }


def _density_123(alpha: float, samples: int, seed: int, threads: int) -> MCEstimate:
    counts = mc_pattern_counts(3, segment_permuton(alpha), samples, seed, threads)
    return MCEstimate.from_count(int(counts[0]), samples, seed)


def find_alpha0(samples_per_eval: int = 10**6, tol: float = 1e-3, seed: int = 0,
                threads: int = 1, max_evals: int = 60, z: float = 3.0) -> Alpha0Result:
    """Bisect alpha in [0, 1] for d(123, mu_alpha) = 1/6.

    Every evaluation reuses the same seed, so neighbouring alphas see the same
    underlying uniforms and the noisy objective varies smoothly with alpha.
    Stops once the bracket is at most `tol` wide and the z-sigma interval of
    the estimate at the midpoint contains 1/6.
    """
    target = 1 / 6
    lo, hi = 0.0, 1.0
    d_lo = _density_123(lo, samples_per_eval, seed, threads)
    d_hi = _density_123(hi, samples_per_eval, seed, threads)
    evals = 2
    if not (d_lo.estimate - target > z * d_lo.stderr and target - d_hi.estimate > z * d_hi.stderr):
        raise WitnessError(
            f"no sign change of d(123) - 1/6 on [0, 1]: {d_lo.estimate:.4f} at 0, {d_hi.estimate:.4f} at 1; "
            "increase samples_per_eval"
        )
    while evals < max_evals:
        mid = 0.5 * (lo + hi)
        d_mid = _density_123(mid, samples_per_eval, seed, threads)
        evals += 1
        if hi - lo <= tol and abs(d_mid.estimate - target) <= z * d_mid.stderr:
            break
        if d_mid.estimate > target:
            lo = mid
        else:
            hi = mid
    else:
        raise WitnessError(f"bisection did not settle within {max_evals} evaluations")
    alpha0 = 0.5 * (lo + hi)
    counts = mc_pattern_counts(3, segment_permuton(alpha0), samples_per_eval, seed, threads)
    dens = {str(p): MCEstimate.from_count(int(c), samples_per_eval, seed)
            for p, c in zip(enumerate_permutations(3), counts)}
    return Alpha0Result(alpha0, (lo, hi), dens, {"0": d_lo, "1": d_hi}, evals, samples_per_eval, seed)
