"""Hot floating-point kernels, each in a numba and a pure-numpy flavour.

The numba path is used when numba imports cleanly and the environment
variable ``PERMFORCE_DISABLE_NUMBA`` is unset (or "0").  Both flavours are
always importable under ``*_numba`` / ``*_numpy`` names so that tests and the
benchmark can compare them directly.
"""

from __future__ import annotations

import logging
import math
import os

import numpy as np

logger = logging.getLogger(__name__)

_DISABLED = os.environ.get("PERMFORCE_DISABLE_NUMBA", "0") not in ("", "0")

try:
    import numba

    njit = numba.njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return wrap


USE_NUMBA = HAVE_NUMBA and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"
if _DISABLED:
    logger.debug("numba disabled by PERMFORCE_DISABLE_NUMBA")


def _factorial_table(k: int) -> np.ndarray:
    return np.array([math.factorial(i) for i in range(k + 1)], dtype=np.int64)


# --------------------------------------------------------------------------
# pattern codes of sampled point sets


@njit(cache=True, nogil=True)
def _pattern_codes_jit(xs, ys, fact):
    d, k = xs.shape
    out = np.empty(d, dtype=np.int64)
    xv = np.empty(k, dtype=np.float64)
    yv = np.empty(k, dtype=np.float64)
    for r in range(d):
        tie = False
        # insertion sort of the k points by x (k is tiny)
        for i in range(k):
            x, y = xs[r, i], ys[r, i]
            j = i
            while j > 0 and xv[j - 1] > x:
                xv[j] = xv[j - 1]
                yv[j] = yv[j - 1]
                j -= 1
            if j > 0 and xv[j - 1] == x:
                tie = True
            xv[j] = x
            yv[j] = y
        code = 0
        for i in range(k):
            c = 0
            for j in range(i + 1, k):
                if yv[j] < yv[i]:
                    c += 1
                elif yv[j] == yv[i]:
                    tie = True
            code += c * fact[k - 1 - i]
        out[r] = -1 if tie else code
    return out


def pattern_codes_numba(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    return _pattern_codes_jit(xs, ys, _factorial_table(xs.shape[1]))


def pattern_codes_numpy(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    d, k = xs.shape
    order = np.argsort(xs, axis=1, kind="stable")
    xs_s = np.take_along_axis(xs, order, axis=1)
    ys_s = np.take_along_axis(ys, order, axis=1)
    tie = np.any(np.diff(xs_s, axis=1) == 0.0, axis=1)
    upper = np.triu(np.ones((k, k), dtype=bool), 1)
    # later[r, i, j] compares y_j against y_i for j > i
    later = ys_s[:, None, :]
    here = ys_s[:, :, None]
    smaller = ((later < here) & upper).sum(axis=2)
    tie |= ((later == here) & upper).any(axis=(1, 2))
    weights = _factorial_table(k)[k - 1::-1][:k]
    codes = smaller @ weights
    codes[tie] = -1
    return codes.astype(np.int64)


def pattern_codes(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Lexicographic rank of the pattern induced by each row of points.

    Row r holds the k points (xs[r, m], ys[r, m]) of one draw in any order.
    Rows with repeated x or y values get code -1.
    """
    if USE_NUMBA:
        return pattern_codes_numba(xs, ys)
    return pattern_codes_numpy(xs, ys)


# --------------------------------------------------------------------------
# floating-point step density and its gradient with respect to the matrix


@njit(cache=True, nogil=True)
def _step_value_grad_jit(mat, f_rows, f_w, g_rows, g_w, perm0):
    n = mat.shape[0]
    k = perm0.shape[0]
    grad = np.zeros((n, n), dtype=np.float64)
    prefix = np.empty(k + 1, dtype=np.float64)
    suffix = np.empty(k + 1, dtype=np.float64)
    terms = np.empty(k, dtype=np.float64)
    total = 0.0
    for a in range(f_rows.shape[0]):
        for b in range(g_rows.shape[0]):
            w = f_w[a] * g_w[b]
            for m in range(k):
                terms[m] = mat[f_rows[a, m], g_rows[b, perm0[m]]]
            prefix[0] = 1.0
            for m in range(k):
                prefix[m + 1] = prefix[m] * terms[m]
            suffix[k] = 1.0
            for m in range(k - 1, -1, -1):
                suffix[m] = suffix[m + 1] * terms[m]
            total += w * prefix[k]
            for m in range(k):
                grad[f_rows[a, m], g_rows[b, perm0[m]]] += w * prefix[m] * suffix[m + 1]
    return total, grad


def step_value_grad_numba(mat, f_rows, f_w, g_rows, g_w, perm0):
    return _step_value_grad_jit(
        np.ascontiguousarray(mat, dtype=np.float64),
        np.ascontiguousarray(f_rows, dtype=np.int64),
        np.ascontiguousarray(f_w, dtype=np.float64),
        np.ascontiguousarray(g_rows, dtype=np.int64),
        np.ascontiguousarray(g_w, dtype=np.float64),
        np.ascontiguousarray(perm0, dtype=np.int64),
    )


def step_value_grad_numpy(mat, f_rows, f_w, g_rows, g_w, perm0):
    mat = np.asarray(mat, dtype=np.float64)
    n = mat.shape[0]
    k = len(perm0)
    g_perm = np.asarray(g_rows)[:, perm0]
    rows = np.asarray(f_rows)[:, None, :]
    cols = g_perm[None, :, :]
    terms = mat[rows, cols]  # (nf, ng, k)
    w = np.outer(f_w, g_w)
    ones = np.ones(terms.shape[:2] + (1,))
    prefix = np.concatenate([ones, np.cumprod(terms, axis=2)], axis=2)
    suffix = np.concatenate(
        [np.cumprod(terms[:, :, ::-1], axis=2)[:, :, ::-1], ones], axis=2
    )
    total = float(np.sum(w * prefix[:, :, k]))
    grad = np.zeros(n * n)
    for m in range(k):
        contrib = (w * prefix[:, :, m] * suffix[:, :, m + 1]).ravel()
        flat = np.broadcast_to(rows[:, :, m] * n + cols[:, :, m], w.shape).ravel()
        grad += np.bincount(flat, weights=contrib, minlength=n * n)
    return total, grad.reshape(n, n)


def step_value_grad(mat, f_rows, f_w, g_rows, g_w, perm0):
    """Unscaled step-density sum and its partial derivatives in each tile.

    Returns ``(S, dS/dM)`` where the density is ``k!/n**k * S`` and the
    sum runs over pairs of non-decreasing maps given as 0-based row arrays
    with multiplicity weights.
    """
    if USE_NUMBA:
        return step_value_grad_numba(mat, f_rows, f_w, g_rows, g_w, perm0)
    return step_value_grad_numpy(mat, f_rows, f_w, g_rows, g_w, perm0)
