"""Exact and numerical tools for permutation pattern densities and forcing sets."""

__version__ = "0.1.0"

from .perm import (  # noqa: E402
    Permutation,
    enumerate_permutations,
    induced_pattern,
    pattern_density,
    permutation_matrix,
)

__all__ = [
    "__version__",
    "Permutation",
    "enumerate_permutations",
    "induced_pattern",
    "pattern_density",
    "permutation_matrix",
]
