"""Matrix permanents: a brute-force reference and Ryser's inclusion-exclusion formula."""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import permutations as _permutations

import numpy as np

from .errors import DimensionError

MAX_N = 12
MAX_NAIVE_N = 9


@lru_cache(maxsize=None)
def permutation_table(n: int) -> np.ndarray:
    """All permutations of ``range(n)`` in lexicographic order, shape (n!, n)."""
    if n > MAX_N:
        raise DimensionError(f"n = {n} exceeds the supported maximum of {MAX_N}")
    table = np.array(list(_permutations(range(n))), dtype=np.intp).reshape(-1, n)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def _gray_steps(n: int):
    """For each Gray-code step k = 1 .. 2^n - 1: column flipped, +1/-1 for add/remove, Ryser sign."""
    cols, dirs, signs = [], [], []
    size = 0
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        adding = bool((k ^ (k >> 1)) >> j & 1)
        size += 1 if adding else -1
        cols.append(j)
        dirs.append(1.0 if adding else -1.0)
        signs.append(-1.0 if (n - size) % 2 else 1.0)
    return tuple(cols), tuple(dirs), tuple(signs)


def _check_square(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"permanent needs square matrices, got shape {a.shape}")
    if a.shape[-1] > MAX_N:
        raise DimensionError(f"n = {a.shape[-1]} exceeds the supported maximum of {MAX_N}")
    return a


def permanent_naive(a) -> complex:
    """Sum over all n! permutations; reference only."""
    a = _check_square(a)
    n = a.shape[-1]
    if n == 0:
        return 1.0 + 0j
    if n > MAX_NAIVE_N:
        raise DimensionError(f"naive permanent limited to n <= {MAX_NAIVE_N}")
    perms = permutation_table(n)
    return complex(np.prod(a[np.arange(n), perms], axis=1).sum())


def permanent_ryser(a):
    """Ryser's formula with Gray-code ordering, vectorized over leading batch dimensions.

    ``perm(A) = (-1)^n sum_S (-1)^|S| prod_i sum_{j in S} a_ij``.  Visiting
    the subsets in Gray-code order changes one column per step, so each row
    sum updates in O(1) and the total cost is O(2^n n) per matrix.
    """
    a = _check_square(np.asarray(a, dtype=complex))
    n = a.shape[-1]
    batch = a.shape[:-2]
    if n == 0:
        return np.ones(batch, dtype=complex) if batch else 1.0 + 0j
    flat = a.reshape((-1, n, n))
    rowsums = np.zeros(flat.shape[:2], dtype=complex)
    total = np.zeros(flat.shape[0], dtype=complex)
    for j, d, sign in zip(*_gray_steps(n)):
        rowsums += d * flat[:, :, j]
        total += sign * np.prod(rowsums, axis=1)
    if not batch:
        return complex(total[0])
    return total.reshape(batch)


def permanent(a, method: str = "ryser") -> complex:
    """Exact permanent of a square matrix (n <= 12)."""
    if method == "ryser":
        return permanent_ryser(a)
    if method == "naive":
        return permanent_naive(a)
    raise ValueError(f"unknown permanent method {method!r}")


def factorial_product(counts) -> int:
    return math.prod(math.factorial(int(c)) for c in counts)
