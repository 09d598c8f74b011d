"""Hermite and Laguerre polynomials, factorials and index enumeration.

Polynomials are evaluated by their three-term recurrences. The ``*_table``
variants return every order up to ``nmax`` at once and broadcast over numpy
arrays; they are the workhorses of the pattern-function kernels.
"""

import math
from typing import NamedTuple

import numpy as np

from .errors import DomainError, RangeError

EXACT_FACTORIAL_MAX = 20


class Composition3(NamedTuple):
    k1: int
    k2: int
    k3: int


def _check_order(n):
    if int(n) != n or n < 0:
        raise DomainError(f"polynomial order must be a non-negative integer, got {n!r}")
    return int(n)


def hermite_table(nmax, z):
    """Physicists' Hermite polynomials H_0..H_nmax at ``z``.

    Returns an array of shape ``(nmax + 1,) + shape(z)``. No overflow checks.
    """
    z = np.asarray(z)
    dtype = np.result_type(z.dtype, np.float64)
    out = np.empty((nmax + 1,) + z.shape, dtype=dtype)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = 2.0 * z
    for k in range(1, nmax):
        out[k + 1] = 2.0 * z * out[k] - 2.0 * k * out[k - 1]
    return out


def hermite(n, z):
    """H_n(z) for real or complex ``z`` (scalar or array)."""
    n = _check_order(n)
    with np.errstate(over="ignore", invalid="ignore"):
        value = hermite_table(n, z)[n]
    if not np.all(np.isfinite(value)):
        zmax = float(np.max(np.abs(z)))
        # leading term 2^n z^n dominates for large |z|
        logmag = n * math.log(2.0 * zmax) if zmax > 0 else 0.0
        raise RangeError(f"H_{n} overflows at |z|={zmax:g}", log_magnitude=logmag)
    return value[()] if value.ndim == 0 else value


def laguerre_table(nmax, z):
    """Laguerre polynomials L_0..L_nmax at real ``z``."""
    z = np.asarray(z, dtype=float)
    out = np.empty((nmax + 1,) + z.shape)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = 1.0 - z
    for k in range(1, nmax):
        out[k + 1] = ((2 * k + 1 - z) * out[k] - k * out[k - 1]) / (k + 1)
    return out


def laguerre(n, z):
    n = _check_order(n)
    value = laguerre_table(n, z)[n]
    return value[()] if value.ndim == 0 else value


def log_factorial(n):
    if n < 0:
        raise DomainError(f"factorial of negative number {n}")
    return math.lgamma(n + 1)


def factorial(n):
    if int(n) != n or n < 0:
        raise DomainError(f"factorial needs a non-negative integer, got {n!r}")
    n = int(n)
    if n <= EXACT_FACTORIAL_MAX:
        return float(math.factorial(n))
    return math.exp(math.lgamma(n + 1))


def multinomial(r, k1, k2, k3):
    """r! / (k1! k2! k3!) with k1 + k2 + k3 == r."""
    if min(r, k1, k2, k3) < 0:
        raise DomainError("multinomial arguments must be non-negative")
    if k1 + k2 + k3 != r:
        raise DomainError(f"{k1}+{k2}+{k3} != {r}")
    if r <= EXACT_FACTORIAL_MAX:
        return float(math.factorial(r) // (math.factorial(k1) * math.factorial(k2) * math.factorial(k3)))
    return math.exp(math.lgamma(r + 1) - math.lgamma(k1 + 1) - math.lgamma(k2 + 1) - math.lgamma(k3 + 1))


def compositions3(r):
    """All (k1, k2, k3) >= 0 summing to ``r`` in lexicographic order."""
    if r < 0:
        return []
    return [Composition3(k1, k2, r - k1 - k2) for k1 in range(r + 1) for k2 in range(r - k1 + 1)]
