"""Permanents and extended permanents of nonnegative matrices.

The extended permanent of an ``M x N`` matrix ``A`` is ``Per([I_M A])``: the
weighted count of partial matchings between rows and columns of ``A``
(the empty matching contributes 1). Hot kernels come from the compiled
``_ckernels`` extension when it is importable and from ``_pykernels``
otherwise; set ``DUALFAS_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import itertools
import math
import os
from typing import NamedTuple

import numpy as np

from ..errors import SizeError, StructuralError
from . import _pykernels

if os.environ.get("DUALFAS_PURE_PYTHON"):
    _kernels = _pykernels
else:
    try:
        from . import _ckernels as _kernels
    except ImportError:  # extension not built
        _kernels = _pykernels

BACKEND = "cython" if _kernels is not _pykernels else "python"

__all__ = [
    "BACKEND",
    "MarginalExpansion",
    "permanent_exact",
    "permanent_ryser",
    "extended_permanent",
    "extended_permanent_log2",
    "extended_permanent_subsets",
    "extended_permanent_colderiv_log2",
    "marginal_expansion",
    "use_backend",
]

EXACT_MAX_N = 7
RYSER_MAX_N = 30
MASK_MAX_BITS = 24


def use_backend(name: str) -> None:
    """Switch kernels at runtime (``"cython"`` or ``"python"``)."""
    global _kernels, BACKEND
    if name == "python":
        _kernels = _pykernels
    elif name == "cython":
        from . import _ckernels

        _kernels = _ckernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name


def _nonneg(a, square=False) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    if a.ndim != 2:
        raise StructuralError(f"expected a matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise StructuralError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise StructuralError("entries must be finite and nonnegative")
    return a


def permanent_exact(a) -> float:
    """Permanent by summing over all ``n!`` permutations (``n <= 7``)."""
    a = _nonneg(a, square=True)
    n = a.shape[0]
    if n > EXACT_MAX_N:
        raise SizeError(f"permanent_exact is limited to n <= {EXACT_MAX_N}; use permanent_ryser")
    rows = range(n)
    return math.fsum(math.prod(a[i, p[i]] for i in rows) for p in itertools.permutations(rows))


def permanent_ryser(a) -> float:
    a = _nonneg(a, square=True)
    if a.shape[0] > RYSER_MAX_N:
        raise SizeError(f"permanent_ryser is limited to n <= {RYSER_MAX_N}")
    return float(_kernels.ryser(a))


def _oriented(a: np.ndarray) -> np.ndarray:
    # the row-subset mask runs over the shorter side; Per~(A) = Per~(A^T)
    if a.shape[0] > a.shape[1]:
        a = np.ascontiguousarray(a.T)
    if a.shape[0] > MASK_MAX_BITS:
        raise SizeError(f"extended permanent limited to min(M, N) <= {MASK_MAX_BITS}")
    return a


def extended_permanent(a) -> float:
    """``Per([I_M A])``; returns ``inf`` when the value overflows a double."""
    a = _oriented(_nonneg(a))
    mant, ex = _kernels.extperm_scaled(a)
    try:
        return math.ldexp(mant, ex)
    except OverflowError:
        return math.inf


def extended_permanent_log2(a) -> float:
    """``log2 Per([I_M A])``, finite for any finite nonnegative input."""
    a = _oriented(_nonneg(a))
    mant, ex = _kernels.extperm_scaled(a)
    return math.log2(mant) + ex


def extended_permanent_subsets(a, permanent=permanent_ryser) -> float:
    """Reference evaluation as a sum of permanents of all square submatrices.

    ``sum_k sum_{|alpha|=|beta|=k} Per(A[alpha, beta])`` with the ``k = 0``
    term equal to 1. Exponential in both dimensions; meant for checking.
    """
    a = _nonneg(a)
    m, n = a.shape
    terms = [1.0]
    for k in range(1, min(m, n) + 1):
        for rows in itertools.combinations(range(m), k):
            sub = a[list(rows)]
            for cols in itertools.combinations(range(n), k):
                terms.append(permanent(sub[:, list(cols)]))
    return math.fsum(terms)


def extended_permanent_colderiv_log2(c, lam) -> tuple[float, np.ndarray]:
    """``log2 F`` and ``log2 dF/dlam`` for ``F(lam) = Per~(c @ diag(lam))``."""
    c = _nonneg(c)
    lam = np.ascontiguousarray(lam, dtype=float)
    if lam.shape != (c.shape[1],):
        raise StructuralError(f"lam must have length {c.shape[1]}")
    if c.shape[0] > MASK_MAX_BITS:
        raise SizeError(f"row count limited to {MASK_MAX_BITS}")
    log_f, log_g = _kernels.extperm_colderiv(c, lam)
    return float(log_f), np.asarray(log_g, dtype=float)


class MarginalExpansion(NamedTuple):
    """``F(lam) = f0 + lam_i * f1`` for one transmit eigenmode ``i``."""

    f0: float
    f1: float


def marginal_expansion(omega, lam, gamma: float, i: int) -> MarginalExpansion:
    """Split ``F(lam) = Per~(gamma * Omega @ diag(lam))`` along ``lam[i]``.

    ``f0`` is the extended permanent with column ``i`` removed; ``f1`` is
    ``gamma * sum_m Omega[m, i] * Per~(gamma * Omega_without(m, i) @ diag(lam_without_i))``.
    ``i`` is zero-based.
    """
    omega = _nonneg(omega)
    lam = np.asarray(lam, dtype=float)
    nr, nt = omega.shape
    if lam.shape != (nt,):
        raise StructuralError(f"lam must have length {nt}")
    if not 0 <= i < nt:
        raise IndexError(f"eigenmode index {i} out of range for {nt} columns")
    keep = np.arange(nt) != i
    scaled = gamma * omega[:, keep] * lam[keep]
    f0 = extended_permanent(scaled)
    terms = []
    for m in range(nr):
        if omega[m, i] != 0.0:
            terms.append(omega[m, i] * extended_permanent(np.delete(scaled, m, axis=0)))
    return MarginalExpansion(f0, gamma * math.fsum(terms))
