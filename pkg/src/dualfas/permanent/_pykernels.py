"""Pure-Python/numpy kernels; same signatures as the compiled ``_ckernels``.

``extperm_scaled`` and ``extperm_colderiv`` run a dynamic program over
subsets ``S`` of rows: ``dp[S]`` is the weighted number of partial matchings
of the processed columns that use exactly the rows in ``S``. Adding column
``j`` maps ``dp[S] -> dp[S] + sum_{r in S} a[r, j] * dp[S - {r}]``. All terms
are nonnegative, and after each column ``dp`` is rescaled by a power of two
so the running value never overflows.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


def ryser(a: np.ndarray) -> float:
    """Permanent by Gray-code ordered Ryser inclusion-exclusion (Kahan-summed)."""
    n = a.shape[0]
    if n == 0:
        return 1.0
    cols = [a[:, j].tolist() for j in range(n)]
    rowsum = [0.0] * n
    total = 0.0
    comp = 0.0
    gray = 0
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        gray ^= 1 << j
        col = cols[j]
        if gray >> j & 1:
            for i in range(n):
                rowsum[i] += col[i]
        else:
            for i in range(n):
                rowsum[i] -= col[i]
        term = math.prod(rowsum)
        if gray.bit_count() & 1:
            term = -term
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return -total if n & 1 else total


@lru_cache(maxsize=None)
def _masks(m: int):
    s = np.arange(1 << m)
    with_bit = []
    for r in range(m):
        idx = np.nonzero(s & (1 << r))[0]
        with_bit.append((idx, idx ^ (1 << r)))
    return with_bit


def _forward(dp, col, masks):
    new = dp.copy()
    for r, (hi, lo) in enumerate(masks):
        if col[r] != 0.0:
            new[hi] += col[r] * dp[lo]
    return new


def _backward(v, col, masks):
    new = v.copy()
    for r, (hi, lo) in enumerate(masks):
        if col[r] != 0.0:
            new[lo] += col[r] * v[hi]
    return new


def _gather(dp, col, masks):
    out = np.zeros_like(dp)
    for r, (hi, lo) in enumerate(masks):
        if col[r] != 0.0:
            out[hi] += col[r] * dp[lo]
    return out


def _renorm(v):
    mx = float(v.max())
    if mx == 0.0 or not math.isfinite(mx):
        return v, 0
    e = math.frexp(mx)[1]
    return np.ldexp(v, -e), e


def extperm_scaled(a: np.ndarray) -> tuple[float, int]:
    """Extended permanent ``Per([I_M A])`` as ``(mantissa, exp2)``."""
    m, n = a.shape
    masks = _masks(m)
    dp = np.zeros(1 << m)
    dp[0] = 1.0
    ex = 0
    for j in range(n):
        dp = _forward(dp, a[:, j], masks)
        dp, e = _renorm(dp)
        ex += e
    return math.fsum(dp), ex


def extperm_colderiv(c: np.ndarray, lam: np.ndarray) -> tuple[float, np.ndarray]:
    """``log2 F`` and ``log2 dF/dlam_j`` for ``F(lam) = Per~(c @ diag(lam))``.

    The derivatives come from one forward and one adjoint sweep of the
    dynamic program, so no subtraction is involved. Zero derivatives map to
    ``-inf``.
    """
    m, n = c.shape
    masks = _masks(m)
    fwd = np.empty((n + 1, 1 << m))
    fexp = np.zeros(n + 1, dtype=np.int64)
    dp = np.zeros(1 << m)
    dp[0] = 1.0
    fwd[0] = dp
    for j in range(n):
        dp, e = _renorm(_forward(dp, c[:, j] * lam[j], masks))
        fwd[j + 1] = dp
        fexp[j + 1] = fexp[j] + e
    log_f = math.log2(math.fsum(fwd[n])) + fexp[n]

    out = np.empty(n)
    adj = np.ones(1 << m)
    aexp = 0
    for j in range(n - 1, -1, -1):
        g = float(np.dot(adj, _gather(fwd[j], c[:, j], masks)))
        out[j] = math.log2(g) + aexp + fexp[j] if g > 0 else -math.inf
        adj, e = _renorm(_backward(adj, c[:, j] * lam[j], masks))
        aexp += e
    return log_f, out
