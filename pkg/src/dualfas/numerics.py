"""Seedable complex linear-algebra and sampling primitives.

Everything here is pure given its inputs. Random draws go through
:class:`RngStream`, a (seed, key) pair mapped onto an independent numpy
``PCG64`` stream via ``SeedSequence`` spawn keys, so that Monte-Carlo work can
be split into blocks whose draws do not depend on how the blocks are
scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NumericalDomainError, StructuralError

__all__ = [
    "RngStream",
    "HermitianEig",
    "hermitian_eigendecompose",
    "logdet2_hpd",
    "logdet2_hpd_batch",
    "sample_cn01",
]

_LN2 = np.log(2.0)
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by ``(seed, key)``.

    ``key`` is a tuple of unsigned integers; ``substream(i)`` appends ``i`` to
    it. Distinct keys give statistically independent streams.
    """

    seed: int
    key: tuple[int, ...] = (0,)

    def __post_init__(self):
        if not 0 <= self.seed <= _U64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if isinstance(self.key, int):
            object.__setattr__(self, "key", (self.key,))
        if any(not 0 <= k <= _U64 for k in self.key):
            raise ValueError(f"stream key entries must be 64-bit unsigned, got {self.key}")

    def substream(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(ss))


class HermitianEig(NamedTuple):
    eigenvectors: np.ndarray
    eigenvalues: np.ndarray


def _as_square(a, name="A"):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise StructuralError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise StructuralError(f"{name} has non-finite entries")
    return a


def hermitian_eigendecompose(a, clamp_tol: float | None = None) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.

    Parameters
    ----------
    a : array_like
        Square Hermitian matrix (tolerance 1e-12 entrywise).
    clamp_tol : float, optional
        Eigenvalues with magnitude below this are set to exactly zero.
        Defaults to ``1e-12 * max|eigenvalue|``.

    Returns
    -------
    HermitianEig
        ``(U, w)`` with ``a = U @ diag(w) @ U^H``.
    """
    a = _as_square(a)
    if np.max(np.abs(a - a.conj().T), initial=0.0) > 1e-12:
        raise StructuralError("matrix is not Hermitian within 1e-12")
    w, u = np.linalg.eigh(a)
    order = np.argsort(w, kind="stable")[::-1]
    w, u = w[order], u[:, order]
    if clamp_tol is None:
        clamp_tol = 1e-12 * max(np.max(np.abs(w), initial=0.0), np.finfo(float).tiny)
    w = np.where(np.abs(w) < clamp_tol, 0.0, w)
    return HermitianEig(u, w)


def logdet2_hpd(a) -> float:
    """``log2 det(a)`` of a Hermitian positive-definite matrix via Cholesky."""
    a = _as_square(a)
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalDomainError("matrix is not Hermitian positive definite") from exc
    return float(2.0 * np.sum(np.log(np.abs(np.diag(chol)).real)) / _LN2)


def logdet2_hpd_batch(a: np.ndarray) -> np.ndarray:
    """Vectorised :func:`logdet2_hpd` over a stack of shape ``(B, n, n)``."""
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalDomainError("stack contains a non-HPD matrix") from exc
    d = np.abs(np.diagonal(chol, axis1=-2, axis2=-1))
    return 2.0 * np.sum(np.log(d), axis=-1) / _LN2


def sample_cn01(rng: RngStream | np.random.Generator, rows: int, cols: int | None = None,
                *, batch: int | None = None) -> np.ndarray:
    """I.i.d. circularly-symmetric CN(0, 1) entries.

    Real and imaginary parts are N(0, 1/2). With ``batch`` the result has
    shape ``(batch, rows, cols)``. Passing an :class:`RngStream` restarts
    that stream, so repeated calls return identical draws.
    """
    if cols is None:
        cols = rows
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    shape = (rows, cols) if batch is None else (batch, rows, cols)
    z = gen.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)
