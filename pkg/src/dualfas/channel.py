"""Dual-side fluid-antenna geometry, correlation and eigenmode coupling.

The port-domain channel is ``H = Ur @ Ht @ Ut^H`` with eigenmode-domain
channel ``Ht = D + M * H0`` (``*`` elementwise, ``H0`` i.i.d. CN(0, 1)).
The coupling matrix ``Omega = |D|^2 + M*M`` has row/column sums proportional
to the receive/transmit eigenvalue profiles.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ConvergenceError, NumericalDomainError, PreconditionError, StructuralError
from .numerics import RngStream, hermitian_eigendecompose, sample_cn01

__all__ = [
    "PortGeometry",
    "CorrelationPair",
    "EigenBasis",
    "CouplingKind",
    "CouplingModel",
    "ChannelSample",
    "sinc",
    "build_correlation",
    "build_eigenbasis",
    "build_coupling",
    "fit_marginals",
    "sample_channel",
    "sample_eigenmode_batch",
    "check_mean_pattern",
]

MARGINAL_TOL = 1e-10
MAX_FIT_SWEEPS = 10_000


def sinc(x):
    """Unnormalised sinc, ``sin(x)/x`` with ``sinc(0) = 1``."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = x != 0
    out[nz] = np.sin(x[nz]) / x[nz]
    return out


@dataclass(frozen=True)
class PortGeometry:
    """Port counts and aperture widths (in wavelengths) of both ends."""

    Nt: int
    Nr: int
    Wt: float
    Wr: float

    def __post_init__(self):
        if self.Nt < 2 or self.Nr < 2:
            raise StructuralError("port counts must be >= 2")
        if not (self.Wt > 0 and self.Wr > 0):
            raise StructuralError("apertures must be positive")

    @classmethod
    def symmetric(cls, n: int, w: float) -> "PortGeometry":
        return cls(n, n, w, w)

    @property
    def tx_positions(self) -> np.ndarray:
        return np.arange(self.Nt) * self.Wt / (self.Nt - 1)

    @property
    def rx_positions(self) -> np.ndarray:
        return np.arange(self.Nr) * self.Wr / (self.Nr - 1)


@dataclass(frozen=True)
class CorrelationPair:
    sigma_t: np.ndarray
    sigma_r: np.ndarray


def _toeplitz_corr(n: int, w: float, kernel: Callable) -> np.ndarray:
    lag = np.arange(n)
    a = kernel(2.0 * np.pi * lag * w / (n - 1))
    idx = np.abs(lag[:, None] - lag[None, :])
    return a[idx]


def build_correlation(geom: PortGeometry, kernel: Callable = sinc) -> CorrelationPair:
    """Clarke-type Toeplitz port correlations ``a(l) = kernel(2*pi*l*W/(N-1))``."""
    return CorrelationPair(
        sigma_t=_toeplitz_corr(geom.Nt, geom.Wt, kernel),
        sigma_r=_toeplitz_corr(geom.Nr, geom.Wr, kernel),
    )


@dataclass(frozen=True)
class EigenBasis:
    Ut: np.ndarray
    Ur: np.ndarray
    lambda_t: np.ndarray
    lambda_r: np.ndarray

    @property
    def pi_t(self) -> np.ndarray:
        return self.lambda_t / self.lambda_t.sum()

    @property
    def pi_r(self) -> np.ndarray:
        return self.lambda_r / self.lambda_r.sum()

    @property
    def Nt(self) -> int:
        return self.lambda_t.size

    @property
    def Nr(self) -> int:
        return self.lambda_r.size

    @classmethod
    def identity(cls, nt: int, nr: int) -> "EigenBasis":
        """Basis of uncorrelated (i.i.d.) ports."""
        return cls(np.eye(nt, dtype=complex), np.eye(nr, dtype=complex), np.ones(nt), np.ones(nr))


def build_eigenbasis(corr: CorrelationPair) -> EigenBasis:
    et = hermitian_eigendecompose(corr.sigma_t)
    er = hermitian_eigendecompose(corr.sigma_r)
    return EigenBasis(
        Ut=et.eigenvectors.astype(complex),
        Ur=er.eigenvectors.astype(complex),
        lambda_t=et.eigenvalues,
        lambda_r=er.eigenvalues,
    )


class CouplingKind(str, enum.Enum):
    SEPARABLE_RAYLEIGH = "separable-rayleigh"
    NON_SEPARABLE_RAYLEIGH = "non-separable-rayleigh"
    SEPARABLE_RICIAN = "separable-rician"


def check_mean_pattern(d: np.ndarray) -> None:
    """Raise unless ``d`` has at most one non-zero per row and per column."""
    nz = np.abs(d) > 0
    if np.any(nz.sum(axis=0) > 1) or np.any(nz.sum(axis=1) > 1):
        raise PreconditionError("mean matrix D must have at most one non-zero entry per row and column")


def _cpx_to_list(a: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in a]


@dataclass(frozen=True)
class CouplingModel:
    """Mean matrix ``D``, scattering strengths ``M`` and coupling ``Omega``."""

    D: np.ndarray
    M: np.ndarray
    Omega: np.ndarray = field(default=None)

    def __post_init__(self):
        d = np.asarray(self.D, dtype=complex)
        m = np.asarray(self.M, dtype=float)
        if d.ndim != 2 or d.shape != m.shape:
            raise StructuralError(f"D {d.shape} and M {m.shape} must be equal-shape matrices")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise StructuralError("M must be finite and nonnegative")
        check_mean_pattern(d)
        omega = np.abs(d) ** 2 + m * m
        if self.Omega is not None and not np.allclose(self.Omega, omega, rtol=1e-12, atol=1e-12):
            raise StructuralError("Omega is inconsistent with |D|^2 + M*M")
        object.__setattr__(self, "D", d)
        object.__setattr__(self, "M", m)
        object.__setattr__(self, "Omega", omega)

    @property
    def shape(self) -> tuple[int, int]:
        return self.Omega.shape

    @property
    def Nr(self) -> int:
        return self.Omega.shape[0]

    @property
    def Nt(self) -> int:
        return self.Omega.shape[1]

    def to_dict(self) -> dict[str, Any]:
        return {"D": _cpx_to_list(self.D), "M": self.M.tolist(), "Omega": self.Omega.tolist()}

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "CouplingModel":
        d = np.asarray(doc["D"], dtype=float)
        d = d[..., 0] + 1j * d[..., 1]
        omega = np.asarray(doc["Omega"], dtype=float) if "Omega" in doc else None
        return cls(d, np.asarray(doc["M"], dtype=float), omega)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "CouplingModel":
        return cls.from_dict(json.loads(text))


def fit_marginals(start: np.ndarray, row_target: np.ndarray, col_target: np.ndarray,
                  tol: float = MARGINAL_TOL, max_sweeps: int = MAX_FIT_SWEEPS) -> np.ndarray:
    """Iterative proportional fitting of a nonnegative matrix to given marginals.

    ``row_target`` and ``col_target`` must have equal totals. Convergence is
    declared when every row and column sum is within ``tol`` (relative to the
    total) of its target.
    """
    x = np.array(start, dtype=float)
    row_target = np.asarray(row_target, dtype=float)
    col_target = np.asarray(col_target, dtype=float)
    total = row_target.sum()
    if not math.isclose(total, col_target.sum(), rel_tol=1e-12):
        raise StructuralError("row and column targets must have equal totals")
    if total <= 0:
        return np.zeros_like(x)
    for _ in range(max_sweeps):
        rs = x.sum(axis=1)
        x *= np.divide(row_target, rs, out=np.zeros_like(rs), where=rs > 0)[:, None]
        cs = x.sum(axis=0)
        x *= np.divide(col_target, cs, out=np.zeros_like(cs), where=cs > 0)[None, :]
        err = max(np.max(np.abs(x.sum(axis=1) - row_target)), np.max(np.abs(x.sum(axis=0) - col_target)))
        if err <= tol * total:
            return x
    raise ConvergenceError(f"marginal fitting did not converge in {max_sweeps} sweeps")


def build_coupling(basis: EigenBasis, kind: CouplingKind | str, k_factor_db: float | None = None,
                   rng: RngStream | None = None) -> CouplingModel:
    """Construct the coupling model for one of the supported channel kinds.

    The total power ``sum(Omega)`` is ``Nt*Nr`` so that uncorrelated ports
    have unit average gain. Marginals of ``Omega`` always match the
    eigenvalue profiles ``pi_r`` / ``pi_t``.

    For the Rician kind the specular power ``K/(1+K) * Nt*Nr`` is laid on the
    diagonal eigenmode pairs ``(i, i)`` in proportion to
    ``min(pi_r[i], pi_t[i])``, which keeps at most one non-zero per row and
    column of ``D`` and leaves nonnegative residual marginals for the
    scattered part.
    """
    kind = CouplingKind(kind)
    nt, nr = basis.Nt, basis.Nr
    total = float(nt * nr)
    pi_r, pi_t = basis.pi_r, basis.pi_t
    rows, cols = total * pi_r, total * pi_t

    if kind is CouplingKind.SEPARABLE_RAYLEIGH:
        if k_factor_db is not None:
            raise StructuralError("k_factor_db only applies to the Rician kind")
        omega = total * np.outer(pi_r, pi_t)
        return CouplingModel(np.zeros((nr, nt), complex), np.sqrt(omega))

    if kind is CouplingKind.NON_SEPARABLE_RAYLEIGH:
        if k_factor_db is not None:
            raise StructuralError("k_factor_db only applies to the Rician kind")
        if rng is None:
            raise StructuralError("non-separable coupling needs an RngStream")
        start = rng.generator().uniform(0.05, 1.0, size=(nr, nt))
        omega = fit_marginals(start, rows, cols)
        return CouplingModel(np.zeros((nr, nt), complex), np.sqrt(omega))

    if k_factor_db is None:
        raise StructuralError("Rician coupling needs k_factor_db")
    k = 10.0 ** (k_factor_db / 10.0)
    return rician_coupling(basis, k)


def rician_coupling(basis: EigenBasis, k: float) -> CouplingModel:
    """Rician coupling from a linear K-factor (``k = 0`` gives Rayleigh)."""
    if not k >= 0 or math.isinf(k):
        raise NumericalDomainError(f"K-factor must be finite and >= 0, got {k}")
    nt, nr = basis.Nt, basis.Nr
    total = float(nt * nr)
    pi_r, pi_t = basis.pi_r, basis.pi_t
    rows, cols = total * pi_r, total * pi_t
    kappa = k / (1.0 + k)
    n = min(nt, nr)
    share = np.minimum(pi_r[:n], pi_t[:n])
    if kappa > share.sum() * (1 + 1e-12):
        raise NumericalDomainError(
            f"specular fraction {kappa:.4f} exceeds the diagonal capacity {share.sum():.4f} of the marginals"
        )
    spec = kappa * total * share / share.sum() if kappa > 0 else np.zeros(n)
    d = np.zeros((nr, nt), complex)
    d[np.arange(n), np.arange(n)] = np.sqrt(spec)

    scatter = (1.0 - kappa) * total * np.outer(pi_r, pi_t)
    row_res = rows.copy()
    col_res = cols.copy()
    row_res[:n] -= spec
    col_res[:n] -= spec
    row_res = np.clip(row_res, 0.0, None)
    col_res = np.clip(col_res, 0.0, None)
    # equal totals up to rounding after clipping
    col_res *= row_res.sum() / col_res.sum() if col_res.sum() > 0 else 1.0
    m2 = fit_marginals(scatter, row_res, col_res)
    return CouplingModel(d, np.sqrt(m2))


@dataclass(frozen=True)
class ChannelSample:
    Htilde: np.ndarray
    H: np.ndarray


def sample_eigenmode_batch(model: CouplingModel, gen: np.random.Generator, batch: int) -> np.ndarray:
    """``batch`` draws of ``D + M * H0`` stacked along axis 0."""
    h0 = sample_cn01(gen, model.Nr, model.Nt, batch=batch)
    return model.D + model.M * h0


def sample_channel(model: CouplingModel, basis: EigenBasis, rng: RngStream | np.random.Generator) -> ChannelSample:
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    ht = model.D + model.M * sample_cn01(gen, model.Nr, model.Nt)
    return ChannelSample(ht, basis.Ur @ ht @ basis.Ut.conj().T)
