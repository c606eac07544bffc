"""Monte-Carlo capacities and the extended-permanent upper bound.

Monte-Carlo routines split ``n_trials`` into fixed-size blocks; block ``b``
draws from ``rng.substream(b)``. Results therefore depend only on
``(rng, n_trials)``, never on how blocks are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel import CouplingModel, EigenBasis, check_mean_pattern, sample_eigenmode_batch
from .errors import StructuralError
from .numerics import RngStream, logdet2_hpd_batch
from .permanent import extended_permanent_log2

__all__ = [
    "SnrSpec",
    "CapacityEstimate",
    "PowerAllocation",
    "BLOCK_TRIALS",
    "mc_full_capacity",
    "mc_selection_capacity",
    "mc_det_expectation",
    "upper_bound",
    "upper_bound_value",
    "asymptotic_low_snr",
    "asymptotic_high_snr_optimal",
    "full_capacity_samples",
    "run_blocks",
]

BLOCK_TRIALS = 8192
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class SnrSpec:
    """Average SNR ``rho = P / noise``; ``gamma = rho / Nt`` is the per-mode scale."""

    rho: float
    Nt: int

    def __post_init__(self):
        if not self.rho >= 0 or math.isinf(self.rho):
            raise ValueError(f"rho must be finite and >= 0, got {self.rho}")
        if self.Nt < 1:
            raise ValueError("Nt must be >= 1")

    @classmethod
    def from_db(cls, snr_db: float, nt: int) -> "SnrSpec":
        return cls(10.0 ** (snr_db / 10.0), nt)

    @property
    def gamma(self) -> float:
        return self.rho / self.Nt


@dataclass(frozen=True)
class CapacityEstimate:
    mean_bits: float
    std_error: float
    n_trials: int

    @classmethod
    def from_samples(cls, x: np.ndarray) -> "CapacityEstimate":
        n = x.size
        if n == 1 or np.all(x == x[0]):
            se = 0.0
        else:
            se = float(np.std(x, ddof=1) / math.sqrt(n))
        return cls(float(np.mean(x)), se, n)


@dataclass(frozen=True)
class PowerAllocation:
    """Transmit eigenmode powers, nonnegative and summing to ``Nt``."""

    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim != 1 or lam.size < 1:
            raise StructuralError("allocation must be a nonempty vector")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise StructuralError("allocation entries must be finite and nonnegative")
        if abs(lam.sum() - lam.size) > 1e-9 * lam.size:
            raise StructuralError(f"allocation must sum to Nt={lam.size}, got {lam.sum()}")
        object.__setattr__(self, "lam", lam)

    @classmethod
    def equal(cls, nt: int) -> "PowerAllocation":
        return cls(np.ones(nt))

    @property
    def Nt(self) -> int:
        return self.lam.size


def _check_dims(model: CouplingModel, alloc: PowerAllocation, snr: SnrSpec):
    if alloc.Nt != model.Nt or snr.Nt != model.Nt:
        raise StructuralError(
            f"dimension mismatch: model Nt={model.Nt}, allocation {alloc.Nt}, snr Nt={snr.Nt}"
        )


def run_blocks(rng: RngStream, n_trials: int, fn: Callable[[np.random.Generator, int], np.ndarray]) -> np.ndarray:
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    out = []
    for b, start in enumerate(range(0, n_trials, BLOCK_TRIALS)):
        size = min(BLOCK_TRIALS, n_trials - start)
        out.append(fn(rng.substream(b).generator(), size))
    return np.concatenate(out)


def full_capacity_samples(ht: np.ndarray, lam: np.ndarray, gamma: float) -> np.ndarray:
    """``log2 det(I + gamma * Ht diag(lam) Ht^H)`` for a stack of channels."""
    nr = ht.shape[-2]
    g = (ht * lam) @ np.swapaxes(ht.conj(), -1, -2)
    return logdet2_hpd_batch(np.eye(nr) + gamma * g)


def mc_full_capacity(model: CouplingModel, alloc: PowerAllocation, snr: SnrSpec, n_trials: int,
                     rng: RngStream) -> CapacityEstimate:
    """Ergodic full-port capacity at a fixed eigenmode allocation.

    Works in the eigenmode domain: the port-domain unitaries cancel inside
    the determinant.
    """
    _check_dims(model, alloc, snr)
    lam, gamma = alloc.lam, snr.gamma

    def block(gen, size):
        return full_capacity_samples(sample_eigenmode_batch(model, gen, size), lam, gamma)

    return CapacityEstimate.from_samples(run_blocks(rng, n_trials, block))


def mc_selection_capacity(model: CouplingModel, basis: EigenBasis, snr: SnrSpec, n_trials: int,
                          rng: RngStream) -> CapacityEstimate:
    """Capacity of the best single transmit/receive port pair.

    The selected pair carries the full SNR ``rho`` (not ``gamma``).
    """
    if snr.Nt != model.Nt or basis.Nt != model.Nt or basis.Nr != model.Nr:
        raise StructuralError("model, basis and snr dimensions disagree")
    ur, uth = basis.Ur, basis.Ut.conj().T

    def block(gen, size):
        h = ur @ sample_eigenmode_batch(model, gen, size) @ uth
        best = np.max(np.abs(h) ** 2, axis=(-2, -1))
        return np.log2(1.0 + snr.rho * best)

    return CapacityEstimate.from_samples(run_blocks(rng, n_trials, block))


def mc_det_expectation(model: CouplingModel, alloc: PowerAllocation, snr: SnrSpec, n_trials: int,
                       rng: RngStream) -> CapacityEstimate:
    """Monte-Carlo mean of ``det(I + gamma * Ht diag(lam) Ht^H)`` (not its log).

    ``mean_bits`` holds the raw determinant mean here. Keep ``gamma``
    moderate: the determinant is heavy-tailed.
    """
    _check_dims(model, alloc, snr)
    check_mean_pattern(model.D)
    lam, gamma = alloc.lam, snr.gamma

    def block(gen, size):
        return np.exp2(full_capacity_samples(sample_eigenmode_batch(model, gen, size), lam, gamma))

    return CapacityEstimate.from_samples(run_blocks(rng, n_trials, block))


def upper_bound_value(omega: np.ndarray, lam: np.ndarray, gamma: float) -> float:
    """``log2 Per~(gamma * Omega @ diag(lam))`` in bits."""
    return extended_permanent_log2(gamma * np.asarray(omega, dtype=float) * np.asarray(lam, dtype=float))


def upper_bound(model: CouplingModel, alloc: PowerAllocation, snr: SnrSpec) -> float:
    """Closed-form upper bound on the ergodic capacity at allocation ``alloc``."""
    _check_dims(model, alloc, snr)
    check_mean_pattern(model.D)
    return upper_bound_value(model.Omega, alloc.lam, snr.gamma)


def asymptotic_low_snr(model: CouplingModel, alloc: PowerAllocation, snr: SnrSpec) -> float:
    """First-order small-``gamma`` expansion of the upper bound, in bits."""
    _check_dims(model, alloc, snr)
    return snr.gamma / _LN2 * float(alloc.lam @ model.Omega.sum(axis=0))


def asymptotic_high_snr_optimal(nt: int) -> PowerAllocation:
    """Equal power, optimal for the bound as ``gamma -> inf`` when ``Nr >= Nt``."""
    return PowerAllocation.equal(nt)
