"""Statistical eigenmode power allocation maximising the permanent bound.

The objective is ``C(lam) = log2 Per~(gamma * Omega @ diag(lam))`` over the
scaled simplex ``{lam >= 0, sum(lam) = Nt}``. It is affine in each
``lam[i]``, which gives the gradient in closed form; the optimiser is
projected gradient ascent with Armijo backtracking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError
from .permanent import extended_permanent_colderiv_log2, extended_permanent_log2

__all__ = [
    "OptimizerConfig",
    "KktReport",
    "OptimizeResult",
    "objective",
    "gradient",
    "project_simplex",
    "kkt_residual",
    "optimize",
    "single_mode_allocation",
]

ACTIVE_THRESHOLD = 1e-8
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class OptimizerConfig:
    step_init: float = 1.0
    armijo_beta: float = 0.5
    armijo_c: float = 1e-4
    tol: float = 1e-6
    max_iters: int = 500
    max_backtracks: int = 60

    def __post_init__(self):
        if not self.step_init > 0:
            raise ValueError("step_init must be > 0")
        if not 0 < self.armijo_beta < 1 or not 0 < self.armijo_c < 1:
            raise ValueError("armijo_beta and armijo_c must lie in (0, 1)")
        if not self.tol > 0 or self.max_iters < 1:
            raise ValueError("tol must be > 0 and max_iters >= 1")


@dataclass(frozen=True)
class KktReport:
    mu: float
    max_violation: float
    active_set: tuple[int, ...]


@dataclass
class OptimizeResult:
    lam: np.ndarray
    kkt: KktReport
    objective: float
    converged: bool
    iterations: int
    trace: list[float] = field(default_factory=list)
    path: list[np.ndarray] = field(default_factory=list)


def _validate(omega, lam):
    omega = np.asarray(omega, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if omega.ndim != 2 or lam.shape != (omega.shape[1],):
        raise StructuralError(f"lam of shape {lam.shape} does not match Omega of shape {omega.shape}")
    return omega, lam


def objective(omega, lam, gamma: float) -> float:
    omega, lam = _validate(omega, lam)
    return extended_permanent_log2(gamma * omega * lam)


def gradient(omega, lam, gamma: float) -> np.ndarray:
    """``dC/dlam_i = F_i^(1) / (ln 2 * F)``, all components nonnegative."""
    omega, lam = _validate(omega, lam)
    log_f, log_d = extended_permanent_colderiv_log2(gamma * omega, lam)
    return np.exp2(log_d - log_f) / _LN2


def _objective_and_gradient(omega, lam, gamma):
    log_f, log_d = extended_permanent_colderiv_log2(gamma * omega, lam)
    return log_f, np.exp2(log_d - log_f) / _LN2


def project_simplex(z, budget: float) -> np.ndarray:
    """Euclidean projection of ``z`` onto ``{x >= 0, sum(x) = budget}``.

    Sort-and-threshold: ``x = max(z - tau, 0)`` with ``tau`` found from the
    sorted prefix sums.
    """
    if not budget > 0:
        raise ValueError("budget must be > 0")
    z = np.asarray(z, dtype=float)
    u = np.sort(z)[::-1]
    css = np.cumsum(u) - budget
    k = np.arange(1, z.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    x = np.maximum(z - tau, 0.0)
    # remove the last ulp-level drift from the budget
    support = x > 0
    x[support] += (budget - x.sum()) / support.sum()
    return np.maximum(x, 0.0)


def kkt_residual(omega, lam, gamma: float, threshold: float = ACTIVE_THRESHOLD) -> KktReport:
    """First-order optimality report at a feasible ``lam``.

    ``mu`` is the mean marginal utility over active modes; the violation is
    the worst spread of active utilities around ``mu`` or the worst excess of
    an inactive utility over ``mu``.
    """
    omega, lam = _validate(omega, lam)
    g = gradient(omega, lam, gamma)
    active = lam > threshold
    if not active.any():
        raise StructuralError("allocation has no active mode")
    mu = float(g[active].mean())
    viol = float(np.max(np.abs(g[active] - mu)))
    if (~active).any():
        viol = max(viol, float(np.max(np.maximum(g[~active] - mu, 0.0))))
    return KktReport(mu, viol, tuple(int(i) for i in np.nonzero(active)[0]))


def single_mode_allocation(omega) -> np.ndarray:
    """All power on the column of ``Omega`` with the largest sum (lowest index on ties)."""
    omega = np.asarray(omega, dtype=float)
    nt = omega.shape[1]
    lam = np.zeros(nt)
    lam[int(np.argmax(omega.sum(axis=0)))] = nt
    return lam


def optimize(omega, gamma: float, cfg: OptimizerConfig | None = None, lam0=None) -> OptimizeResult:
    """Projected-gradient ascent on the permanent bound, starting at equal power.

    Each iteration tries ``z = lam + alpha * g`` projected back onto the
    simplex and shrinks ``alpha`` by ``armijo_beta`` until the Armijo
    condition holds on the projected point. The first trial step is
    ``step_init * Nt / max|g|``; later ones are Barzilai-Borwein steps. Stops when ``||lam_new - lam|| <= tol``; hitting ``max_iters``
    returns ``converged=False``.
    """
    cfg = cfg or OptimizerConfig()
    omega = np.asarray(omega, dtype=float)
    nt = omega.shape[1]
    lam = np.ones(nt) if lam0 is None else project_simplex(lam0, nt)
    f, g = _objective_and_gradient(omega, lam, gamma)
    trace = [f]
    path = [lam]
    converged = False
    it = 0
    bb_step = None
    for it in range(1, cfg.max_iters + 1):
        gmax = float(np.max(np.abs(g)))
        if gmax == 0.0:
            converged = True
            break
        alpha = cfg.step_init * nt / gmax if bb_step is None else bb_step
        for _ in range(cfg.max_backtracks):
            cand = project_simplex(lam + alpha * g, nt)
            f_cand = objective(omega, cand, gamma)
            if f_cand >= f + cfg.armijo_c * float(g @ (cand - lam)):
                break
            alpha *= cfg.armijo_beta
        else:
            # no ascent step found: lam is stationary to working precision
            converged = True
            break
        if f_cand < f:
            converged = True
            break
        s = cand - lam
        step = float(np.linalg.norm(s))
        lam = cand
        g_old = g
        f, g = _objective_and_gradient(omega, lam, gamma)
        trace.append(f)
        path.append(lam)
        if step <= cfg.tol:
            converged = True
            break
        # spectral (Barzilai-Borwein) trial step for the next iteration
        curv = -float(s @ (g - g_old))
        bb_step = float(s @ s) / curv if curv > 0 else None
        if bb_step is not None:
            bb_step = min(bb_step, 1e6 * cfg.step_init * nt / max(gmax, 1e-300))
    return OptimizeResult(lam, kkt_residual(omega, lam, gamma), f, converged, it, trace, path)
