"""Self-check suites run by ``dualfas validate``.

Each suite compares an implementation route against an independent oracle
and returns a :class:`SuiteResult`. ``run_validate`` accepts replacement
callables so that a deliberately broken kernel can be injected as a
negative control.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import capacity as cap
from .allocator import gradient, kkt_residual, objective, optimize, project_simplex
from .channel import CouplingModel, EigenBasis, fit_marginals
from .numerics import RngStream
from .permanent import extended_permanent, extended_permanent_subsets, permanent_exact, permanent_ryser


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def suite_permanent(rng, n_cases=300, ryser=permanent_ryser) -> SuiteResult:
    worst = 0.0
    for _ in range(n_cases):
        n = int(rng.integers(1, 8))
        a = rng.random((n, n))
        worst = max(worst, _rel(ryser(a), permanent_exact(a)))
    return SuiteResult("permanent", worst <= 1e-12, f"max rel err {worst:.2e} over {n_cases} matrices")


def suite_transpose(rng, n_cases=100) -> SuiteResult:
    worst_t = worst_s = 0.0
    for _ in range(n_cases):
        m, n = rng.integers(1, 7), rng.integers(1, 9)
        a = rng.random((m, n)) * rng.uniform(0.1, 3.0)
        v = extended_permanent(a)
        worst_t = max(worst_t, _rel(extended_permanent(a.T), v))
        if m * n <= 20:
            worst_s = max(worst_s, _rel(extended_permanent_subsets(a), v))
    ok = worst_t <= 1e-10 and worst_s <= 1e-10
    return SuiteResult("transpose", ok, f"transpose rel err {worst_t:.2e}, subset-sum rel err {worst_s:.2e}")


def random_scattered_model(rng: np.random.Generator, nr: int, nt: int, with_mean: bool = False) -> CouplingModel:
    """Random coupling model with Dirichlet marginals and total ``nr*nt``."""
    total = float(nr * nt)
    rows = rng.dirichlet(np.ones(nr)) * total
    cols = rng.dirichlet(np.ones(nt)) * total
    m2 = fit_marginals(rng.uniform(0.05, 1.0, (nr, nt)), rows, cols)
    d = np.zeros((nr, nt), complex)
    if with_mean:
        k = min(nr, nt)
        rperm, cperm = rng.permutation(nr)[:k], rng.permutation(nt)[:k]
        for r, c in zip(rperm[: rng.integers(1, k + 1)], cperm):
            d[r, c] = np.sqrt(rng.uniform(0.2, 1.0) * m2[r, c]) * np.exp(2j * np.pi * rng.random())
            m2[r, c] -= abs(d[r, c]) ** 2
    return CouplingModel(d, np.sqrt(np.clip(m2, 0.0, None)))


def suite_det_identity(rng, n_configs=4, n_trials=200_000, seed=0) -> SuiteResult:
    worst = 0.0
    for k in range(n_configs):
        nr, nt = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        model = random_scattered_model(rng, nr, nt, with_mean=k % 2 == 1)
        lam = rng.dirichlet(np.ones(nt)) * nt
        gamma = float(rng.uniform(0.1, 1.0))
        snr = cap.SnrSpec(gamma * nt, nt)
        est = cap.mc_det_expectation(model, cap.PowerAllocation(lam), snr, n_trials, RngStream(seed, (7, k)))
        exact = extended_permanent(gamma * model.Omega * lam)
        worst = max(worst, abs(est.mean_bits - exact) / est.std_error)
    return SuiteResult("det_identity", worst <= 3.0, f"max |MC - Per~| = {worst:.2f} std errors over {n_configs} configs")


def suite_gradient(rng, n_points=20, h=1e-5) -> SuiteResult:
    worst = 0.0
    for _ in range(n_points):
        nr, nt = int(rng.integers(1, 5)), int(rng.integers(2, 5))
        omega = rng.random((nr, nt))
        lam = rng.dirichlet(np.ones(nt)) * nt * 0.8 + 0.2
        lam *= nt / lam.sum()
        gamma = float(rng.uniform(0.1, 5.0))
        g = gradient(omega, lam, gamma)
        for i in range(nt):
            e = np.zeros(nt)
            e[i] = h
            fd = (objective(omega, lam + e, gamma) - objective(omega, lam - e, gamma)) / (2 * h)
            worst = max(worst, _rel(g[i], fd))
    return SuiteResult("gradient", worst <= 1e-6, f"max rel err vs central differences {worst:.2e}")


def suite_projection(rng, n_cases=20, n_feasible=1000) -> SuiteResult:
    violations = 0
    for _ in range(n_cases):
        n = int(rng.integers(2, 9))
        z = rng.normal(0, 3, n)
        budget = float(n)
        p = project_simplex(z, budget)
        ys = rng.dirichlet(np.ones(n), size=n_feasible) * budget
        d = np.linalg.norm(z - p)
        violations += int(np.sum(np.linalg.norm(z - ys, axis=1) < d - 1e-12))
        violations += int(abs(p.sum() - budget) > 1e-12 * budget or np.any(p < 0))
    return SuiteResult("projection", violations == 0, f"{violations} violations")


def suite_kkt(rng, n_cases=5) -> SuiteResult:
    worst = 0.0
    for _ in range(n_cases):
        omega = rng.random((4, 4))
        res = optimize(omega, 10.0 / 4)
        worst = max(worst, kkt_residual(omega, res.lam, 10.0 / 4).max_violation)
    return SuiteResult("kkt", worst <= 1e-5, f"max KKT violation {worst:.2e}")


def run_validate(seed: int = 0, n_trials: int = 200_000, ryser: Callable | None = None) -> list[SuiteResult]:
    suites = [
        ("permanent", lambda r: suite_permanent(r, ryser=ryser or permanent_ryser)),
        ("transpose", suite_transpose),
        ("det_identity", lambda r: suite_det_identity(r, n_trials=n_trials, seed=seed)),
        ("gradient", suite_gradient),
        ("projection", suite_projection),
        ("kkt", suite_kkt),
    ]
    results = []
    for k, (_, fn) in enumerate(suites):
        t0 = time.perf_counter()
        res = fn(np.random.default_rng([seed, k]))
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return results


def format_report(results: list[SuiteResult]) -> str:
    lines = [f"{'PASS' if r.passed else 'FAIL'}  {r.name:<11} {r.detail}  ({r.seconds:.1f}s)" for r in results]
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} suites passed")
    return "\n".join(lines)
