"""Batch experiments producing CSV curve data.

Stream layout: every curve owns a fixed substream of ``RngStream(seed)``.
SNR sweeps reuse the same draws at every grid point (common random
numbers), so each Monte-Carlo curve is monotone in SNR sample-by-sample.
Port sweeps key the stream by grid index as well, since the channel size
changes with ``N``. Grid points are independent and may run in a process
pool; rows are always written in grid order.
"""
from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

from . import capacity as cap
from .allocator import optimize
from .channel import (
    CouplingKind,
    CouplingModel,
    EigenBasis,
    PortGeometry,
    build_correlation,
    build_coupling,
    build_eigenbasis,
    rician_coupling,
)
from .config import ExperimentConfig
from .numerics import RngStream, logdet2_hpd_batch, sample_cn01

__all__ = [
    "fas_setup",
    "mc_port_capacity",
    "run_snr_sweep",
    "run_port_sweep",
    "run_los_compare",
    "run_allocate",
    "write_csv",
    "format_csv",
]

# substream ids per curve
S_FULL_EQ, S_FULL_OPT, S_SEL, S_FIXED, S_IID, S_COUPLING = 1, 2, 3, 4, 5, 99


def fas_setup(geom: PortGeometry, kind: str, k_factor_db: float | None, rng: RngStream):
    basis = build_eigenbasis(build_correlation(geom))
    kind = CouplingKind(kind)
    model = build_coupling(
        basis,
        kind,
        k_factor_db if kind is CouplingKind.SEPARABLE_RICIAN else None,
        rng.substream(S_COUPLING) if kind is CouplingKind.NON_SEPARABLE_RAYLEIGH else None,
    )
    return basis, model


def _sqrtm_psd(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    return (u * np.sqrt(w)) @ u.conj().T


def mc_port_capacity(m: int, aperture: float | None, snr_db: float, n_trials: int, rng: RngStream,
                     k_factor: float = 0.0) -> cap.CapacityEstimate:
    """Equal-power capacity of a conventional ``m x m`` array, port domain.

    ``aperture=None`` means uncorrelated elements; otherwise elements are
    evenly spaced over ``aperture`` wavelengths and correlated by the same
    sinc kernel as the fluid ports. ``k_factor > 0`` adds a rank-one
    broadside line-of-sight component ``sqrt(K/(1+K)) * 11^T``.
    """
    if aperture is None:
        rt = np.eye(m)
    else:
        basis = build_eigenbasis(build_correlation(PortGeometry(m, m, aperture, aperture)))
        rt = _sqrtm_psd(basis.Ut, basis.lambda_t)
    kappa = k_factor / (1.0 + k_factor)
    los = math.sqrt(kappa) * np.ones((m, m))
    rho = 10.0 ** (snr_db / 10.0)

    def block(gen, size):
        h = los + math.sqrt(1.0 - kappa) * (rt @ sample_cn01(gen, m, m, batch=size) @ rt.conj().T)
        g = h @ np.swapaxes(h.conj(), -1, -2)
        return logdet2_hpd_batch(np.eye(m) + (rho / m) * g)

    return cap.CapacityEstimate.from_samples(cap.run_blocks(rng, n_trials, block))


def _est(row: dict, name: str, est: cap.CapacityEstimate) -> None:
    row[name] = est.mean_bits
    row[name + "_se"] = est.std_error


def _fas_curves(row, basis, model, snr, n_trials, rng, do_opt, suffix=""):
    eq = cap.PowerAllocation.equal(model.Nt)
    _est(row, "c_full_eq" + suffix, cap.mc_full_capacity(model, eq, snr, n_trials, rng.substream(S_FULL_EQ)))
    row["c_upper_eq" + suffix] = cap.upper_bound(model, eq, snr)
    if do_opt:
        res = optimize(model.Omega, snr.gamma)
        alloc = cap.PowerAllocation(res.lam * model.Nt / res.lam.sum())
        _est(row, "c_full_opt" + suffix, cap.mc_full_capacity(model, alloc, snr, n_trials, rng.substream(S_FULL_OPT)))
        row["c_upper_opt" + suffix] = cap.upper_bound(model, alloc, snr)
    _est(row, "c_sel" + suffix, cap.mc_selection_capacity(model, basis, snr, n_trials, rng.substream(S_SEL)))


def _snr_point(cfg: ExperimentConfig, idx: int) -> dict:
    snr_db = cfg.snr_grid_db[idx]
    rng = RngStream(cfg.seed)
    geom = cfg.geometry
    basis, model = fas_setup(geom, cfg.coupling.kind, cfg.coupling.k_factor_db, rng)
    row = {"snr_db": snr_db}
    _fas_curves(row, basis, model, cap.SnrSpec.from_db(snr_db, geom.Nt), cfg.n_trials, rng, cfg.optimize)
    if cfg.baselines.fixed:
        _est(row, "c_fixed", mc_port_capacity(cfg.fixed_count, geom.Wt, snr_db, cfg.n_trials, rng.substream(S_FIXED)))
    if cfg.baselines.iid:
        for m in cfg.baselines.iid_counts:
            _est(row, f"c_iid_m{m}", mc_port_capacity(m, None, snr_db, cfg.n_trials, rng.substream(S_IID, m)))
    return row


def _port_point(cfg: ExperimentConfig, idx: int) -> dict:
    n = cfg.port_grid[idx]
    w = cfg.geometry.Wt
    rng = RngStream(cfg.seed)
    geom = PortGeometry(n, n, w, w)
    basis, model = fas_setup(geom, cfg.coupling.kind, cfg.coupling.k_factor_db, rng.substream(100 + idx))
    row = {"n_ports": n}
    _fas_curves(row, basis, model, cap.SnrSpec.from_db(cfg.fixed_snr_db, n), cfg.n_trials, rng.substream(100 + idx),
                cfg.optimize)
    # baselines do not depend on N: same stream at every row
    if cfg.baselines.fixed:
        _est(row, "c_fixed", mc_port_capacity(cfg.fixed_count, w, cfg.fixed_snr_db, cfg.n_trials,
                                              rng.substream(S_FIXED)))
    if cfg.baselines.iid:
        for m in cfg.baselines.iid_counts:
            _est(row, f"c_iid_m{m}", mc_port_capacity(m, None, cfg.fixed_snr_db, cfg.n_trials,
                                                      rng.substream(S_IID, m)))
    return row


def _los_point(cfg: ExperimentConfig, idx: int) -> dict:
    snr_db = cfg.snr_grid_db[idx]
    rng = RngStream(cfg.seed)
    geom = cfg.geometry
    basis = build_eigenbasis(build_correlation(geom))
    k = 10.0 ** (cfg.los_k_factor_db / 10.0)
    nlos = build_coupling(basis, CouplingKind.SEPARABLE_RAYLEIGH)
    los = rician_coupling(basis, k)
    snr = cap.SnrSpec.from_db(snr_db, geom.Nt)
    row = {"snr_db": snr_db}
    _fas_curves(row, basis, nlos, snr, cfg.n_trials, rng, False, suffix="_nlos")
    # with and without LOS share draws, so their difference is sharp
    _fas_curves(row, basis, los, snr, cfg.n_trials, rng, False, suffix="_los")
    row["specular_ratio"] = float(np.sum(np.abs(los.D) ** 2) / np.sum(los.M ** 2))
    if cfg.baselines.fixed:
        for tag, kk in (("nlos", 0.0), ("los", k)):
            _est(row, f"c_fixed_{tag}", mc_port_capacity(cfg.fixed_count, geom.Wt, snr_db, cfg.n_trials,
                                                         rng.substream(S_FIXED), kk))
    if cfg.baselines.iid:
        for m in cfg.baselines.iid_counts:
            for tag, kk in (("nlos", 0.0), ("los", k)):
                _est(row, f"c_iid_m{m}_{tag}", mc_port_capacity(m, None, snr_db, cfg.n_trials,
                                                               rng.substream(S_IID, m), kk))
    return row


def _allocate_point(cfg: ExperimentConfig, idx: int) -> dict:
    snr_db = cfg.snr_grid_db[idx]
    geom = cfg.geometry
    _, model = fas_setup(geom, cfg.coupling.kind, cfg.coupling.k_factor_db, RngStream(cfg.seed))
    snr = cap.SnrSpec.from_db(snr_db, geom.Nt)
    res = optimize(model.Omega, snr.gamma)
    row = {"snr_db": snr_db}
    for i, v in enumerate(res.lam):
        row[f"lam_{i + 1}"] = float(v)
    row["c_upper_eq"] = cap.upper_bound(model, cap.PowerAllocation.equal(geom.Nt), snr)
    row["c_upper_opt"] = res.objective
    row["kkt_mu"] = res.kkt.mu
    row["kkt_violation"] = res.kkt.max_violation
    row["iterations"] = res.iterations
    row["converged"] = int(res.converged)
    return row


def _run_grid(fn: Callable[[ExperimentConfig, int], dict], cfg: ExperimentConfig, n: int, workers: int) -> list[dict]:
    if workers <= 1 or n == 1:
        return [fn(cfg, i) for i in range(n)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, [cfg] * n, range(n)))


def run_snr_sweep(cfg: ExperimentConfig, workers: int = 1) -> list[dict]:
    return _run_grid(_snr_point, cfg, len(cfg.snr_grid_db), workers)


def run_port_sweep(cfg: ExperimentConfig, workers: int = 1) -> list[dict]:
    return _run_grid(_port_point, cfg, len(cfg.port_grid), workers)


def run_los_compare(cfg: ExperimentConfig, workers: int = 1) -> list[dict]:
    return _run_grid(_los_point, cfg, len(cfg.snr_grid_db), workers)


def run_allocate(cfg: ExperimentConfig, workers: int = 1) -> list[dict]:
    return _run_grid(_allocate_point, cfg, len(cfg.snr_grid_db), workers)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".12g")


def format_csv(rows: Sequence[dict], cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write("# config: " + cfg.to_json() + "\n")
    header = list(rows[0])
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row[k]) for k in header) + "\n")
    return buf.getvalue()


def write_csv(rows: Sequence[dict], cfg: ExperimentConfig, path: str) -> str:
    text = format_csv(rows, cfg)
    if path == "-":
        import sys

        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
