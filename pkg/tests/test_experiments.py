import csv
import io
import json

import numpy as np
import pytest

from dualfas import cli, experiments
from dualfas.capacity import SnrSpec, mc_full_capacity, PowerAllocation
from dualfas.channel import EigenBasis, PortGeometry, build_coupling
from dualfas.config import Baselines, CouplingSpec, ExperimentConfig
from dualfas.numerics import RngStream, logdet2_hpd_batch, sample_cn01
from dualfas.validate import run_validate

SMALL = dict(geometry=PortGeometry(4, 4, 1.0, 1.0), n_trials=2000, baselines=Baselines(iid_counts=(3,)))


def parse(text):
    lines = text.splitlines()
    assert lines[0].startswith("# config: ")
    cfg = json.loads(lines[0][len("# config: "):])
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    return cfg, rows


def test_config_round_trip():
    cfg = ExperimentConfig(kind="los-compare", coupling=CouplingSpec("separable-rician", 6.0),
                           snr_grid_db=(0, 10), baselines=Baselines(fixed_count=2, iid_counts=(5, 10)))
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg
    assert ExperimentConfig.from_json(again.to_json()).to_json() == cfg.to_json()


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(kind="snr-sweep", snr_grid_db=())
    with pytest.raises(ValueError):
        ExperimentConfig(kind="port-sweep", port_grid=())
    with pytest.raises(ValueError):
        ExperimentConfig(n_trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"kind": "snr-sweep", "bogus": 1})


def test_fixed_count_default():
    assert ExperimentConfig().fixed_count == 3
    assert ExperimentConfig(baselines=Baselines(fixed_count=2)).fixed_count == 2


def test_snr_sweep_single_point_ordering():
    cfg = ExperimentConfig(kind="snr-sweep", snr_grid_db=(0.0,), **SMALL)
    (row,) = experiments.run_snr_sweep(cfg)
    for key in ("c_full_eq", "c_full_opt", "c_sel", "c_fixed", "c_iid_m3"):
        assert key in row and key + "_se" in row and row[key] >= 0
    tol = 3 * np.hypot(row["c_sel_se"], row["c_full_eq_se"])
    assert row["c_sel"] <= row["c_full_eq"] + tol
    assert row["c_full_eq"] <= row["c_upper_eq"] + 3 * row["c_full_eq_se"]
    assert row["c_full_opt"] <= row["c_upper_opt"] + 3 * row["c_full_opt_se"]


def test_port_sweep_smallest_case():
    cfg = ExperimentConfig(kind="port-sweep", port_grid=(2,), **SMALL)
    (row,) = experiments.run_port_sweep(cfg)
    assert row["n_ports"] == 2
    assert all(np.isfinite(v) and v >= 0 for v in row.values())


def test_iid_baseline_matches_direct_run():
    est = experiments.mc_port_capacity(5, None, 10.0, 50_000, RngStream(1))
    # independent path: plain CN(0,1) 5x5 matrices, equal power rho/M
    h = sample_cn01(np.random.default_rng(77), 5, 5, batch=50_000)
    direct = logdet2_hpd_batch(np.eye(5) + (10.0 / 5) * h @ np.swapaxes(h.conj(), 1, 2))
    se = np.hypot(est.std_error, direct.std() / np.sqrt(direct.size))
    assert abs(est.mean_bits - direct.mean()) <= 3 * se
    # and through the eigenmode path with identity correlation
    model = build_coupling(EigenBasis.identity(5, 5), "separable-rayleigh")
    eig = mc_full_capacity(model, PowerAllocation.equal(5), SnrSpec.from_db(10.0, 5), 50_000, RngStream(2))
    assert abs(est.mean_bits - eig.mean_bits) <= 3 * np.hypot(est.std_error, eig.std_error)


def test_los_compare_columns_and_limit():
    cfg = ExperimentConfig(kind="los-compare", snr_grid_db=(10.0,), los_k_factor_db=6.0, **SMALL)
    (row,) = experiments.run_los_compare(cfg)
    assert row["specular_ratio"] == pytest.approx(10**0.6, rel=1e-9)
    # K -> 0 (linear): LOS columns collapse onto the Rayleigh ones
    zero = experiments.run_los_compare(cfg.replace(los_k_factor_db=-300.0))[0]
    for base in ("c_full_eq", "c_sel", "c_fixed", "c_iid_m3"):
        assert zero[base + "_los"] == pytest.approx(zero[base + "_nlos"], rel=1e-9)


def test_allocate_rows():
    cfg = ExperimentConfig(kind="allocate", snr_grid_db=(-30.0, 40.0), **SMALL)
    low, high = experiments.run_allocate(cfg)
    lam_low = [low[f"lam_{i}"] for i in range(1, 5)]
    assert max(lam_low) == pytest.approx(4.0, abs=1e-6)
    assert high["kkt_violation"] <= 1e-5 and low["kkt_violation"] <= 1e-5
    assert high["c_upper_opt"] - high["c_upper_eq"] <= 0.01


def test_csv_deterministic_and_worker_independent(tmp_path):
    cfg = ExperimentConfig(kind="snr-sweep", snr_grid_db=(0.0, 10.0), **SMALL)
    a = experiments.format_csv(experiments.run_snr_sweep(cfg), cfg)
    b = experiments.format_csv(experiments.run_snr_sweep(cfg), cfg)
    c = experiments.format_csv(experiments.run_snr_sweep(cfg, workers=2), cfg)
    assert a == b == c
    header_cfg, rows = parse(a)
    assert header_cfg["kind"] == "snr-sweep"
    assert [float(r["snr_db"]) for r in rows] == [0.0, 10.0]


def test_cli_writes_csv(tmp_path):
    out = tmp_path / "snr.csv"
    conf = tmp_path / "cfg.json"
    conf.write_text(ExperimentConfig(**SMALL).to_json())
    rc = cli.main(["snr-sweep", "--config", str(conf), "--seed", "3", "--trials", "500",
                   "--snr-db=-5,5", "--out", str(out)])
    assert rc == 0
    cfg, rows = parse(out.read_text())
    assert cfg["seed"] == 3 and cfg["n_trials"] == 500
    assert len(rows) == 2
    first = out.read_bytes()
    assert cli.main(["snr-sweep", "--config", str(conf), "--seed", "3", "--trials", "500",
                     "--snr-db=-5,5", "--out", str(out), "--workers", "2"]) == 0
    assert out.read_bytes() == first


def test_cli_overrides():
    args = cli.build_parser().parse_args(["port-sweep", "--W", "2", "--N", "6", "--k-db", "3", "--ports", "2,4"])
    cfg = cli.config_from_args(args)
    assert cfg.geometry == PortGeometry(6, 6, 2.0, 2.0)
    assert cfg.coupling == CouplingSpec("separable-rician", 3.0)
    assert cfg.port_grid == (2, 4)
    assert cfg.fixed_count == 5


def test_cli_io_error(tmp_path):
    rc = cli.main(["allocate", "--N", "3", "--snr-db", "10", "--out", str(tmp_path / "missing" / "x.csv")])
    assert rc != 0


def test_cli_bad_config(tmp_path):
    conf = tmp_path / "bad.json"
    conf.write_text('{"n_trials": 0}')
    assert cli.main(["snr-sweep", "--config", str(conf)]) != 0


def test_validate_passes_and_negative_control(capsys):
    assert cli.main(["validate", "--trials", "50000"]) == 0
    assert "6/6 suites passed" in capsys.readouterr().out
    from dualfas.permanent import permanent_ryser

    results = run_validate(n_trials=20_000, ryser=lambda a: permanent_ryser(a) * (1 + 1e-9))
    by_name = {r.name: r.passed for r in results}
    assert not by_name["permanent"]
    assert all(v for k, v in by_name.items() if k != "permanent")


def test_cli_infeasible_k_factor(tmp_path, capsys):
    # unequal ends: the diagonal cannot carry all of a strong specular part
    conf = tmp_path / "rician.json"
    conf.write_text(ExperimentConfig(geometry=PortGeometry(2, 6, 1.0, 1.0),
                                     coupling=CouplingSpec("separable-rician", 40.0)).to_json())
    assert cli.main(["snr-sweep", "--config", str(conf), "--snr-db", "0", "--trials", "100"]) == 2
    assert "invalid experiment" in capsys.readouterr().err
