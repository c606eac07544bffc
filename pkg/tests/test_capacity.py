import math

import numpy as np
import pytest

from dualfas import capacity as cap
from dualfas.channel import (
    CouplingModel,
    EigenBasis,
    PortGeometry,
    build_correlation,
    build_coupling,
    build_eigenbasis,
)
from dualfas.numerics import RngStream, logdet2_hpd_batch, sample_cn01
from dualfas.permanent import extended_permanent, extended_permanent_subsets
from dualfas.validate import random_scattered_model

# integral of exp(-t) log2(1 + t) over [0, inf) = e E1(1) / ln 2 (scipy quad and exp1 agree to 1e-15)
SCALAR_RHO1 = 0.8603473822708859
# E log2(1 + rho * max of 4 unit exponentials), binomial alternating-sign form, quad cross-checked
MAX4_RHO1 = 1.528401310422759
MAX4_RHO10 = 4.242666192093643


def scalar_model(omega=1.0):
    return CouplingModel(np.zeros((1, 1)), np.sqrt([[omega]]))


def within(est, ref, k=3.0):
    return abs(est.mean_bits - ref) <= k * est.std_error


def test_snr_spec():
    s = cap.SnrSpec.from_db(10.0, 4)
    assert s.rho == pytest.approx(10.0)
    assert s.gamma * 4 == s.rho


def test_allocation_validation():
    with pytest.raises(ValueError):
        cap.PowerAllocation(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        cap.PowerAllocation(np.array([3.0, -1.0]))
    assert cap.PowerAllocation.equal(3).lam.tolist() == [1.0, 1.0, 1.0]


def test_scalar_full_capacity_oracle():
    est = cap.mc_full_capacity(scalar_model(), cap.PowerAllocation.equal(1), cap.SnrSpec(1.0, 1), 200_000,
                               RngStream(1))
    assert est.n_trials == 200_000
    assert within(est, SCALAR_RHO1)


def test_zero_snr_gives_zero():
    model = build_coupling(EigenBasis.identity(3, 2), "separable-rayleigh")
    est = cap.mc_full_capacity(model, cap.PowerAllocation.equal(3), cap.SnrSpec(0.0, 3), 1000, RngStream(2))
    assert est.mean_bits == 0.0 and est.std_error == 0.0
    sel = cap.mc_selection_capacity(model, EigenBasis.identity(3, 2), cap.SnrSpec(0.0, 3), 1000, RngStream(2))
    assert sel.mean_bits == 0.0


def test_deterministic_channel():
    d = np.zeros((3, 3), complex)
    d[0, 1], d[1, 0], d[2, 2] = 1.0, 2.0j, 0.5
    model = CouplingModel(d, np.zeros((3, 3)))
    lam = np.array([0.5, 1.5, 1.0])
    snr = cap.SnrSpec(6.0, 3)
    est = cap.mc_full_capacity(model, cap.PowerAllocation(lam), snr, 500, RngStream(3))
    ref = logdet2_hpd_batch(np.eye(3) + snr.gamma * (d * lam) @ d.conj().T)
    assert est.mean_bits == pytest.approx(float(ref), rel=1e-12)
    assert est.std_error == 0.0


def test_selection_single_pair_equals_full():
    model = scalar_model(1.3)
    basis = EigenBasis.identity(1, 1)
    snr = cap.SnrSpec(5.0, 1)
    a = cap.mc_selection_capacity(model, basis, snr, 5000, RngStream(4))
    b = cap.mc_full_capacity(model, cap.PowerAllocation.equal(1), snr, 5000, RngStream(4))
    assert a.mean_bits == pytest.approx(b.mean_bits, rel=1e-12)


@pytest.mark.parametrize("rho,ref", [(1.0, MAX4_RHO1), (10.0, MAX4_RHO10)])
def test_selection_iid_2x2_order_statistic(rho, ref):
    basis = EigenBasis.identity(2, 2)
    model = build_coupling(basis, "separable-rayleigh")
    est = cap.mc_selection_capacity(model, basis, cap.SnrSpec(rho, 2), 200_000, RngStream(5))
    assert within(est, ref)


def test_upper_bound_scalar_and_zero():
    model = scalar_model()
    assert cap.upper_bound(model, cap.PowerAllocation.equal(1), cap.SnrSpec(7.0, 1)) == pytest.approx(3.0)
    m4 = build_coupling(EigenBasis.identity(4, 4), "separable-rayleigh")
    assert cap.upper_bound(m4, cap.PowerAllocation.equal(4), cap.SnrSpec(0.0, 4)) == 0.0


def test_upper_bound_rank_one_subset_oracle():
    basis = build_eigenbasis(build_correlation(PortGeometry(4, 4, 1.0, 1.0)))
    model = build_coupling(basis, "separable-rayleigh")
    snr = cap.SnrSpec(10.0, 4)
    ref = math.log2(extended_permanent_subsets(snr.gamma * model.Omega))
    assert cap.upper_bound(model, cap.PowerAllocation.equal(4), snr) == pytest.approx(ref, rel=1e-12)


def test_det_expectation_trivial():
    model = build_coupling(EigenBasis.identity(2, 3), "separable-rayleigh")
    est = cap.mc_det_expectation(model, cap.PowerAllocation.equal(2), cap.SnrSpec(0.0, 2), 100, RngStream(6))
    assert est.mean_bits == 1.0 and est.std_error == 0.0
    est = cap.mc_det_expectation(scalar_model(), cap.PowerAllocation.equal(1), cap.SnrSpec(0.8, 1), 100_000,
                                 RngStream(6))
    assert within(est, 1.8)


def test_det_expectation_equals_extended_permanent_3x3():
    g = np.random.default_rng(12)
    model = random_scattered_model(g, 3, 3)
    lam = np.array([0.6, 1.5, 0.9])
    snr = cap.SnrSpec(1.5, 3)
    est = cap.mc_det_expectation(model, cap.PowerAllocation(lam), snr, 1_000_000, RngStream(7))
    assert within(est, extended_permanent(snr.gamma * model.Omega * lam))


def test_low_snr_asymptote():
    g = np.random.default_rng(8)
    om = g.random((3, 4)) * 2
    model = CouplingModel(np.zeros((3, 4)), np.sqrt(om))
    snr = cap.SnrSpec(0.4, 4)
    lam = np.zeros(4)
    lam[2] = 4.0
    s = om[:, 2].sum()
    assert cap.asymptotic_low_snr(model, cap.PowerAllocation(lam), snr) == pytest.approx(snr.gamma * 4 * s / math.log(2))
    ones = CouplingModel(np.zeros((3, 4)), np.ones((3, 4)))
    assert cap.asymptotic_low_snr(ones, cap.PowerAllocation.equal(4), snr) == pytest.approx(snr.gamma * 12 / math.log(2))
    tiny = cap.SnrSpec(1e-4, 4)
    alloc = cap.PowerAllocation.equal(4)
    lo, ub = cap.asymptotic_low_snr(model, alloc, tiny), cap.upper_bound(model, alloc, tiny)
    assert abs(lo - ub) / ub <= 1e-3


def test_high_snr_equal_power():
    assert cap.asymptotic_high_snr_optimal(4).lam.tolist() == [1.0] * 4
    assert cap.asymptotic_high_snr_optimal(1).lam.tolist() == [1.0]
    g = np.random.default_rng(9)
    model = random_scattered_model(g, 5, 4)
    snr = cap.SnrSpec(1e4, 4)
    best = cap.upper_bound(model, cap.asymptotic_high_snr_optimal(4), snr)
    for _ in range(100):
        lam = g.dirichlet(np.ones(4)) * 4
        assert cap.upper_bound(model, cap.PowerAllocation(lam), snr) <= best


@pytest.mark.parametrize("seed", range(4))
def test_jensen_dominance(seed):
    g = np.random.default_rng(100 + seed)
    model = random_scattered_model(g, int(g.integers(1, 5)), int(g.integers(1, 5)), with_mean=seed % 2 == 1)
    lam = g.dirichlet(np.ones(model.Nt)) * model.Nt
    for snr_db in (-10, 10, 30):
        snr = cap.SnrSpec.from_db(snr_db, model.Nt)
        est = cap.mc_full_capacity(model, cap.PowerAllocation(lam), snr, 20_000, RngStream(seed))
        assert est.mean_bits <= cap.upper_bound(model, cap.PowerAllocation(lam), snr) + 3 * est.std_error


def test_unitary_invariance_trial_by_trial():
    basis = build_eigenbasis(build_correlation(PortGeometry(5, 4, 1.2, 0.8)))
    model = build_coupling(basis, "non-separable-rayleigh", rng=RngStream(3))
    lam = np.array([2.0, 1.5, 1.0, 0.5, 0.0])
    gamma = 3.0
    ht = model.D + model.M * sample_cn01(RngStream(10), 4, 5, batch=200)
    h = basis.Ur @ ht @ basis.Ut.conj().T
    q = (basis.Ut * lam) @ basis.Ut.conj().T
    port = logdet2_hpd_batch(np.eye(4) + gamma * h @ q @ np.swapaxes(h.conj(), 1, 2))
    eig = cap.full_capacity_samples(ht, lam, gamma)
    assert np.allclose(port, eig, atol=1e-9, rtol=0)


def test_monotone_in_snr_fixed_seed():
    basis = build_eigenbasis(build_correlation(PortGeometry(4, 4, 1.0, 1.0)))
    model = build_coupling(basis, "separable-rayleigh")
    alloc = cap.PowerAllocation.equal(4)
    prev = [-1.0, -1.0, -1.0]
    for snr_db in range(-10, 31, 5):
        snr = cap.SnrSpec.from_db(snr_db, 4)
        vals = [
            cap.mc_full_capacity(model, alloc, snr, 4000, RngStream(1)).mean_bits,
            cap.mc_selection_capacity(model, basis, snr, 4000, RngStream(1)).mean_bits,
            cap.upper_bound(model, alloc, snr),
        ]
        assert all(v >= p for v, p in zip(vals, prev))
        prev = vals


def test_block_partition_independent_of_trial_split():
    model = scalar_model()
    a = cap.mc_full_capacity(model, cap.PowerAllocation.equal(1), cap.SnrSpec(2.0, 1), cap.BLOCK_TRIALS * 2 + 5,
                             RngStream(3))
    b = cap.mc_full_capacity(model, cap.PowerAllocation.equal(1), cap.SnrSpec(2.0, 1), cap.BLOCK_TRIALS * 2 + 5,
                             RngStream(3))
    assert a == b
