import math

import numpy as np
import pytest

from dprelab.disorder import DisorderSpec, Environment, child_seed
from dprelab.engine import StartMeasure, annealed_log_mgf, quenched_log_partition
from dprelab.mc import (
    McEstimate,
    annealed_reference,
    concentration_scan,
    constrained_gap_check,
    critical_scan,
    gap_scan,
    quenched_free_energy,
    sample_log_partition,
)
from dprelab.walks import PathConstraint

RAD = DisorderSpec("rademacher")
UNI = DisorderSpec("uniform")
GAUSS = DisorderSpec("gaussian")


def engine_logz(spec, seed, n, beta, u, x0=0, end_point=None, time_offset=0):
    env = Environment(spec, seed)
    if time_offset:
        env = env.shifted(time_offset, 0)
    c = (
        PathConstraint.free(n, start=x0)
        if end_point is None
        else PathConstraint(length=n, start_window=(x0, x0), end_point=end_point)
    )
    return quenched_log_partition(env, beta, u, c, StartMeasure.delta(x0))


def test_fast_kernel_agrees_with_reference_engine():
    rng = np.random.default_rng(1)
    for spec in (RAD, UNI):
        for trial in range(8):
            n = int(rng.integers(6, 60)) * 2
            beta = float(rng.uniform(0.1, 1.2))
            u = float(rng.uniform(-0.5, 1.5))
            x0 = int(rng.integers(-3, 4))
            end_point = None
            if trial % 3 == 0:
                end_point = x0 + (n % 2)
            off = int(rng.integers(0, 50)) if trial % 2 else 0
            seed = int(rng.integers(2**62))
            fast = sample_log_partition(spec, seed, n, beta, u, x0, end_point, off)
            ref = engine_logz(spec, seed, n, beta, u, x0, end_point, off)
            assert fast == pytest.approx(ref, abs=1e-9)


def test_quenched_free_energy_beta_zero():
    est = quenched_free_energy(GAUSS, 0.0, 0.7, 64, 8, seed=5, n_jobs=1)
    assert est.mean == pytest.approx(0.0, abs=1e-12)
    assert est.stderr == pytest.approx(0.0, abs=1e-13)


def test_estimates_reproducible_and_jobcount_independent():
    a = quenched_free_energy(RAD, 0.6, 0.0, 128, 12, seed=42, n_jobs=1)
    b = quenched_free_energy(RAD, 0.6, 0.0, 128, 12, seed=42, n_jobs=2)
    assert a.mean == b.mean
    assert a.stderr == b.stderr
    assert a.seeds_digest == b.seeds_digest
    c = quenched_free_energy(RAD, 0.6, 0.0, 128, 12, seed=43, n_jobs=1)
    assert c.mean != a.mean


def test_jensen_inequality_small_grid():
    for beta, u in ((0.3, 0.0), (0.3, 0.5), (0.6, 0.5)):
        est = quenched_free_energy(RAD, beta, u, 256, 60, seed=9, n_jobs=2)
        ann = annealed_reference(RAD, beta, u, 256)
        assert est.mean <= ann + 3 * est.stderr


def test_annealed_reference_values():
    assert annealed_reference(GAUSS, 0.0, 1.0, 64) == pytest.approx(
        annealed_log_mgf(0.0, PathConstraint.free(64), StartMeasure.delta(0)) / 64
    )
    # u = 0: reference reduces to the disorder cumulant
    assert annealed_reference(GAUSS, 0.5, 0.0, 128) == pytest.approx(0.125)


def test_constrained_gap_check():
    rep = constrained_gap_check(RAD, 0.5, 0.4, (64, 256), 40, seed=11, n_jobs=2)
    assert rep.pathwise_superadditive_ok
    assert rep.endpoint_ineq_ok
    for n in (64, 256):
        assert rep.gap_per_site[n] > 0
    assert rep.gap_per_site[256] < rep.gap_per_site[64]


def test_concentration_scan():
    rep = concentration_scan(RAD, 0.5, 0.0, (64, 1024), 60, seed=21, n_jobs=2)
    assert rep.passed
    assert rep.variances[1024] <= 0.5 * rep.variances[64]
    for t, per_n in rep.tail_fractions.items():
        assert per_n[1024] <= per_n[64] + 1e-12
    # no disorder, no variance
    rep0 = concentration_scan(GAUSS, 0.0, 0.0, (16, 256), 5, seed=1, n_jobs=1)
    assert all(v == 0.0 for v in rep0.variances.values())


def test_gap_scan_structure_and_positivity():
    rep = gap_scan(RAD, (0.8, 1.0, 1.2), 1024, 50, seed=31, n_jobs=2)
    for b in (0.8, 1.0, 1.2):
        assert rep.delta[b] > 0
        assert rep.positive_at_3se[b]
    assert rep.delta[0.8] < rep.delta[1.2]
    assert np.isfinite(rep.slope)
    assert rep.slope_ci95 >= 0


def test_critical_scan():
    rep = critical_scan(RAD, 0.5, (0.0, 0.4, 1.0, 2.0), 256, 40, seed=41, n_jobs=2)
    assert rep.pathwise_monotone_ok
    assert rep.diff[2.0] > 0
    assert rep.u_c_hat is not None and rep.u_c_hat <= 2.0
    # negative pinning never helps, pathwise
    rep2 = critical_scan(RAD, 0.5, (-0.5, 0.0, 0.5), 128, 20, seed=7, n_jobs=1)
    assert rep2.diff[-0.5] <= 0
    with pytest.raises(ValueError):
        critical_scan(RAD, 0.5, (0.5, 0.0), 64, 5, seed=1)


def test_critical_scan_with_certificates():
    rep = critical_scan(
        RAD,
        0.25,
        (0.0, 2.0),
        128,
        10,
        seed=3,
        n_jobs=1,
        certificates=True,
        cert_seeds=3,
        cert_horizon=8,
    )
    assert rep.cert_u == 2.0


def test_mcestimate_fields():
    vals = np.array([1.0, 2.0, 3.0, 4.0])
    est = McEstimate.from_values(vals, master_seed=77)
    assert est.mean == 2.5
    assert est.samples == 4
    assert est.stderr == pytest.approx(vals.std(ddof=1) / 2)
    assert len(est.seeds_digest) == 16
