import math

import numpy as np
import pytest

from dprelab.disorder import DisorderSpec
from dprelab.engine import StartMeasure, annealed_log_mgf
from dprelab.pinning import (
    FreeEnergyBracket,
    confinement_ratio_min,
    corridor_pass_probs,
    correlation_length,
    free_energy_bracket,
    free_energy_renewal,
    growth_check,
    k4_hat_estimates,
    normal_tail,
    overlap_moment_check,
    overlap_moment_scan,
    pair_mgf_per_block,
    pinning_constants,
    window_halfwidth,
    window_lower_bound_check,
)
from dprelab.walks import PathConstraint

GAUSS = DisorderSpec("gaussian")


def test_renewal_value_and_limits():
    # closed form gives 0.0841017...; the commonly quoted 0.08411 agrees to 1e-4
    assert free_energy_renewal(0.5) == pytest.approx(0.0841017171, abs=1e-9)
    assert free_energy_renewal(0.5) == pytest.approx(0.084110, abs=1e-4)
    # F/gamma^2 -> 1/2 as gamma -> 0
    assert free_energy_renewal(1e-4) / 1e-8 == pytest.approx(0.5, rel=1e-3)
    with pytest.raises(ValueError):
        free_energy_renewal(0.0)


def test_bracket_contains_oracle_and_zero_cases():
    b = free_energy_bracket(0.0, 64)
    assert b.upper == 0.0
    assert b.lower <= 0.0 <= b.upper
    bneg = free_energy_bracket(-0.5, 64)
    assert bneg.lower <= 0.0 <= bneg.upper
    b1 = free_energy_bracket(1.0, 1024)
    assert b1.contains(free_energy_renewal(1.0))


def test_bracket_monotone_nesting():
    for gamma in (0.3, 0.7):
        b1 = free_energy_bracket(gamma, 256)
        b2 = free_energy_bracket(gamma, 512)
        assert b2.lower >= b1.lower - 1e-9
        assert b2.upper <= b1.upper + 1e-9
        assert b2.lower <= b2.upper


def test_bracket_rejects_odd_n():
    with pytest.raises(ValueError):
        free_energy_bracket(0.5, 101)


def test_bracket_medium_size_brackets_oracle():
    b = free_energy_bracket(0.5, 1024)
    f = free_energy_renewal(0.5)
    assert b.contains(f)
    assert b.width < 0.01


def test_correlation_length():
    assert correlation_length(0.5) == pytest.approx(11.89, abs=0.01)
    with pytest.raises(ValueError):
        correlation_length(0.0)
    # F <= gamma since L_N <= N, so M >= 1/gamma
    for g in (0.3, 1.0, 2.0):
        assert correlation_length(g) >= 1.0 / g
    # M(gamma) <= 5 M(2 gamma) for small gamma
    for g in (0.05, 0.1):
        assert correlation_length(g) <= 5.0 * correlation_length(2.0 * g)


def test_k4_estimates_monotone_toward_half():
    est = k4_hat_estimates((0.1, 0.05, 0.02))
    vals = [est[0.1], est[0.05], est[0.02]]
    assert vals[0] < vals[1] < vals[2] < 0.5
    assert abs(vals[2] - 0.5) / 0.5 < 0.04


def test_normal_tail():
    # eps = 1: P(xi >= 1/4)
    assert normal_tail(1.0) == pytest.approx(0.401294, abs=1e-6)
    assert normal_tail(0.3) == pytest.approx(0.5 * math.erfc(1 / (4 * math.sqrt(0.3)) / math.sqrt(2)))


def test_growth_check_finite_and_stable():
    reports = {g: growth_check(g, 20) for g in (0.3, 0.5, 0.8)}
    maxima = {g: r.max_value for g, r in reports.items()}
    assert all(np.isfinite(v) for v in maxima.values())
    # doubling gamma within the grid does not blow up the per-j constant by 10x
    assert maxima[0.8] <= 10 * abs(maxima[0.3]) + 10
    # j = 1 consistency with the subadditive upper bound
    r = reports[0.5]
    b = free_energy_bracket(0.5, r.m + (r.m % 2))
    assert r.per_j[0] <= 0.5 + (r.m) * b.upper + 1e-6


def test_window_lower_bound_check_passes():
    rep = window_lower_bound_check(0.5, 0.3, 512)
    assert rep.all_pass
    # weakest-budget edge still passes
    rep2 = window_lower_bound_check(0.5, 0.999, 512)
    assert rep2.all_pass


def test_confinement_ratio_bounds():
    for n in (64, 256, 1024):
        r = confinement_ratio_min(n, 0.5)
        assert 0.05 < r <= 1.0
        # dominates the plain path probability of the same event
        w = window_halfwidth(n)
        worst_prob = min(
            math.exp(
                annealed_log_mgf(
                    0.0, PathConstraint.confined(n, x), StartMeasure.delta(x)
                )
            )
            for x in range(-w, w + 1)
        )
        assert r >= worst_prob - 1e-12


def test_corridor_pass_probs_positive():
    probs = corridor_pass_probs(64)
    assert set(probs) == {"forward", "up", "down"}
    for v in probs.values():
        assert 0.0 < v < 1.0
    assert probs["up"] == pytest.approx(probs["down"], abs=1e-12)


def test_pinning_constants_record():
    pc = pinning_constants(64, 0.5, 0.3)
    assert 0 < pc.eps0_hat <= 1
    assert pc.a_min == min(pc.a_forward, pc.a_up, pc.a_down)
    assert pc.xi_tail == normal_tail(0.3)


def test_overlap_moment_zero_beta():
    rep = overlap_moment_check(GAUSS, 0.0, 0.5, 100)
    assert rep.value == pytest.approx(0.0, abs=1e-12)
    assert rep.passed


def test_overlap_moment_monotone_in_r():
    vals = [overlap_moment_check(GAUSS, 0.2, 0.5, r).value for r in (100, 1000, 10000)]
    assert vals[0] < vals[1] < vals[2]


def test_overlap_moment_geometric_domination():
    rep = overlap_moment_check(GAUSS, 0.2, 0.5, 10000)
    assert rep.geometric_ok
    assert rep.geometric_margin >= 0.0


def test_overlap_moment_scan_and_k5():
    scan = overlap_moment_scan(GAUSS, 0.2, 0.5, 2000)
    assert scan.r_pass > 0
    assert np.all(np.diff(scan.values[np.isfinite(scan.values)]) >= -1e-12)
    assert scan.k5_hat == pytest.approx(scan.r_pass * 0.2**4)
    # the scan is consistent with the single check at its crossover
    at_pass = overlap_moment_check(GAUSS, 0.2, 0.5, scan.r_pass)
    assert at_pass.passed
    if scan.r_pass < 2000:
        beyond = overlap_moment_check(GAUSS, 0.2, 0.5, scan.r_pass + 1)
        assert not beyond.passed


def test_pair_mgf_per_block():
    v = pair_mgf_per_block(0.25, 12)
    assert v > 1.0
    assert v == pytest.approx(
        math.exp(0.5)
        * math.exp(annealed_log_mgf(0.5, PathConstraint.free(12), StartMeasure.delta(0))),
        rel=1e-12,
    )
