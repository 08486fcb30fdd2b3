import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dprelab.disorder import (
    DisorderSpec,
    Environment,
    PatchedEnvironment,
    child_seed,
    log_mgf,
    mix64,
    overlap_coupling,
)

ALL = [DisorderSpec(f) for f in ("gaussian", "rademacher", "uniform")]


def test_log_mgf_closed_forms():
    g = DisorderSpec("gaussian")
    assert log_mgf(g, 0.5) == pytest.approx(0.125, abs=1e-15)
    for spec in ALL:
        assert log_mgf(spec, 0.0) == 0.0
    r = DisorderSpec("rademacher")
    assert log_mgf(r, 1.0) == pytest.approx(math.log(math.cosh(1.0)), rel=1e-14)
    u = DisorderSpec("uniform")
    x = math.sqrt(3.0) * 0.7
    assert log_mgf(u, 0.7) == pytest.approx(math.log(math.sinh(x) / x), rel=1e-12)
    # series branch agrees with the direct formula below the crossover
    for x in (0.02, 0.049):
        assert log_mgf(u, x / math.sqrt(3)) == pytest.approx(
            math.log(math.sinh(x) / x), rel=1e-13
        )


def test_log_mgf_match_monte_carlo():
    # three-standard-error agreement of each closed form with direct sampling
    rng = np.random.default_rng(2024)
    n = 10**7
    samples = {
        "gaussian": rng.standard_normal(n),
        "rademacher": rng.choice([-1.0, 1.0], size=n),
        "uniform": rng.uniform(-math.sqrt(3), math.sqrt(3), size=n),
    }
    for spec in ALL:
        v = samples[spec.family]
        for beta in (0.25, 0.5, 1.0):
            w = np.exp(beta * v)
            est = w.mean()
            se = w.std(ddof=1) / math.sqrt(n)
            assert abs(est - math.exp(log_mgf(spec, beta))) < 3 * se


def test_overlap_coupling():
    assert overlap_coupling(DisorderSpec("gaussian"), 0.3) == pytest.approx(0.09, abs=1e-15)
    for spec in ALL:
        assert overlap_coupling(spec, 0.0) == 0.0
        assert overlap_coupling(spec, 0.4) >= 0.0
    # Phi ~ beta^2 for small beta in every family
    assert overlap_coupling(DisorderSpec("rademacher"), 0.1) == pytest.approx(0.01, rel=0.05)


def test_env_deterministic_and_family_values():
    for spec in ALL:
        env = Environment(spec, seed=42)
        a = env.value(3, -7)
        b = env.value(3, -7)
        assert a == b
        cols = env.values(3, np.arange(-10, 11))
        assert cols[3] == env.value(3, -7)
    r = Environment(DisorderSpec("rademacher"), seed=9)
    vals = r.values(1, np.arange(100))
    assert set(np.unique(vals)) <= {-1.0, 1.0}
    u = Environment(DisorderSpec("uniform"), seed=9)
    vu = u.values(1, np.arange(1000))
    assert vu.min() >= -math.sqrt(3) and vu.max() <= math.sqrt(3)


def test_shift_identity_exact():
    env = Environment(DisorderSpec("gaussian"), seed=77)
    sh = env.shifted(5, -3)
    for i in (1, 2, 9):
        xs = np.arange(-6, 7)
        assert np.array_equal(sh.values(i, xs), env.values(i + 5, xs - 3))
    # shifting by (N, 0) realizes the time shift used in concatenation bounds
    sh2 = env.shifted(100, 0)
    assert sh2.value(4, 2) == env.value(104, 2)


@given(
    st.integers(min_value=0, max_value=2**63),
    st.integers(min_value=-50, max_value=50),
    st.integers(min_value=-50, max_value=50),
)
def test_shift_identity_property(seed, n, y):
    env = Environment(DisorderSpec("uniform"), seed=seed)
    assert env.shifted(n, y).value(max(1, 1 - n), 5) == env.value(max(1, 1 - n) + n, 5 + y)


def test_mean_and_variance_over_sites():
    for spec in ALL:
        env = Environment(spec, seed=31337)
        vals = np.concatenate([env.values(i, np.arange(-5000, 5000)) for i in range(1, 101)])
        assert len(vals) == 10**6
        assert abs(vals.mean()) < 0.01
        assert abs(vals.var() - 1.0) < 0.01


def test_query_order_independence():
    env = Environment(DisorderSpec("gaussian"), seed=5)
    forward = [env.value(1, x) for x in range(20)]
    backward = [env.value(1, x) for x in reversed(range(20))]
    assert forward == backward[::-1]


def test_time_index_must_be_positive():
    env = Environment(DisorderSpec("gaussian"), seed=5)
    with pytest.raises(ValueError):
        env.value(0, 0)


def test_child_seed_mixing():
    s = [child_seed(999, k) for k in range(100)]
    assert len(set(s)) == 100
    assert child_seed(999, 3) == child_seed(999, 3)
    assert child_seed(999, 3) != child_seed(998, 3)
    assert mix64(0) != 0


def test_boltzmann_matches_exp_of_values():
    for spec in ALL:
        env = Environment(spec, seed=11)
        xs = np.arange(-20, 21)
        w = env.boltzmann(7, xs, 0.6)
        assert np.allclose(w, np.exp(0.6 * env.values(7, xs)), rtol=1e-15, atol=0)


def test_patched_environment():
    env = Environment(DisorderSpec("gaussian"), seed=123)
    patched = PatchedEnvironment(env, {(2, 5): 99.0})
    assert patched.value(2, 5) == 99.0
    assert patched.value(2, 6) == env.value(2, 6)
    assert patched.value(3, 5) == env.value(3, 5)
    moved = patched.shifted(1, 1)
    assert moved.value(1, 4) == 99.0


def test_unknown_family_rejected():
    with pytest.raises(ValueError):
        DisorderSpec("cauchy")
