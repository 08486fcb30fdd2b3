"""Monte Carlo studies over disorder: quenched free energy estimates,
constrained/unconstrained agreement, concentration scaling, the
quenched-annealed gap versus the coupling strength, and depinning scans.

Replicas are independent jobs keyed by replica index; every estimate is a
pure function of (master seed, parameters), whatever the worker count.  The
large unconstrained sweeps run through a fused kernel (same arithmetic as the
reference engine, cross-validated in the test suite); the gaussian family and
all constrained geometries go through the reference engine directly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .disorder import DisorderSpec, Environment, child_seed, log_mgf
from .engine import StartMeasure, annealed_log_mgf, quenched_log_partition
from .walks import PathConstraint

try:
    from numba import njit

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*a, **k):
        def wrap(f):
            return f

        return wrap


_U = np.uint64
_GOLD = _U(0x9E3779B97F4A7C15)
_MUL1 = _U(0xBF58476D1CE4E5B9)
_MUL2 = _U(0x94D049BB133111EB)
_SQRT3 = math.sqrt(3.0)
_FAM_CODE = {"rademacher": 1, "uniform": 2}


@njit(cache=True)
def _mix_nb(z):
    z = z + _GOLD
    z = (z ^ (z >> _U(30))) * _MUL1
    z = (z ^ (z >> _U(27))) * _MUL2
    return z ^ (z >> _U(31))


@njit(cache=True)
def _kernel_logz(seed, time_offset, n, beta, u, fam, x0, has_end, end_x):
    """Unconstrained (light-cone) quenched sweep from a point start.

    Parity-packed column in linear domain with exact power-of-two rescaling;
    bit-identical disorder to Environment.values via the same hash chain.
    """
    wp = math.exp(beta)
    wm = math.exp(-beta)
    axis = math.exp(beta * u)
    smix = _mix_nb(_U(seed))
    arr = np.zeros(n + 1)
    new = np.zeros(n + 1)
    arr[0] = 1.0
    lo = x0
    m = 1
    logscale = 0.0
    for j in range(1, n + 1):
        col_key = _mix_nb(smix ^ _U(np.int64(time_offset + j)))
        nlo = lo - 1
        prev = 0.0
        mx = 0.0
        for k in range(m + 1):
            cur = arr[k] if k < m else 0.0
            s = 0.5 * (prev + cur)
            prev = cur
            x = nlo + 2 * k
            h = _mix_nb(col_key ^ _U(np.int64(x)))
            if fam == 1:
                w = wm if (h >> _U(63)) else wp
            else:
                uu = (float(h >> _U(11)) + 0.5) * (2.0**-53)
                w = math.exp(beta * (_SQRT3 * (2.0 * uu - 1.0)))
            v = s * w
            new[k] = v
            if v > mx:
                mx = v
        if nlo <= 0 and ((-nlo) & 1) == 0:
            k0 = (-nlo) // 2
            if k0 <= m:
                new[k0] *= axis
                if new[k0] > mx:
                    mx = new[k0]
        if mx == 0.0:
            return -math.inf
        if mx > 1.3407807929942597e154 or mx < 7.458340731200207e-155:
            _, e = math.frexp(mx)
            sc = math.ldexp(1.0, -e)
            for k in range(m + 1):
                new[k] *= sc
            logscale += e * 0.6931471805599453
        tmp = arr
        arr = new
        new = tmp
        lo = nlo
        m += 1
    if has_end:
        k = (end_x - lo) // 2
        if (end_x - lo) % 2 != 0 or k < 0 or k >= m or arr[k] <= 0.0:
            return -math.inf
        return math.log(arr[k]) + logscale
    total = 0.0
    for k in range(m):
        total += arr[k]
    return math.log(total) + logscale


def sample_log_partition(
    spec: DisorderSpec,
    seed: int,
    n: int,
    beta: float,
    u: float,
    x0: int = 0,
    end_point: Optional[int] = None,
    time_offset: int = 0,
) -> float:
    """One quenched log partition value, unconstrained paths from height x0.

    Dispatches to the fused kernel for the two-point and bounded families and
    to the reference engine otherwise; both produce the identical disorder
    field, so the choice only affects speed.
    """
    fam = _FAM_CODE.get(spec.family, 0)
    if _HAVE_NUMBA and fam and beta != 0.0:
        return float(
            _kernel_logz(
                np.uint64(seed),
                np.int64(time_offset),
                np.int64(n),
                float(beta),
                float(u),
                np.int64(fam),
                np.int64(x0),
                end_point is not None,
                np.int64(end_point if end_point is not None else 0),
            )
        )
    env = Environment(spec, seed)
    if time_offset:
        env = env.shifted(time_offset, 0)
    c = (
        PathConstraint.free(n, start=x0)
        if end_point is None
        else PathConstraint(length=n, start_window=(x0, x0), end_point=end_point)
    )
    return quenched_log_partition(env, beta, u, c, StartMeasure.delta(x0))


def _batch(spec, seeds, n, beta, u, x0, end_point, time_offset):
    return [
        sample_log_partition(spec, s, n, beta, u, x0, end_point, time_offset)
        for s in seeds
    ]


def _logz_samples(
    spec: DisorderSpec,
    master_seed: int,
    n: int,
    beta: float,
    u: float,
    samples: int,
    n_jobs: int = 2,
    x0: int = 0,
    end_point: Optional[int] = None,
    time_offset: int = 0,
) -> np.ndarray:
    seeds = [child_seed(master_seed, k) for k in range(samples)]
    if n_jobs <= 1 or samples < 4:
        vals = _batch(spec, seeds, n, beta, u, x0, end_point, time_offset)
        return np.asarray(vals)
    chunks = np.array_split(np.asarray(seeds, dtype=np.uint64), min(n_jobs * 4, samples))
    out = Parallel(n_jobs=n_jobs)(
        delayed(_batch)(spec, list(map(int, ch)), n, beta, u, x0, end_point, time_offset)
        for ch in chunks
    )
    return np.asarray([v for ch in out for v in ch])


def _seed_digest(master_seed: int, samples: int) -> str:
    h = hashlib.sha256()
    for k in range(samples):
        h.update(child_seed(master_seed, k).to_bytes(8, "little"))
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    samples: int
    seeds_digest: str

    @staticmethod
    def from_values(values: np.ndarray, master_seed: int) -> "McEstimate":
        se = float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
        return McEstimate(
            mean=float(values.mean()),
            stderr=se,
            samples=len(values),
            seeds_digest=_seed_digest(master_seed, len(values)),
        )


def quenched_free_energy(
    spec: DisorderSpec,
    beta: float,
    u: float,
    n: int,
    samples: int,
    seed: int,
    n_jobs: int = 2,
) -> McEstimate:
    """Mean of (1/n) log Z over independent environments, paths from 0."""
    if n % 2:
        raise ValueError("n must be even")
    vals = _logz_samples(spec, seed, n, beta, u, samples, n_jobs) / n
    return McEstimate.from_values(vals, seed)


def annealed_reference(spec: DisorderSpec, beta: float, u: float, n: int) -> float:
    """Exact finite-n annealed free energy density (no sampling)."""
    pin = annealed_log_mgf(beta * u, PathConstraint.free(n), StartMeasure.delta(0))
    return log_mgf(spec, beta) + pin / n


@dataclass
class ConstrainedGapReport:
    n_list: Tuple[int, ...]
    gap_per_site: Dict[int, float]  # E (1/n) log Z_n - (1/2n) E log Z_2n(0,0)
    gap_stderr: Dict[int, float]
    endpoint_ineq_ok: bool  # E log Z_n(0,x) <= 1/2 E log Z_2n(0,0) + 3 SE
    pathwise_superadditive_ok: bool  # per-sample concatenation bound, x = 0


def constrained_gap_check(
    spec: DisorderSpec,
    beta: float,
    u: float,
    n_list: Sequence[int],
    samples: int,
    seed: int,
    xs: Sequence[int] = (0, 2, 8),
    n_jobs: int = 2,
) -> ConstrainedGapReport:
    """Agreement of the free and end-pinned models at matched sizes."""
    gaps: Dict[int, float] = {}
    errs: Dict[int, float] = {}
    ineq_ok = True
    pathwise_ok = True
    for n in n_list:
        if n % 2:
            raise ValueError("each n must be even")
        free = _logz_samples(spec, seed, n, beta, u, samples, n_jobs)
        pinned2 = _logz_samples(spec, seed, 2 * n, beta, u, samples, n_jobs, end_point=0)
        g = free / n - pinned2 / (2 * n)
        gaps[n] = float(g.mean())
        errs[n] = float(g.std(ddof=1) / math.sqrt(samples))
        half = pinned2.mean() / 2
        half_se = pinned2.std(ddof=1) / math.sqrt(samples) / 2
        for x in xs:
            if (x - n) % 2:
                continue
            ex = _logz_samples(spec, seed, n, beta, u, samples, n_jobs, end_point=x)
            se = math.hypot(float(ex.std(ddof=1) / math.sqrt(samples)), float(half_se))
            if ex.mean() > half + 3 * se:
                ineq_ok = False
        # pathwise concatenation through x = 0 on shared environments
        left = _logz_samples(spec, seed, n, beta, u, samples, n_jobs, end_point=0)
        right = _logz_samples(
            spec, seed, n, beta, u, samples, n_jobs, x0=0, end_point=0, time_offset=n
        )
        if np.any(pinned2 < left + right - 1e-9):
            pathwise_ok = False
    return ConstrainedGapReport(
        n_list=tuple(n_list),
        gap_per_site=gaps,
        gap_stderr=errs,
        endpoint_ineq_ok=ineq_ok,
        pathwise_superadditive_ok=pathwise_ok,
    )


@dataclass
class ConcentrationReport:
    n_list: Tuple[int, ...]
    variances: Dict[int, float]  # Var[(1/n) log Z_n]
    tail_fractions: Dict[float, Dict[int, float]]  # t -> n -> P(|dev| >= t)
    passed: bool  # variance at the largest n at most half that at the smallest


def concentration_scan(
    spec: DisorderSpec,
    beta: float,
    u: float,
    n_list: Sequence[int],
    samples: int,
    seed: int,
    ts: Sequence[float] = (0.005, 0.01),
    n_jobs: int = 2,
) -> ConcentrationReport:
    variances: Dict[int, float] = {}
    tails: Dict[float, Dict[int, float]] = {float(t): {} for t in ts}
    for n in n_list:
        vals = _logz_samples(spec, seed, n, beta, u, samples, n_jobs) / n
        variances[n] = float(vals.var(ddof=1))
        dev = np.abs(vals - vals.mean())
        for t in ts:
            tails[float(t)][n] = float(np.mean(dev >= t))
    ns = sorted(n_list)
    passed = variances[ns[-1]] <= 0.5 * variances[ns[0]]
    return ConcentrationReport(
        n_list=tuple(n_list), variances=variances, tail_fractions=tails, passed=passed
    )


@dataclass
class GapScanReport:
    betas: Tuple[float, ...]
    n: int
    delta: Dict[float, float]  # Lambda(beta) - quenched estimate
    delta_stderr: Dict[float, float]
    quenched: Dict[float, McEstimate]
    annealed: Dict[float, float]
    positive_at_3se: Dict[float, bool]
    slope: float
    slope_ci95: float


def gap_scan(
    spec: DisorderSpec,
    beta_list: Sequence[float],
    n: int,
    samples: int,
    seed: int,
    n_jobs: int = 2,
) -> GapScanReport:
    """Quenched-annealed free energy gap at u = 0 across couplings.

    The log-log regression slope of the gap against beta is reported with a
    weighted-least-squares 95% half-width; the quartic small-beta law is only
    a desk-scale proxy here, so wide windows are expected.
    """
    delta: Dict[float, float] = {}
    derr: Dict[float, float] = {}
    ests: Dict[float, McEstimate] = {}
    ann: Dict[float, float] = {}
    pos: Dict[float, bool] = {}
    for b in beta_list:
        est = quenched_free_energy(spec, b, 0.0, n, samples, seed, n_jobs)
        lam = log_mgf(spec, b)
        ests[b] = est
        ann[b] = lam  # exact finite-n annealed density at u = 0
        delta[b] = lam - est.mean
        derr[b] = est.stderr
        pos[b] = delta[b] > 3 * est.stderr
    xs = np.log(np.asarray(beta_list, dtype=float))
    usable = [b for b in beta_list if delta[b] > 0]
    slope, ci = math.nan, math.nan
    if len(usable) >= 2:
        y = np.log([delta[b] for b in usable])
        x = np.log(usable)
        w = np.array([(delta[b] / max(derr[b], 1e-300)) ** 2 for b in usable])
        a = np.vstack([x, np.ones_like(x)]).T
        aw = a * w[:, None]
        cov = np.linalg.inv(a.T @ aw)
        coef = cov @ (aw.T @ y)
        slope = float(coef[0])
        ci = float(1.96 * math.sqrt(cov[0, 0]))
    return GapScanReport(
        betas=tuple(beta_list),
        n=n,
        delta=delta,
        delta_stderr=derr,
        quenched=ests,
        annealed=ann,
        positive_at_3se=pos,
        slope=slope,
        slope_ci95=ci,
    )


@dataclass
class CriticalScanReport:
    beta: float
    n: int
    u_grid: Tuple[float, ...]
    diff: Dict[float, float]  # f_hat(beta, u) - f_hat(beta, 0)
    diff_stderr: Dict[float, float]
    u_c_hat: Optional[float]  # least grid u with diff > 3 SE
    pathwise_monotone_ok: bool
    cert_u: Optional[float]  # least u whose coarse certificate succeeds


def critical_scan(
    spec: DisorderSpec,
    beta: float,
    u_grid: Sequence[float],
    n: int,
    samples: int,
    seed: int,
    n_jobs: int = 2,
    certificates: bool = False,
    cert_seeds: int = 3,
    cert_horizon: int = 20,
    cert_k0: int = 4,
    cert_n_cap: int = 512,
) -> CriticalScanReport:
    """Depinning scan: difference of quenched estimates against u = 0.

    Replicas share environments across the grid, so the differences are paired
    and the pathwise monotonicity of log Z in u is checked sample by sample.
    """
    if sorted(u_grid) != list(u_grid) or 0.0 not in u_grid:
        raise ValueError("u_grid must be increasing and include 0")
    per_u = {
        float(u): _logz_samples(spec, seed, n, beta, u, samples, n_jobs) / n
        for u in u_grid
    }
    mono = True
    us = list(u_grid)
    for a, b in zip(us[:-1], us[1:]):
        if np.any(per_u[float(b)] < per_u[float(a)] - 1e-10):
            mono = False
    base = per_u[0.0]
    diff: Dict[float, float] = {}
    derr: Dict[float, float] = {}
    u_c = None
    for u in us:
        d = per_u[float(u)] - base
        diff[float(u)] = float(d.mean())
        derr[float(u)] = float(d.std(ddof=1) / math.sqrt(samples)) if u != 0.0 else 0.0
        if u_c is None and u > 0 and diff[float(u)] > 3 * derr[float(u)]:
            u_c = float(u)
    cert_u = None
    if certificates:
        from .coarse import build_geometry, classify_lattice, good_path
        from .pinning import pinning_free_energy

        for u in us:
            if u <= 0 or beta * u <= 0:
                continue
            block = cert_k0 / pinning_free_energy(beta * u)
            if block > cert_n_cap:
                continue
            geom = build_geometry(beta, u, 0.3, spec, k0=cert_k0, horizon=cert_horizon)
            hits = 0
            for k in range(cert_seeds):
                env = Environment(spec, child_seed(seed ^ 0xC0FFEE, k))
                if good_path(classify_lattice(env, geom)) is not None:
                    hits += 1
            if 2 * hits > cert_seeds:
                cert_u = float(u)
                break
    return CriticalScanReport(
        beta=beta,
        n=n,
        u_grid=tuple(float(u) for u in u_grid),
        diff=diff,
        diff_stderr=derr,
        u_c_hat=u_c,
        pathwise_monotone_ok=mono,
        cert_u=cert_u,
    )
