"""Coarse-grained half-lattice construction: block geometry, link partition
functions with inherited endpoint measures, inductive open/closed
classification, optimal and good paths, and quenched free-energy lower-bound
certificates (two-threshold pinning variant and single-threshold gap variant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .disorder import DisorderSpec, Environment, log_mgf
from .engine import (
    CorridorState,
    StartMeasure,
    corridor_advance,
    corridor_start,
    pair_constrained_second_moment,
    quenched_log_partition,
)
from .pinning import (
    confinement_ratio_min,
    corridor_pass_probs,
    normal_tail,
    overlap_moment_scan,
    pinning_free_energy,
)
from .walks import PathConstraint, iround

LINK_DIRECTIONS = ("up", "forward", "down")


@dataclass(frozen=True)
class CoarseGeometry:
    """Block geometry plus the open-site thresholds for one run.

    A coarse site (I, J), 0 <= J <= I, stands for the window of half-width
    ``window_hw`` around height J * sqrt_n at time I * n, with its block box
    spanning times [I n, (I+1) n] and heights J sqrt_n +- 2 sqrt_n.
    """

    n: int
    sqrt_n: int
    window_hw: int
    box_hw: int
    horizon: int
    beta: float
    u: float
    eps: float
    spec: DisorderSpec
    log_u_on: float
    log_u_off: float
    theta_on: float
    theta_off: float
    eps0_hat: float
    a_probs: Dict[str, float]
    f_pinning: float

    def window(self, j: int) -> Tuple[int, int]:
        c = j * self.sqrt_n
        return (c - self.window_hw, c + self.window_hw)

    def box(self, j: int) -> Tuple[int, int]:
        c = j * self.sqrt_n
        return (c - self.box_hw, c + self.box_hw)

    def block_constraint(self, j_from: int, j_to: int) -> PathConstraint:
        """One corridor block in absolute coordinates."""
        return PathConstraint(
            length=self.n,
            start_window=self.window(j_from),
            box=self.box(j_from),
            end_window=self.window(j_to),
        )

    def link_constraint(self, direction: str) -> PathConstraint:
        return PathConstraint.link(self.n, direction)


def _even_block_length(x: float) -> int:
    return max(4, 2 * iround(x / 2.0))


def build_geometry(
    beta: float,
    u: float,
    eps: float,
    spec: DisorderSpec,
    k0: int = 1,
    horizon: int = 30,
    n_override: Optional[int] = None,
    mem_cap_bytes: int = 1 << 31,
) -> CoarseGeometry:
    """Geometry with block length k0 * correlation_length(beta u) and the
    two-threshold open-site rule.

    U_on = Theta_on exp((Lambda + (1-eps) F) n) with Theta_on built from the
    exact finite-n confinement ratio and the normal tail; U_off = Theta_off
    exp(Lambda n) with Theta_off = (1/4) min(A_up, A_forward, A_down,
    4 Theta_on).  ``n_override`` fixes n directly (required when beta*u <= 0,
    e.g. for deterministic baselines and the u = 0 gap variant).
    """
    gamma = beta * u
    if n_override is not None:
        n = _even_block_length(n_override)
        f = pinning_free_energy(gamma) if gamma > 0 else 0.0
    else:
        if gamma <= 0:
            raise ValueError("beta * u must be positive unless n_override is given")
        f = pinning_free_energy(gamma)
        n = _even_block_length(k0 / f)
    sqrt_n = iround(math.sqrt(n))
    box_hw = 2 * sqrt_n
    est = (2 * box_hw + 1) ** 2 * 8 * 4
    if est > mem_cap_bytes:
        raise ValueError(
            f"block length n={n} needs ~{est} bytes for pair sweeps, over the cap"
        )
    eps0 = confinement_ratio_min(n, gamma) if gamma > 0 else confinement_ratio_min(n, 0.0)
    probs = corridor_pass_probs(n)
    theta_on = 0.25 * eps0 * normal_tail(eps)
    theta_off = 0.25 * min(probs["forward"], probs["up"], probs["down"], 4.0 * theta_on)
    lam = log_mgf(spec, beta)
    return CoarseGeometry(
        n=n,
        sqrt_n=sqrt_n,
        window_hw=iround(sqrt_n / 4),
        box_hw=box_hw,
        horizon=horizon,
        beta=beta,
        u=u,
        eps=eps,
        spec=spec,
        log_u_on=math.log(theta_on) + (lam + (1.0 - eps) * f) * n,
        log_u_off=math.log(theta_off) + lam * n,
        theta_on=theta_on,
        theta_off=theta_off,
        eps0_hat=eps0,
        a_probs=probs,
        f_pinning=f,
    )


def build_gap_geometry(
    beta: float,
    spec: DisorderSpec,
    n: int,
    eps: float = 0.3,
    horizon: int = 30,
) -> CoarseGeometry:
    """Single-threshold geometry for the u = 0 quenched-annealed gap study:
    every link must clear U = (1/4) min(A_g) exp(Lambda(beta) n)."""
    n = _even_block_length(n)
    sqrt_n = iround(math.sqrt(n))
    probs = corridor_pass_probs(n)
    theta = 0.25 * min(probs.values())
    lam = log_mgf(spec, beta)
    log_u = math.log(theta) + lam * n
    return CoarseGeometry(
        n=n,
        sqrt_n=sqrt_n,
        window_hw=iround(sqrt_n / 4),
        box_hw=2 * sqrt_n,
        horizon=horizon,
        beta=beta,
        u=0.0,
        eps=eps,
        spec=spec,
        log_u_on=log_u,
        log_u_off=log_u,
        theta_on=theta,
        theta_off=theta,
        eps0_hat=1.0,
        a_probs=probs,
        f_pinning=0.0,
    )


@dataclass
class CoarseSiteRecord:
    i: int
    j: int
    links: Dict[str, float]
    nu: Optional[StartMeasure]  # endpoint measure on the absolute window
    open: bool


@dataclass
class CoarseLattice:
    geometry: CoarseGeometry
    sites: Dict[Tuple[int, int], CoarseSiteRecord]

    def is_open(self, i: int, j: int) -> bool:
        rec = self.sites.get((i, j))
        return bool(rec and rec.open)

    def open_matrix(self) -> np.ndarray:
        """(horizon+1) x (horizon+1) matrix of flags; -1 marks J > I."""
        h = self.geometry.horizon
        m = np.full((h + 1, h + 1), -1, dtype=np.int8)
        for (i, j), rec in self.sites.items():
            m[i, j] = 1 if rec.open else 0
        return m


def _site_is_open(geom: CoarseGeometry, j: int, links: Dict[str, float]) -> bool:
    if j == 0:
        return links["forward"] >= geom.log_u_on and links["up"] >= geom.log_u_off
    return all(links[g] >= geom.log_u_off for g in LINK_DIRECTIONS)


def _optimal_path(flags: np.ndarray, target: Tuple[int, int]) -> List[int]:
    """Maximal-open-count directed path (0,0) -> target, lowest tie-break.

    Backward DP on the open count from each site to the target, then a
    forward reconstruction taking the smallest height among optimal moves;
    this is the lexicographically lowest maximal path, which coincides with
    the pointwise-lowest one whenever that exists.
    """
    ti, tj = target
    if not (0 <= tj <= ti):
        raise ValueError("target outside the half-lattice")
    NEG = -(10**9)
    count = np.full((ti + 1, ti + 2), NEG, dtype=np.int64)
    count[ti, tj] = int(flags[ti, tj] == 1)
    for i in range(ti - 1, -1, -1):
        for j in range(0, i + 1):
            if abs(j - tj) > ti - i:
                continue
            best = NEG
            for jn in (j - 1, j, j + 1):
                if 0 <= jn <= i + 1 and count[i + 1, jn] > best:
                    best = count[i + 1, jn]
            if best > NEG:
                count[i, j] = int(flags[i, j] == 1) + best
    path = [0]
    for i in range(ti):
        j = path[-1]
        want = count[i, j] - int(flags[i, j] == 1)
        for jn in (j - 1, j, j + 1):
            if 0 <= jn <= i + 1 and count[i + 1, jn] == want:
                path.append(jn)
                break
    return path


def optimal_path(lattice: CoarseLattice, target: Tuple[int, int]) -> List[int]:
    """Height sequence of the optimal (maximal, then lowest) path to target."""
    flags = lattice.open_matrix()
    return _optimal_path(flags, target)


def _corridor_state(
    cache: Dict[Tuple[int, ...], CorridorState],
    env: Optional[Environment],
    geom: CoarseGeometry,
    path: List[int],
) -> CorridorState:
    """Corridor state at the end of ``path``, reusing cached prefixes."""
    key = tuple(path)
    if key in cache:
        return cache[key]
    if len(path) == 1:
        state = corridor_start(StartMeasure.delta(0))
        cache[key] = state
        return state
    prev = _corridor_state(cache, env, geom, path[:-1])
    block = geom.block_constraint(path[-2], path[-1])
    state = corridor_advance(prev, env, geom.beta, geom.u, block)
    cache[key] = state
    return state


def classify_lattice(env: Optional[Environment], geom: CoarseGeometry) -> CoarseLattice:
    """Column-by-column inductive classification of the half-lattice.

    For each site the endpoint measure is the normalized final column of the
    corridor partition along the optimal path to it (given the flags of the
    previous columns), and the three link partition functions start from that
    measure with the environment shifted to the site's block origin.
    """
    h = geom.horizon
    flags = np.full((h + 1, h + 1), -1, dtype=np.int8)
    sites: Dict[Tuple[int, int], CoarseSiteRecord] = {}
    cache: Dict[Tuple[int, ...], CorridorState] = {}
    for i in range(h + 1):
        for j in range(i + 1):
            if i == 0:
                nu = StartMeasure.delta(0)
            else:
                path = _optimal_path(flags, (i, j))
                state = _corridor_state(cache, env, geom, path)
                col = state.column()
                nu = col.to_measure() if np.isfinite(col.logw).any() else None
            links: Dict[str, float] = {}
            if nu is None:
                for g in LINK_DIRECTIONS:
                    links[g] = -math.inf
            else:
                nu_local = nu.translated(-j * geom.sqrt_n)
                env_site = (
                    env.shifted(i * geom.n, j * geom.sqrt_n) if env is not None else None
                )
                for g in LINK_DIRECTIONS:
                    if g == "down" and j == 0:
                        continue
                    links[g] = _link_value(env_site, geom, g, nu_local)
            is_open = nu is not None and _site_is_open(geom, j, links)
            sites[(i, j)] = CoarseSiteRecord(i=i, j=j, links=links, nu=nu, open=is_open)
            flags[i, j] = 1 if is_open else 0
    return CoarseLattice(geometry=geom, sites=sites)


def _link_value(env_site, geom: CoarseGeometry, g: str, nu_local: StartMeasure) -> float:
    c = geom.link_constraint(g)
    if env_site is None:
        from .engine import annealed_log_mgf

        return annealed_log_mgf(geom.beta * geom.u, c, nu_local)
    return quenched_log_partition(env_site, geom.beta, geom.u, c, nu_local)


def good_path(lattice: CoarseLattice) -> Optional[List[int]]:
    """Lowest all-open directed path from (0,0) crossing the full horizon.

    Computed greedily over sites that are forward-reachable through open
    sites and backward-extendable to the last column; absent when no open
    crossing path exists.
    """
    geom = lattice.geometry
    h = geom.horizon
    flags = lattice.open_matrix()
    open_ = flags == 1
    fwd = np.zeros_like(open_)
    fwd[0, 0] = open_[0, 0]
    for i in range(1, h + 1):
        for j in range(i + 1):
            if open_[i, j]:
                for jp in (j - 1, j, j + 1):
                    if 0 <= jp <= i - 1 and fwd[i - 1, jp]:
                        fwd[i, j] = True
                        break
    back = np.zeros_like(open_)
    back[h, : h + 1] = open_[h, : h + 1]
    for i in range(h - 1, -1, -1):
        for j in range(i + 1):
            if open_[i, j]:
                for jn in (j - 1, j, j + 1):
                    if 0 <= jn <= i + 1 and back[i + 1, jn]:
                        back[i, j] = True
                        break
    usable = fwd & back
    if not usable[0, 0]:
        return None
    path = [0]
    for i in range(1, h + 1):
        j = path[-1]
        nxt = None
        for jn in (j - 1, j, j + 1):
            if 0 <= jn <= i and usable[i, jn]:
                nxt = jn
                break
        if nxt is None:
            return None
        path.append(nxt)
    return path


def _link_direction(j_from: int, j_to: int) -> str:
    return {1: "up", 0: "forward", -1: "down"}[j_to - j_from]


@dataclass
class GoodPathCertificate:
    """A verified finite-corridor lower bound on the quenched free energy."""

    blocks: int
    path: List[int]
    on_axis_pairs: int
    on_axis_fraction: float
    log_corridor_z: float
    sum_links: float
    telescoping_error: float
    bound_value: float  # (R log U_on + (L - R) log U_off) / (L n)
    fe_lower_bound: float  # log_corridor_z / (L n)
    log_u_on: float
    log_u_off: float
    lambda_beta: float
    freelower_target: float  # Lambda + (1 - 3 eps) F
    samepath_ok: bool

    def to_json_dict(self) -> dict:
        d = dict(self.__dict__)
        d["path"] = list(map(int, self.path))
        return d


def certificate(
    env: Optional[Environment], lattice: CoarseLattice, path: List[int]
) -> GoodPathCertificate:
    """Certify a corridor: exact restricted partition value over the corridor
    path set, telescoping agreement with the per-site link values, and the
    threshold product bound.

    Refuses when any site on the path is closed.
    """
    geom = lattice.geometry
    blocks = len(path) - 1
    if blocks < 1:
        raise ValueError("path must span at least one block")
    for i, j in enumerate(path):
        if not lattice.is_open(i, j):
            raise ValueError(f"site ({i},{j}) on the path is closed; certificate refused")
    state = corridor_start(StartMeasure.delta(0))
    for i in range(blocks):
        state = corridor_advance(
            state, env, geom.beta, geom.u, geom.block_constraint(path[i], path[i + 1])
        )
    log_z = state.logsum()
    links = []
    for i in range(1, blocks + 1):
        g = _link_direction(path[i - 1], path[i])
        links.append(lattice.sites[(i - 1, path[i - 1])].links[g])
    sum_links = float(np.sum(links))
    tel_err = abs(log_z - sum_links)
    r = sum(1 for i in range(1, blocks + 1) if path[i - 1] == 0 and path[i] == 0)
    ln = blocks * geom.n
    bound = (r * geom.log_u_on + (blocks - r) * geom.log_u_off) / ln
    lam = log_mgf(geom.spec, geom.beta)
    samepath = True
    flags = lattice.open_matrix()
    for i in (blocks // 2, blocks):
        if _optimal_path(flags, (i, path[i])) != path[: i + 1]:
            samepath = False
    cert = GoodPathCertificate(
        blocks=blocks,
        path=list(path),
        on_axis_pairs=r,
        on_axis_fraction=r / blocks,
        log_corridor_z=log_z,
        sum_links=sum_links,
        telescoping_error=tel_err,
        bound_value=bound,
        fe_lower_bound=log_z / ln,
        log_u_on=geom.log_u_on,
        log_u_off=geom.log_u_off,
        lambda_beta=lam,
        freelower_target=lam + (1.0 - 3.0 * geom.eps) * geom.f_pinning,
        samepath_ok=samepath,
    )
    if tel_err > 1e-8:
        raise RuntimeError(f"telescoping identity violated: |gap| = {tel_err:.3e}")
    if log_z < r * geom.log_u_on + (blocks - r) * geom.log_u_off - 1e-9:
        raise RuntimeError("threshold product bound violated on an open corridor")
    return cert


def ratio_budget(eps: float, on_axis: bool) -> float:
    """Variance-ratio budget making an open site likely: eps/8 on-axis
    (two links), eps/12 off-axis (three links)."""
    return eps / 8.0 if on_axis else eps / 12.0


def second_moment_ratio(
    spec: DisorderSpec,
    beta: float,
    u: float,
    geom: CoarseGeometry,
    site,
    direction: str,
) -> float:
    """Exact conditional Var/E^2 of one link partition function.

    ``site`` is a CoarseSiteRecord (its endpoint measure is translated to
    block-local coordinates) or a StartMeasure already in local coordinates.
    """
    if isinstance(site, CoarseSiteRecord):
        if site.nu is None:
            raise ValueError("site has no endpoint measure")
        nu_local = site.nu.translated(-site.j * geom.sqrt_n)
    else:
        nu_local = site
    c = geom.link_constraint(direction)
    log_ez, log_ez2 = pair_constrained_second_moment(spec, beta, u, c, nu_local)
    return math.expm1(log_ez2 - 2.0 * log_ez)


@dataclass
class GapCertificateReport:
    beta: float
    eps: float
    n: int
    k5_hat: float
    theta_hat: float
    log_u: float
    lattice: CoarseLattice
    path: Optional[List[int]]
    cert: Optional[GoodPathCertificate]
    gap_bound_formula: float  # log(1/theta) beta^4 / k5_hat
    gap_bound_realized: Optional[float]  # log(1/theta)/n when certified

    @property
    def certified(self) -> bool:
        return self.cert is not None


def gap_certificate(
    env: Environment,
    spec: DisorderSpec,
    beta: float,
    eps: float,
    k5_hat: Optional[float] = None,
    a: float = 0.5,
    horizon: int = 30,
    theta_hat: Optional[float] = None,
    scan_r_max: int = 2000,
    n_override: Optional[int] = None,
) -> GapCertificateReport:
    """Single-threshold u = 0 certificate bounding the quenched-annealed gap.

    Block length n = k5_hat * beta^-4, with k5_hat either supplied (recorded
    from an overlap-moment scan at a reference beta) or derived from a scan at
    this beta; on success the certificate implies
    f_q >= Lambda(beta) - log(1/theta)/n, i.e. a gap of order beta^4.
    """
    if n_override is not None:
        n = float(n_override)
        if k5_hat is None:
            k5_hat = n * beta**4
    elif k5_hat is None:
        scan = overlap_moment_scan(spec, beta, a, scan_r_max)
        if scan.r_pass == 0:
            raise ValueError("overlap-moment budget fails at every block length")
        k5_hat = scan.k5_hat
        n = float(scan.r_pass)
    else:
        if beta <= 0:
            raise ValueError("beta must be positive when deriving n from k5_hat")
        n = k5_hat * beta**-4
    geom = build_gap_geometry(beta, spec, iround(n), eps=eps, horizon=horizon)
    if theta_hat is not None:
        import dataclasses

        lam = log_mgf(spec, beta)
        geom = dataclasses.replace(
            geom,
            theta_on=theta_hat,
            theta_off=theta_hat,
            log_u_on=math.log(theta_hat) + lam * geom.n,
            log_u_off=math.log(theta_hat) + lam * geom.n,
        )
    lattice = classify_lattice(env, geom)
    path = good_path(lattice)
    cert = certificate(env, lattice, path) if path is not None else None
    theta = geom.theta_on
    log_inv_theta = math.log(1.0 / theta)
    formula = log_inv_theta * beta**4 / k5_hat if k5_hat > 0 else log_inv_theta / geom.n
    return GapCertificateReport(
        beta=beta,
        eps=eps,
        n=geom.n,
        k5_hat=k5_hat,
        theta_hat=theta,
        log_u=geom.log_u_on,
        lattice=lattice,
        path=path,
        cert=cert,
        gap_bound_formula=formula,
        gap_bound_realized=log_inv_theta / geom.n if cert else None,
    )
