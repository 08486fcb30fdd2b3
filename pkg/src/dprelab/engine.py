"""Exact log-domain transfer-matrix engines: quenched and annealed partition
functions over restricted path sets, endpoint-resolved columns, pair-walk
overlap moments, the homogeneous polymer kernel, and a brute-force
enumeration oracle.

Columns are stored parity-packed (only reachable heights) in linear domain
with an exact power-of-two rescale, so the accumulated value equals the
mathematical sum up to ordinary float rounding; queries at unreachable or
wrong-parity heights read as log-weight -inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from .disorder import DisorderSpec, Environment, log_mgf, overlap_coupling
from .walks import PathConstraint

_LN2 = math.log(2.0)
_RENORM_HI = math.ldexp(1.0, 512)
_RENORM_LO = math.ldexp(1.0, -512)


@dataclass(frozen=True)
class StartMeasure:
    """Probability measure on finitely many start heights (sums to 1)."""

    heights: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=np.int64)
        p = np.asarray(self.probs, dtype=np.float64)
        if h.ndim != 1 or p.shape != h.shape:
            raise ValueError("heights and probs must be 1-d arrays of equal length")
        if len(np.unique(h)) != len(h):
            raise ValueError("duplicate heights")
        if np.any(p < 0):
            raise ValueError("negative probability")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        order = np.argsort(h)
        object.__setattr__(self, "heights", h[order])
        object.__setattr__(self, "probs", p[order])

    @staticmethod
    def delta(x: int) -> "StartMeasure":
        return StartMeasure(np.array([x]), np.array([1.0]))

    def translated(self, dy: int) -> "StartMeasure":
        return StartMeasure(self.heights + dy, self.probs.copy())

    def support_in(self, window: Tuple[int, int]) -> bool:
        return bool(self.heights.min() >= window[0] and self.heights.max() <= window[1])


@dataclass
class LogColumn:
    """Endpoint-resolved log weights at a fixed time slice.

    Dense over [lo, lo + len - 1]; excluded or unreachable heights carry -inf.
    """

    j: int
    lo: int
    logw: np.ndarray

    def heights(self) -> np.ndarray:
        return self.lo + np.arange(len(self.logw), dtype=np.int64)

    def value_at(self, x: int) -> float:
        k = x - self.lo
        if 0 <= k < len(self.logw):
            return float(self.logw[k])
        return -math.inf

    def logsumexp(self) -> float:
        m = np.max(self.logw) if len(self.logw) else -math.inf
        if not np.isfinite(m):
            return -math.inf
        return float(m + np.log(np.sum(np.exp(self.logw - m))))

    def to_measure(self) -> StartMeasure:
        """Normalize into an endpoint probability measure on the finite support."""
        finite = np.isfinite(self.logw)
        if not finite.any():
            raise ValueError("cannot normalize an empty column")
        h = self.heights()[finite]
        lw = self.logw[finite]
        m = lw.max()
        w = np.exp(lw - m)
        return StartMeasure(h, w / w.sum())


# ---------------------------------------------------------------------------
# Packed single-walk sweep
# ---------------------------------------------------------------------------

# A parity class in flight: (lo, weights, logscale); heights are lo + 2k.
_Class = Tuple[int, np.ndarray, float]


def _split_classes(start: StartMeasure) -> List[_Class]:
    out: List[_Class] = []
    for parity in (0, 1):
        sel = (start.heights % 2 + 2) % 2 == parity
        if not sel.any():
            continue
        hs = start.heights[sel]
        ps = start.probs[sel]
        lo = int(hs.min())
        w = np.zeros((int(hs.max()) - lo) // 2 + 1)
        w[(hs - lo) // 2] = ps
        out.append((lo, w, 0.0))
    return out


def _clip_range(lo: int, m: int, box: Tuple[int, int]) -> Optional[Tuple[int, int]]:
    """Index range [k0, k1] of packed heights lo + 2k lying inside ``box``."""
    k0 = max(0, (box[0] - lo + 1) // 2)
    k1 = min(m - 1, (box[1] - lo) // 2)
    if k0 > k1:
        return None
    return k0, k1


def _clip(lo: int, w: np.ndarray, box: Optional[Tuple[int, int]]):
    """Restrict a packed column to heights inside ``box`` (parity-aware)."""
    if box is None:
        return lo, w
    r = _clip_range(lo, len(w), box)
    if r is None:
        return None
    k0, k1 = r
    return lo + 2 * k0, w[k0 : k1 + 1]


def _sweep_class(
    cls: _Class,
    constraint: PathConstraint,
    axis_bonus: float = 1.0,
    weights_fn: Optional[Callable[[int, np.ndarray], np.ndarray]] = None,
    collect: Optional[Iterable[int]] = None,
) -> Tuple[Optional[_Class], Dict[int, float]]:
    """Advance one parity class through all N steps of the constraint.

    axis_bonus multiplies the weight at height 0 at each step; weights_fn, if
    given, returns a per-height multiplicative weight column for each step.
    Returns the final class (or None if the admissible set emptied) plus
    log partition values at the requested interior times.
    """
    lo, w, logscale = cls
    n = constraint.length
    collected: Dict[int, float] = {}
    want = frozenset(collect) if collect else frozenset()
    for j in range(1, n + 1):
        m = len(w)
        new = np.empty(m + 1)
        new[:m] = w
        new[m] = 0.0
        new[1:] += w
        new *= 0.5
        nlo = lo - 1
        clipped = _clip(nlo, new, constraint.box)
        if clipped is None:
            return None, collected
        nlo, new = clipped
        if weights_fn is not None:
            xs = nlo + 2 * np.arange(len(new), dtype=np.int64)
            new = new * weights_fn(j, xs)
        if axis_bonus != 1.0 and nlo <= 0 and nlo % 2 == 0:
            k0 = -nlo // 2
            if k0 < len(new):
                new[k0] *= axis_bonus
        mx = new.max()
        if mx == 0.0:
            return None, collected
        if not (_RENORM_LO < mx < _RENORM_HI):
            e = math.frexp(mx)[1]
            new = np.ldexp(new, -e)
            logscale += e * _LN2
        lo, w = nlo, new
        if j in want:
            collected[j] = math.log(w.sum()) + logscale
    final = _clip_end(lo, w, constraint)
    if final is None:
        return None, collected
    return (final[0], final[1], logscale), collected


def _clip_end(lo: int, w: np.ndarray, constraint: PathConstraint):
    win = constraint.end_window
    if constraint.end_point is not None:
        ep = constraint.end_point
        win = (ep, ep) if win is None else (max(win[0], ep), min(win[1], ep))
    res = _clip(lo, w, win)
    if res is None or res[1].max() == 0.0:
        return None
    return res


def _start_classes_checked(constraint: PathConstraint, start: StartMeasure) -> List[_Class]:
    if not start.support_in(constraint.start_window):
        raise ValueError("start measure not supported in the constraint's start window")
    return _split_classes(start)


def _run_sweep(
    constraint: PathConstraint,
    start: StartMeasure,
    axis_bonus: float = 1.0,
    weights_fn=None,
    collect=None,
) -> Tuple[List[_Class], Dict[int, float]]:
    finals: List[_Class] = []
    col_all: Dict[int, float] = {}
    for cls in _start_classes_checked(constraint, start):
        fin, col = _sweep_class(cls, constraint, axis_bonus, weights_fn, collect)
        if fin is not None:
            finals.append(fin)
        for t, v in col.items():
            col_all[t] = float(np.logaddexp(col_all[t], v)) if t in col_all else v
    return finals, col_all


def _finals_logsum(finals: List[_Class]) -> float:
    total = -math.inf
    for lo, w, logscale in finals:
        s = w.sum()
        if s > 0:
            total = float(np.logaddexp(total, math.log(s) + logscale))
    return total


def _finals_to_column(finals: List[_Class], j: int) -> LogColumn:
    if not finals:
        return LogColumn(j=j, lo=0, logw=np.full(1, -math.inf))
    lo = min(f[0] for f in finals)
    hi = max(f[0] + 2 * (len(f[1]) - 1) for f in finals)
    logw = np.full(hi - lo + 1, -math.inf)
    for flo, w, logscale in finals:
        pos = np.nonzero(w > 0)[0]
        logw[flo - lo + 2 * pos] = np.log(w[pos]) + logscale
    return LogColumn(j=j, lo=lo, logw=logw)


def _quenched_weights(env: Environment, beta: float):
    def fn(j: int, xs: np.ndarray) -> np.ndarray:
        return env.boltzmann(j, xs, beta)

    return fn


# ---------------------------------------------------------------------------
# Public engines
# ---------------------------------------------------------------------------


def quenched_log_partition(
    env: Environment,
    beta: float,
    u: float,
    constraint: PathConstraint,
    start: StartMeasure,
) -> float:
    """log E_start[exp(beta * sum_j (v(j,S_j) + u 1_{S_j=0})) ; admissible].

    Returns -inf when the admissible path set is empty.
    """
    finals, _ = _run_sweep(
        constraint,
        start,
        axis_bonus=math.exp(beta * u),
        weights_fn=_quenched_weights(env, beta) if beta != 0.0 else None,
    )
    return _finals_logsum(finals)


def quenched_endpoint_column(
    env: Environment,
    beta: float,
    u: float,
    constraint: PathConstraint,
    start: StartMeasure,
) -> LogColumn:
    """Final-slice log weights; its log-sum-exp equals quenched_log_partition."""
    finals, _ = _run_sweep(
        constraint,
        start,
        axis_bonus=math.exp(beta * u),
        weights_fn=_quenched_weights(env, beta) if beta != 0.0 else None,
    )
    return _finals_to_column(finals, constraint.length)


def annealed_log_mgf(
    gamma: float,
    constraint: PathConstraint,
    start: StartMeasure,
    collect: Optional[Iterable[int]] = None,
):
    """log E_start[exp(gamma * L_N) ; admissible] (deterministic, no disorder).

    With ``collect`` given, also returns {n: log E[exp(gamma L_n); box up to n]}
    at the requested interior times.
    """
    finals, col = _run_sweep(constraint, start, axis_bonus=math.exp(gamma), collect=collect)
    value = _finals_logsum(finals)
    if collect is not None:
        return value, col
    return value


def annealed_endpoint_column(
    gamma: float, constraint: PathConstraint, start: StartMeasure
) -> LogColumn:
    finals, _ = _run_sweep(constraint, start, axis_bonus=math.exp(gamma))
    return _finals_to_column(finals, constraint.length)


# ---------------------------------------------------------------------------
# Corridor chaining: several blocks swept in one pass, no renormalization
# ---------------------------------------------------------------------------


@dataclass
class CorridorState:
    """Unnormalized packed columns at a global time, carried across blocks."""

    classes: List[_Class]
    time: int

    def logsum(self) -> float:
        return _finals_logsum(self.classes)

    def column(self) -> LogColumn:
        return _finals_to_column(self.classes, self.time)


def corridor_start(start: StartMeasure) -> CorridorState:
    return CorridorState(classes=_split_classes(start), time=0)


def corridor_advance(
    state: CorridorState,
    env: Optional[Environment],
    beta: float,
    u: float,
    constraint: PathConstraint,
) -> CorridorState:
    """Advance one block of ``constraint.length`` steps in absolute coordinates.

    The constraint's start window masks the incoming column, its box and end
    window apply during and after the sweep, and disorder is read at global
    times state.time + 1 .. state.time + N.  The weights stay unnormalized, so
    chained calls compute the corridor partition function in a single pass.
    """
    offset = state.time
    weights_fn = None
    if env is not None and beta != 0.0:
        def weights_fn(j: int, xs: np.ndarray) -> np.ndarray:
            return env.boltzmann(offset + j, xs, beta)

    out: List[_Class] = []
    for lo, w, logscale in state.classes:
        clipped = _clip(lo, w, constraint.start_window)
        if clipped is None or clipped[1].max() == 0.0:
            continue
        fin, _ = _sweep_class(
            (clipped[0], clipped[1], logscale),
            constraint,
            axis_bonus=math.exp(beta * u),
            weights_fn=weights_fn,
        )
        if fin is not None:
            out.append(fin)
    return CorridorState(classes=out, time=state.time + constraint.length)


# ---------------------------------------------------------------------------
# Lazy difference walk (overlap of two independent walks)
# ---------------------------------------------------------------------------


def lazy_walk_log_mgf(
    gamma: float, n: int, h0: int = 0, collect_all: bool = False
):
    """log E[exp(gamma * local time at 0)] for the lazy +-1 walk started at h0.

    The lazy walk holds with probability 1/2 and jumps +-1 with probability
    1/4 each; it is the difference of two independent simple walks with
    heights halved.  With collect_all, returns the full vector over 1..n.
    """
    eg = math.exp(gamma)
    w = np.zeros(1)
    w[0] = 1.0
    lo = h0
    logscale = 0.0
    out = np.empty(n) if collect_all else None
    for j in range(1, n + 1):
        m = len(w)
        new = np.empty(m + 2)
        new[1 : m + 1] = 0.5 * w
        new[0] = 0.0
        new[m + 1] = 0.0
        new[: m] += 0.25 * w
        new[2 :] += 0.25 * w
        lo -= 1
        if lo <= 0 <= lo + m + 1:
            new[-lo] *= eg
        mx = new.max()
        if not (_RENORM_LO < mx < _RENORM_HI):
            e = math.frexp(mx)[1]
            new = np.ldexp(new, -e)
            logscale += e * _LN2
        w = new
        if collect_all:
            out[j - 1] = math.log(w.sum()) + logscale
    if collect_all:
        return out
    return math.log(w.sum()) + logscale


def pair_overlap_log_mgf(gamma: float, n: int, start_pair: Tuple[int, int]) -> float:
    """log E of exp(gamma * overlap) for two independent walks.

    Computed as a single lazy-walk run started at the height difference.  For
    starts of unequal parity the walks can never meet at integer times, so the
    overlap is 0 surely and the result is 0.
    """
    d = start_pair[0] - start_pair[1]
    if d % 2 != 0:
        return 0.0
    return lazy_walk_log_mgf(gamma, n, h0=d // 2)


# ---------------------------------------------------------------------------
# Pair sweep: exact disorder moments of a restricted partition function
# ---------------------------------------------------------------------------


def _pair_sweep_combo(
    cls_a: _Class,
    cls_b: _Class,
    constraint: PathConstraint,
    axis_bonus: float,
    diag_bonus: float,
) -> float:
    lo1, w1, _ = cls_a
    lo2, w2, _ = cls_b
    w = np.outer(w1, w2)
    logscale = 0.0
    n = constraint.length
    for _ in range(1, n + 1):
        m1, m2 = w.shape
        t = np.zeros((m1 + 1, m2))
        t[:m1] = 0.5 * w
        t[1:] += 0.5 * w
        new = np.zeros((m1 + 1, m2 + 1))
        new[:, :m2] = 0.5 * t
        new[:, 1:] += 0.5 * t
        lo1 -= 1
        lo2 -= 1
        if constraint.box is not None:
            r1 = _clip_range(lo1, m1 + 1, constraint.box)
            r2 = _clip_range(lo2, m2 + 1, constraint.box)
            if r1 is None or r2 is None:
                return -math.inf
            (k0a, k1a), (k0b, k1b) = r1, r2
            new = new[k0a : k1a + 1, k0b : k1b + 1]
            lo1 += 2 * k0a
            lo2 += 2 * k0b
        if axis_bonus != 1.0:
            if lo1 <= 0 and lo1 % 2 == 0 and -lo1 // 2 < new.shape[0]:
                new[-lo1 // 2, :] *= axis_bonus
            if lo2 <= 0 and lo2 % 2 == 0 and -lo2 // 2 < new.shape[1]:
                new[:, -lo2 // 2] *= axis_bonus
        if diag_bonus != 1.0 and (lo1 - lo2) % 2 == 0:
            d = (lo2 - lo1) // 2
            ks = np.arange(max(0, -d), min(new.shape[0], new.shape[1] - d))
            if len(ks):
                new[ks, ks + d] *= diag_bonus
        mx = new.max()
        if mx == 0.0:
            return -math.inf
        if not (_RENORM_LO < mx < _RENORM_HI):
            e = math.frexp(mx)[1]
            new = np.ldexp(new, -e)
            logscale += e * _LN2
        w = new
    win = constraint.end_window
    if constraint.end_point is not None:
        ep = constraint.end_point
        win = (ep, ep) if win is None else (max(win[0], ep), min(win[1], ep))
    if win is not None:
        r1 = _clip_range(lo1, w.shape[0], win)
        r2 = _clip_range(lo2, w.shape[1], win)
        if r1 is None or r2 is None:
            return -math.inf
        w = w[r1[0] : r1[1] + 1, r2[0] : r2[1] + 1]
    s = w.sum()
    if s <= 0.0:
        return -math.inf
    return math.log(s) + logscale


def pair_constrained_second_moment(
    spec: DisorderSpec,
    beta: float,
    u: float,
    constraint: PathConstraint,
    start: StartMeasure,
) -> Tuple[float, float]:
    """Exact disorder moments (log E_Q Z, log E_Q Z^2) of the restricted
    quenched partition function.

    The first moment is the annealed value; the second is a two-walk sweep
    whose per-step weight carries the axis bonus for each walk and the overlap
    coupling exp(Phi(beta)) on the diagonal, times exp(2 Lambda(beta) N).
    """
    lam = log_mgf(spec, beta)
    n = constraint.length
    log_ez = lam * n + annealed_log_mgf(beta * u, constraint, start)
    phi = overlap_coupling(spec, beta)
    classes = _start_classes_checked(constraint, start)
    total = -math.inf
    for ca in classes:
        for cb in classes:
            v = _pair_sweep_combo(
                ca, cb, constraint, math.exp(beta * u), math.exp(phi)
            )
            if v > -math.inf:
                total = float(np.logaddexp(total, v))
    log_ez2 = 2.0 * lam * n + total
    return log_ez, log_ez2


# ---------------------------------------------------------------------------
# Homogeneous polymer kernel
# ---------------------------------------------------------------------------


def pinned_weight_table(gamma: float, n: int) -> np.ndarray:
    """log W(m, x) = log E_x[exp(gamma * L_m)] for m = 0..n, |x| <= n + 2.

    Backward recursion; callers cache the table per (gamma, n) and feed it to
    polymer_kernel.  Row m is indexed by x + n + 2.
    """
    width = 2 * (n + 2) + 1
    xs = np.arange(-(n + 2), n + 3)
    table = np.zeros((n + 1, width))
    for m in range(1, n + 1):
        prev = table[m - 1]
        cur = table[m]
        left = prev[:-2] + gamma * (xs[:-2] == 0)
        right = prev[2:] + gamma * (xs[2:] == 0)
        cur[1:-1] = np.logaddexp(left, right) - _LN2
        cur[0] = 0.0
        cur[-1] = 0.0
    return table


def polymer_kernel(
    gamma: float, n: int, k: int, z: int, table: Optional[np.ndarray] = None
) -> Tuple[float, float]:
    """Transition probabilities (up, down) of the pinned polymer chain.

    P(step to z+1) = exp(gamma 1_{z+1=0}) W(n-k-1, z+1) / (2 W(n-k, z)) and
    symmetrically for z-1; the pair sums to 1.
    """
    if not (0 <= k < n):
        raise ValueError("need 0 <= k < n")
    if abs(z) > n + 1:
        raise ValueError("height outside the reachable cone")
    if table is None:
        table = pinned_weight_table(gamma, n)
    off = n + 2
    log_wz = table[n - k][z + off]
    up = gamma * (z + 1 == 0) + table[n - k - 1][z + 1 + off] - _LN2 - log_wz
    down = gamma * (z - 1 == 0) + table[n - k - 1][z - 1 + off] - _LN2 - log_wz
    return math.exp(up), math.exp(down)


# ---------------------------------------------------------------------------
# Brute-force enumeration oracle
# ---------------------------------------------------------------------------

_MAX_SINGLE = 16
_MAX_PAIR = 10


def _all_steps(n: int) -> np.ndarray:
    bits = (np.arange(1 << n, dtype=np.uint32)[:, None] >> np.arange(n, dtype=np.uint32)) & 1
    return (2 * bits.astype(np.int64)) - 1


def _admissible_mask(pos: np.ndarray, constraint: PathConstraint) -> np.ndarray:
    ok = np.ones(pos.shape[0], dtype=bool)
    if constraint.box is not None:
        inner = pos[:, 1:]
        ok &= (inner >= constraint.box[0]).all(axis=1)
        ok &= (inner <= constraint.box[1]).all(axis=1)
    if constraint.end_window is not None:
        ok &= (pos[:, -1] >= constraint.end_window[0]) & (pos[:, -1] <= constraint.end_window[1])
    if constraint.end_point is not None:
        ok &= pos[:, -1] == constraint.end_point
    return ok


def _logsumexp(v: np.ndarray) -> float:
    if len(v) == 0:
        return -math.inf
    m = v.max()
    if not np.isfinite(m):
        return -math.inf
    return float(m + np.log(np.exp(v - m).sum()))


def _brute_single_logweights(env, beta, u, constraint, x0):
    n = constraint.length
    steps = _all_steps(n)
    pos = np.empty((steps.shape[0], n + 1), dtype=np.int64)
    pos[:, 0] = x0
    np.cumsum(steps, axis=1, out=pos[:, 1:])
    pos[:, 1:] += x0
    lw = np.full(steps.shape[0], -n * _LN2)
    if u != 0.0:
        lw = lw + beta * u * (pos[:, 1:] == 0).sum(axis=1)
    if env is not None and beta != 0.0:
        for j in range(1, n + 1):
            lw = lw + beta * env.values(j, pos[:, j])
    return pos, lw


def brute_quenched(env, beta, u, constraint: PathConstraint, start: StartMeasure) -> float:
    if constraint.length > _MAX_SINGLE:
        raise ValueError(f"enumeration limited to N <= {_MAX_SINGLE}")
    parts = []
    for x0, p in zip(start.heights, start.probs):
        if not (constraint.start_window[0] <= x0 <= constraint.start_window[1]) or p == 0.0:
            continue
        pos, lw = _brute_single_logweights(env, beta, u, constraint, int(x0))
        mask = _admissible_mask(pos, constraint)
        parts.append(_logsumexp(lw[mask]) + math.log(p))
    return _logsumexp(np.array(parts)) if parts else -math.inf


def brute_endpoint(env, beta, u, constraint: PathConstraint, start: StartMeasure) -> Dict[int, float]:
    if constraint.length > _MAX_SINGLE:
        raise ValueError(f"enumeration limited to N <= {_MAX_SINGLE}")
    acc: Dict[int, List[float]] = {}
    for x0, p in zip(start.heights, start.probs):
        if p == 0.0:
            continue
        pos, lw = _brute_single_logweights(env, beta, u, constraint, int(x0))
        mask = _admissible_mask(pos, constraint)
        ends = pos[mask, -1]
        vals = lw[mask] + math.log(p)
        for e in np.unique(ends):
            acc.setdefault(int(e), []).append(_logsumexp(vals[ends == e]))
    return {e: _logsumexp(np.array(vs)) for e, vs in acc.items()}


def brute_annealed(gamma: float, constraint: PathConstraint, start: StartMeasure) -> float:
    if constraint.length > _MAX_SINGLE:
        raise ValueError(f"enumeration limited to N <= {_MAX_SINGLE}")
    parts = []
    for x0, p in zip(start.heights, start.probs):
        if p == 0.0:
            continue
        pos, lw = _brute_single_logweights(None, 0.0, 0.0, constraint, int(x0))
        lw = lw + gamma * (pos[:, 1:] == 0).sum(axis=1)
        mask = _admissible_mask(pos, constraint)
        parts.append(_logsumexp(lw[mask]) + math.log(p))
    return _logsumexp(np.array(parts)) if parts else -math.inf


def brute_pair_overlap(gamma: float, n: int, start_pair: Tuple[int, int]) -> float:
    if n > _MAX_PAIR:
        raise ValueError(f"pair enumeration limited to N <= {_MAX_PAIR}")
    steps = _all_steps(n)
    p1 = start_pair[0] + np.cumsum(steps, axis=1)
    p2 = start_pair[1] + np.cumsum(steps, axis=1)
    b = np.zeros((p1.shape[0], p2.shape[0]))
    for j in range(n):
        b += p1[:, j][:, None] == p2[:, j][None, :]
    return _logsumexp(gamma * b.ravel()) - 2 * n * _LN2


def brute_pair_second_moment(
    spec: DisorderSpec,
    beta: float,
    u: float,
    constraint: PathConstraint,
    start: StartMeasure,
) -> Tuple[float, float]:
    n = constraint.length
    if n > _MAX_PAIR:
        raise ValueError(f"pair enumeration limited to N <= {_MAX_PAIR}")
    lam = log_mgf(spec, beta)
    phi = overlap_coupling(spec, beta)
    steps = _all_steps(n)
    parts_ez2 = []
    for xa, pa in zip(start.heights, start.probs):
        pos1 = np.empty((steps.shape[0], n + 1), dtype=np.int64)
        pos1[:, 0] = xa
        pos1[:, 1:] = xa + np.cumsum(steps, axis=1)
        m1 = _admissible_mask(pos1, constraint)
        q1 = pos1[m1]
        l1 = (q1[:, 1:] == 0).sum(axis=1)
        for xb, pb in zip(start.heights, start.probs):
            if pa == 0.0 or pb == 0.0:
                continue
            pos2 = np.empty_like(pos1)
            pos2[:, 0] = xb
            pos2[:, 1:] = xb + np.cumsum(steps, axis=1)
            m2 = _admissible_mask(pos2, constraint)
            q2 = pos2[m2]
            l2 = (q2[:, 1:] == 0).sum(axis=1)
            if len(q1) == 0 or len(q2) == 0:
                continue
            b = np.zeros((len(q1), len(q2)))
            for j in range(1, n + 1):
                b += q1[:, j][:, None] == q2[:, j][None, :]
            lw = (
                phi * b
                + beta * u * (l1[:, None] + l2[None, :])
                + math.log(pa)
                + math.log(pb)
            )
            parts_ez2.append(_logsumexp(lw.ravel()) - 2 * n * _LN2)
    log_ez = lam * n + brute_annealed(beta * u, constraint, start)
    log_ez2 = 2 * lam * n + (_logsumexp(np.array(parts_ez2)) if parts_ez2 else -math.inf)
    return log_ez, log_ez2


def brute_force_oracle(env, beta, u, constraint, start, mode: str, gamma: Optional[float] = None):
    """Direct summation over all step sequences; the reference for every engine.

    Modes: quenched | endpoint | annealed | pair_overlap | pair_second_moment.
    ``gamma`` defaults to beta * u where a pinning strength is needed.
    """
    g = beta * u if gamma is None else gamma
    if mode == "quenched":
        return brute_quenched(env, beta, u, constraint, start)
    if mode == "endpoint":
        return brute_endpoint(env, beta, u, constraint, start)
    if mode == "annealed":
        return brute_annealed(g, constraint, start)
    if mode == "pair_overlap":
        x0 = int(start.heights[0])
        x1 = int(start.heights[-1])
        return brute_pair_overlap(g, constraint.length, (x0, x1))
    if mode == "pair_second_moment":
        return brute_pair_second_moment(env.spec if env is not None else DisorderSpec("gaussian"), beta, u, constraint, start)
    raise ValueError(f"unknown mode {mode!r}")
