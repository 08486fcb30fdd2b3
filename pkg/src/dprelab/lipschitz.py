"""Lipschitz percolation on a strip: lowest open Lipschitz function by
monotone fixed-point iteration, height and component tail statistics, axis
density, and the k-dependent stochastic-domination threshold."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np


@dataclass
class SiteField:
    """Open/closed flags on columns x in [0, X) and heights h in [0, H).

    Columns outside the strip are treated as fully open, so the surface is
    only one-sidedly constrained at the strip edges (statistics should be
    read off the middle of the strip).
    """

    open_: np.ndarray  # bool, shape (X, H)
    provenance: str = "bernoulli"
    p: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        self.open_ = np.asarray(self.open_, dtype=bool)
        if self.open_.ndim != 2:
            raise ValueError("field must be 2-d (columns x heights)")

    @property
    def width(self) -> int:
        return self.open_.shape[0]

    @property
    def height_cap(self) -> int:
        return self.open_.shape[1]

    @staticmethod
    def bernoulli(p: float, width: int, seed: int, height_cap: int = 64) -> "SiteField":
        if not 0.0 < p <= 1.0:
            raise ValueError("p must be in (0, 1]")
        rng = np.random.default_rng(seed)
        flags = rng.random((width, height_cap)) < p
        return SiteField(flags, provenance="bernoulli", p=p, seed=seed)

    @staticmethod
    def from_open_matrix(matrix: np.ndarray, height_cap: int = 64) -> "SiteField":
        """Import a coarse-grained flag matrix (rows I, columns J).

        Sites above the half-lattice diagonal (J > I) do not exist in the
        coarse construction; they are treated as open so they never force the
        surface upward near the origin.
        """
        m = np.asarray(matrix)
        x, h = m.shape[0], min(m.shape[1], height_cap)
        flags = np.ones((x, h), dtype=bool)
        sub = m[:, :h]
        flags[:, :] = (sub == 1) | (sub == -1)
        return SiteField(flags, provenance="imported", p=None, seed=None)


@dataclass
class LipschitzFunction:
    """Nonnegative heights with |increment| <= 1 passing through open sites."""

    heights: np.ndarray

    def is_lipschitz(self) -> bool:
        return bool(np.all(np.abs(np.diff(self.heights)) <= 1))

    def is_open_in(self, field: SiteField) -> bool:
        xs = np.arange(field.width)
        return bool(np.all(field.open_[xs, self.heights]))


def _next_open_table(field: SiteField) -> np.ndarray:
    """next_open[x, h] = least open height >= h in column x (H = failure)."""
    x, h = field.width, field.height_cap
    table = np.full((x, h + 1), h, dtype=np.int64)
    for level in range(h - 1, -1, -1):
        table[:, level] = np.where(field.open_[:, level], level, table[:, level + 1])
    return table


def lowest_lipschitz(field: SiteField) -> Optional[LipschitzFunction]:
    """Pointwise-least open Lipschitz function, or None on percolation failure.

    Kleene iteration from the zero function: each sweep raises every column to
    the least open height compatible with its neighbours; the limit is the
    least fixed point.  A column pushed to the height cap is a failure.
    """
    table = _next_open_table(field)
    x, h = field.width, field.height_cap
    cols = np.arange(x)
    heights = table[cols, 0].copy()
    if np.any(heights >= h):
        return None
    for _ in range(x * h + 1):
        bound = heights.copy()
        if x > 1:
            np.maximum(bound[1:], heights[:-1] - 1, out=bound[1:])
            np.maximum(bound[:-1], heights[1:] - 1, out=bound[:-1])
        new = table[cols, np.minimum(bound, h)]
        if np.any(new >= h):
            return None
        if np.array_equal(new, heights):
            return LipschitzFunction(heights=heights)
        heights = new
    raise RuntimeError("fixed-point iteration failed to settle within X*H sweeps")


def _middle(x: int) -> slice:
    return slice(x // 4, x - x // 4)


def axis_density(surface: LipschitzFunction, middle_only: bool = True) -> float:
    """Fraction of column pairs with L(x-1) = L(x) = 0."""
    hts = surface.heights
    pairs = (hts[:-1] == 0) & (hts[1:] == 0)
    if middle_only:
        pairs = pairs[_middle(len(pairs))]
    return float(pairs.mean())


def _component_sizes_at(heights: np.ndarray) -> np.ndarray:
    """|D_0(x)|: size of the positive-height component containing x (0 if on axis)."""
    pos = heights > 0
    sizes = np.zeros(len(heights), dtype=np.int64)
    start = None
    for i, flag in enumerate(np.append(pos, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            sizes[start:i] = i - start
            start = None
    return sizes


@dataclass
class TailReport:
    p: float
    width: int
    samples: int
    failures: int
    height_tail: np.ndarray  # P(L(0) > n) for n = 0, 1, ...
    comp_tail: np.ndarray  # P(|D_0| >= n) for n = 1, 2, ...
    alpha_hat: float  # fitted decay rate of the height tail
    r2_height: float
    gamma_hat: float  # fastest decay rate consistent with the component tail
    lambda_hat: float  # slowest decay rate consistent with the component tail
    density: float  # mean axis-pair density


def _log_linear_fit(ns: np.ndarray, probs: np.ndarray) -> Tuple[float, float]:
    y = np.log(probs)
    a = np.vstack([ns, np.ones_like(ns)]).T
    coef, res, *_ = np.linalg.lstsq(a, y, rcond=None)
    pred = a @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(-coef[0]), r2


def tail_statistics(
    p: float,
    width: int,
    samples: int,
    seed: int,
    height_cap: int = 64,
    min_observations: int = 20,
) -> TailReport:
    """Empirical height and component tails of the lowest open surface.

    Observations are pooled over the middle half of every sample strip.  The
    height tail gets a log-linear fit (decay rate alpha_hat); the component
    tail is boxed between two exponentials exp(-lambda n) <= P <= exp(-gamma n)
    on the fitted range.
    """
    rng = np.random.default_rng(seed)
    failures = 0
    h_counts = np.zeros(height_cap + 1, dtype=np.int64)
    c_counts: List[int] = []
    densities = []
    n_obs = 0
    for _ in range(samples):
        field = SiteField.bernoulli(p, width, int(rng.integers(2**62)), height_cap)
        surface = lowest_lipschitz(field)
        if surface is None:
            failures += 1
            continue
        mid = _middle(width)
        hts = surface.heights[mid]
        h_counts[: hts.max() + 1] += np.bincount(hts, minlength=hts.max() + 1)
        n_obs += len(hts)
        c_counts.extend(_component_sizes_at(surface.heights)[mid].tolist())
        densities.append(axis_density(surface))
    if n_obs == 0:
        raise RuntimeError("every sample failed to percolate")
    height_tail = 1.0 - np.cumsum(h_counts) / n_obs  # P(L(0) > n)
    comp = np.asarray(c_counts)
    max_c = int(comp.max()) if len(comp) and comp.max() > 0 else 0
    comp_tail = np.array([np.mean(comp >= n) for n in range(1, max_c + 1)])
    # fit over levels backed by enough observations
    ns = np.nonzero(height_tail * n_obs >= min_observations)[0]
    if len(ns) >= 2:
        alpha_hat, r2 = _log_linear_fit(ns.astype(float), height_tail[ns])
    else:
        alpha_hat, r2 = math.inf, 1.0
    cns = np.nonzero(comp_tail * len(comp) >= min_observations)[0] + 1
    if len(cns) >= 1:
        rates = -np.log(comp_tail[cns - 1]) / cns
        gamma_hat, lambda_hat = float(rates.min()), float(rates.max())
    else:
        gamma_hat, lambda_hat = math.inf, math.inf
    return TailReport(
        p=p,
        width=width,
        samples=samples,
        failures=failures,
        height_tail=height_tail,
        comp_tail=comp_tail,
        alpha_hat=alpha_hat,
        r2_height=r2,
        gamma_hat=gamma_hat,
        lambda_hat=lambda_hat,
        density=float(np.mean(densities)),
    )


def lss_threshold(k: int) -> float:
    """Density above which a k-dependent field dominates a product field:
    1 - k^k / (k+1)^(k+1)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return 1.0 - k**k / float((k + 1) ** (k + 1))


def clears_domination_threshold(density: float, k: int = 4) -> bool:
    """Annotation for imported coarse-grained fields (boxes are 4-dependent)."""
    return density > lss_threshold(k)
