"""Reproducible i.i.d. disorder fields keyed by (seed, time, height), their
exact cumulant generating functions, and the overlap coupling function.

Values are produced by a counter-based hash of the lattice coordinates, so any
site can be queried lazily in any order, and space-time shifts of the field
are exact by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import ndtri

_MASK = (1 << 64) - 1
_GOLD = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

_GOLD_U = np.uint64(_GOLD)
_MUL1_U = np.uint64(_MUL1)
_MUL2_U = np.uint64(_MUL2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S63 = np.uint64(63)
_S11 = np.uint64(11)
_TWO53 = float(2 ** 53)

FAMILIES = ("gaussian", "rademacher", "uniform")

_SQRT3 = math.sqrt(3.0)


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer (Python int arithmetic)."""
    z = (z + _GOLD) & _MASK
    z = ((z ^ (z >> 30)) * _MUL1) & _MASK
    z = ((z ^ (z >> 27)) * _MUL2) & _MASK
    return z ^ (z >> 31)


def _mix_u64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over a uint64 array."""
    z = z + _GOLD_U
    z = (z ^ (z >> _S30)) * _MUL1_U
    z = (z ^ (z >> _S27)) * _MUL2_U
    return z ^ (z >> _S31)


def child_seed(master_seed: int, index: int) -> int:
    """Derive the seed of replica ``index`` from a master seed.

    child = mix64(mix64(master) XOR index); recorded in run manifests so that
    every Monte Carlo replica is individually reproducible.
    """
    return mix64(mix64(master_seed & _MASK) ^ (index & _MASK))


@dataclass(frozen=True)
class DisorderSpec:
    """One of three mean-0 variance-1 disorder families with closed-form
    cumulant function: gaussian, rademacher (+-1), or uniform on
    [-sqrt(3), sqrt(3)]."""

    family: str

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown disorder family {self.family!r}")


def _log_sinhc(x: float) -> float:
    """log(sinh(x)/x) with the x -> 0 limit handled."""
    x = abs(x)
    if x < 0.05:
        x2 = x * x
        return x2 / 6.0 - x2 * x2 / 180.0 + x2 * x2 * x2 / 2835.0
    if x < 700.0:
        return math.log(math.sinh(x) / x)
    return x - math.log(2.0 * x) + math.log1p(-math.exp(-2.0 * x))


def log_mgf(spec: DisorderSpec, beta: float) -> float:
    """Cumulant generating function log E[exp(beta * v)] of one disorder value."""
    if spec.family == "gaussian":
        return 0.5 * beta * beta
    if spec.family == "rademacher":
        # log cosh(beta), stable for large |beta|
        b = abs(beta)
        return b + math.log1p(math.exp(-2.0 * b)) - math.log(2.0)
    return _log_sinhc(_SQRT3 * beta)


def overlap_coupling(spec: DisorderSpec, beta: float) -> float:
    """Coupling constant of the pair second moment: log_mgf(2b) - 2 log_mgf(b).

    Nonnegative by convexity; equals beta^2 exactly for gaussian disorder and
    asymptotically beta^2 for the other families as beta -> 0.
    """
    return log_mgf(spec, 2.0 * beta) - 2.0 * log_mgf(spec, beta)


@dataclass(frozen=True)
class Environment:
    """A lazily evaluated disorder field v(i, x), i >= 1, x in Z.

    ``origin`` shifts the logical coordinates: the value at (i, x) is the base
    field at (i + origin[0], x + origin[1]), so shifted copies agree with the
    base field bit for bit.
    """

    spec: DisorderSpec
    seed: int
    origin: Tuple[int, int] = (0, 0)

    def shifted(self, n: int, y: int) -> "Environment":
        """The field translated by n in time and y in height."""
        return Environment(self.spec, self.seed, (self.origin[0] + n, self.origin[1] + y))

    def _column_key(self, i: int) -> int:
        if i < 1:
            raise ValueError("time index must be >= 1")
        return mix64(mix64(self.seed & _MASK) ^ ((i + self.origin[0]) & _MASK))

    def _hash_column(self, i: int, xs: np.ndarray) -> np.ndarray:
        key = np.uint64(self._column_key(i))
        xv = np.asarray(xs, dtype=np.int64) + np.int64(self.origin[1])
        return _mix_u64(key ^ xv.view(np.uint64))

    def values(self, i: int, xs) -> np.ndarray:
        """Disorder values at time slice i for an array of heights."""
        h = self._hash_column(i, xs)
        fam = self.spec.family
        if fam == "rademacher":
            return 1.0 - 2.0 * (h >> _S63).astype(np.float64)
        u = ((h >> _S11).astype(np.float64) + 0.5) / _TWO53
        if fam == "gaussian":
            return ndtri(u)
        return _SQRT3 * (2.0 * u - 1.0)

    def value(self, i: int, x: int) -> float:
        """Single-site query; a pure function of (seed, i + n, x + y)."""
        return float(self.values(i, np.array([x], dtype=np.int64))[0])

    def boltzmann(self, i: int, xs, beta: float) -> np.ndarray:
        """exp(beta * v(i, x)) for an array of heights.

        Same bits as ``values``; the rademacher family takes a two-value
        lookup instead of an exp over the column.
        """
        if self.spec.family == "rademacher":
            h = self._hash_column(i, xs)
            return np.where(
                (h >> _S63).astype(bool), math.exp(-beta), math.exp(beta)
            )
        return np.exp(beta * self.values(i, xs))


class PatchedEnvironment:
    """An environment with finitely many site values overridden.

    Used for sensitivity checks (e.g. verifying that a coarse-grained site's
    classification does not depend on disorder outside its box).
    """

    def __init__(self, base: Environment, patches: dict):
        self.base = base
        self.spec = base.spec
        self.seed = base.seed
        self.patches = dict(patches)

    def shifted(self, n: int, y: int) -> "PatchedEnvironment":
        moved = {(i - n, x - y): v for (i, x), v in self.patches.items()}
        return PatchedEnvironment(self.base.shifted(n, y), moved)

    def values(self, i: int, xs) -> np.ndarray:
        out = self.base.values(i, xs)
        xs = np.asarray(xs)
        for (pi, px), v in self.patches.items():
            if pi == i:
                out = np.where(xs == px, v, out)
        return out

    def value(self, i: int, x: int) -> float:
        return float(self.values(i, np.array([x], dtype=np.int64))[0])

    def boltzmann(self, i: int, xs, beta: float) -> np.ndarray:
        return np.exp(beta * self.values(i, xs))
