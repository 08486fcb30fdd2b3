"""Numerical laboratory for the 1+1 dimensional directed polymer in a random
environment with a defect line: exact transfer-matrix partition engines,
homogeneous pinning free energy, coarse-grained open-site certificates for
quenched free-energy lower bounds, Lipschitz percolation, and seeded Monte
Carlo studies of the quenched-annealed gap and the depinning threshold."""

__version__ = "0.1.0"

from .disorder import DisorderSpec, Environment, child_seed, log_mgf, overlap_coupling
from .walks import SSRW, DifferenceWalk, PathConstraint, WalkPath, local_time, overlap

__all__ = [
    "DisorderSpec",
    "Environment",
    "PathConstraint",
    "SSRW",
    "DifferenceWalk",
    "WalkPath",
    "child_seed",
    "local_time",
    "log_mgf",
    "overlap",
    "overlap_coupling",
    "__version__",
]
