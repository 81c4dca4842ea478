"""Normalized solutions of a quasilinear Schrodinger equation on radial grids.

Modules: ``model`` (grid, functionals, file format), ``dual`` (change of
unknown to a semilinear problem), ``shoot`` (radial ODE shooting and tail
analysis), ``flow`` (constrained minimization), ``mpass`` (mountain-pass
saddles), ``continuation`` (mu -> 0 sequences), ``diagnostics`` (identities
and sign checks) and ``cli``.
"""
from .model import (
    InvalidConfig,
    Params,
    RadialField,
    RadialGrid,
    breakdown,
    build_grid,
    energy,
    multiplier,
    normalize,
    read_solution,
    write_solution,
)
from .flow import FlowConfig, SolveReport, estimate_cpn, minimize_global, minimize_local
from .mpass import MPConfig, mountain_pass
from .continuation import continue_solve, mu_schedule
from .dual import build_transform
from .shoot import ShootConfig, decay_fit, ground_state

__version__ = "0.1.0"

__all__ = [
    "FlowConfig",
    "InvalidConfig",
    "MPConfig",
    "Params",
    "RadialField",
    "RadialGrid",
    "ShootConfig",
    "SolveReport",
    "breakdown",
    "build_grid",
    "build_transform",
    "continue_solve",
    "decay_fit",
    "energy",
    "estimate_cpn",
    "ground_state",
    "minimize_global",
    "minimize_local",
    "mountain_pass",
    "mu_schedule",
    "multiplier",
    "normalize",
    "read_solution",
    "write_solution",
]
