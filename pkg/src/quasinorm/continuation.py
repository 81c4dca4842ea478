"""Warm-started solve sequences as the grad-4 regularization is switched off."""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield, replace
from typing import Optional, Sequence

import numpy as np

from .model import InvalidConfig, Params, RadialField, multiplier
from .flow import FlowConfig, SolveReport, _report, descend, minimize_global
from .fileio import write_csv

KINDS = ("global-min", "local-min", "mountain-pass")


def mu_schedule(mu0: float, factor: float, mu_min: float) -> list[float]:
    """Geometric ladder ``mu0, mu0*factor, ...`` down to ``mu_min``."""
    if not 0 < factor < 1:
        raise InvalidConfig(f"factor must lie in (0, 1), got {factor}")
    if not (mu0 >= mu_min > 0):
        raise InvalidConfig("need mu0 >= mu_min > 0")
    n = int(math.ceil(math.log(mu0 / mu_min) / math.log(1.0 / factor) - 1e-9)) + 1
    out = [mu0 * factor**k for k in range(n)]
    out[-1] = max(out[-1], mu_min) if n > 1 else mu0
    if n > 1 and abs(out[-1] / mu_min - 1) < 1e-9:
        out[-1] = mu_min
    return out


@dataclass(frozen=True)
class TraceRow:
    mu: float
    J: float
    mu_grad4: float
    lam: float
    mass: float
    grad2: float
    quasi: float
    pot: float
    status: str


@dataclass(frozen=True)
class ContinuationTrace:
    kind: str
    rows: tuple
    final: Optional[SolveReport] = dfield(default=None, repr=False)
    flags: tuple = ()

    def __post_init__(self):
        mus = [r.mu for r in self.rows]
        if any(b >= a for a, b in zip(mus, mus[1:])):
            raise ValueError("mu must be strictly decreasing along a trace")

    @property
    def complete(self) -> bool:
        return all(r.status == "converged" for r in self.rows)

    def lam_steps(self) -> list[float]:
        lam = [r.lam for r in self.rows]
        return [abs(b - a) for a, b in zip(lam, lam[1:])]

    def write_csv(self, path) -> None:
        write_csv(path, ("mu", "J", "mu_grad4", "lambda", "mass", "grad2", "quasi", "pot", "status"),
                  [(r.mu, r.J, r.mu_grad4, r.lam, r.mass, r.grad2, r.quasi, r.pot, r.status)
                   for r in self.rows])


def _row(rep: SolveReport) -> TraceRow:
    b = rep.breakdown
    return TraceRow(rep.mu, rep.J_value, rep.mu * b.grad4, rep.lam, b.mass, b.grad2, b.quasi,
                    b.pot, rep.status)


def _solve_one(kind: str, start: RadialField, params: Params, cfg: FlowConfig,
               k0: Optional[float]) -> SolveReport:
    if kind == "global-min":
        return descend(start, params, cfg)
    if kind == "local-min":
        return descend(start, params, cfg, k0=k0, classification="local-min")
    from .mpass import refine_peak

    return refine_peak(start, params, cfg)


def continue_solve(kind: str, params: Params, schedule: Sequence[float],
                   cfg: Optional[FlowConfig] = None, start: Optional[RadialField] = None,
                   k0: Optional[float] = None, grid=None) -> ContinuationTrace:
    """Solve at each mu of ``schedule`` warm-started from the previous row.

    ``start`` seeds the first row (required for the mountain-pass kind; the
    minimization kinds fall back to multi-start global minimization).
    A failed row truncates the trace; a non-negative multiplier is flagged.
    """
    if kind not in KINDS:
        raise InvalidConfig(f"unknown kind {kind!r}")
    if kind == "local-min" and k0 is None:
        raise InvalidConfig("local-min continuation needs the barrier level k0")
    cfg = cfg or FlowConfig()
    rows: list[TraceRow] = []
    flags: list[str] = []
    prev = start
    final = None
    for mu in schedule:
        prm = params.with_mu(mu)
        if prev is None:
            if kind == "mountain-pass":
                raise InvalidConfig("mountain-pass continuation needs a starting field")
            from .flow import default_grid

            rep = minimize_global(prm, grid or default_grid(params.N), cfg)
            if kind == "local-min":
                rep = descend(rep.field, prm, cfg, k0=k0, classification="local-min")
        else:
            rep = _solve_one(kind, prev, prm, cfg, k0)
        rows.append(_row(rep))
        if not rep.converged or rep.classification == "failed":
            flags.append(f"row mu={mu:.3g} failed ({rep.status})")
            break
        if rep.lam >= 0:
            flags.append(f"nonnegative multiplier at mu={mu:.3g}")
        prev = rep.field
        final = rep
    return ContinuationTrace(kind, tuple(rows), final, tuple(flags))


def is_nonincreasing(u: RadialField, slack: float = 1e-8) -> bool:
    v = u.values
    return bool(np.all(np.diff(v) <= slack * max(abs(v).max(), 1.0)))


def classify_limit(trace: ContinuationTrace, params: Params, cpn: Optional[float] = None,
                   reference_J: Optional[float] = None) -> SolveReport:
    """Evaluate the last field at mu = 0 and check it against the sign table.

    With ``cpn`` given the energy sign must match the position of c relative
    to the threshold (positive below for local minima, negative above for
    global minima, positive for mountain-pass); ``reference_J`` is a minimizer
    energy at the same mass that a mountain-pass energy must exceed.
    """
    if trace.final is None:
        raise ValueError("trace has no converged row")
    u = trace.final.field
    prm = params.with_mu(0.0)
    lam0 = multiplier(u, 0.0, params.p)
    rep = _report(u, prm, lam0, 0, trace.kind, "converged", math.nan)
    notes = []
    J = rep.J_value
    c = params.c
    ok = rep.lam < 0
    if not ok:
        notes.append("multiplier not negative")
    if not is_nonincreasing(u):
        ok = False
        notes.append("profile not non-increasing")
    if cpn is not None:
        if trace.kind == "global-min" and c > cpn and not J < 0:
            ok = False
            notes.append("global minimum above threshold should have J < 0")
        if trace.kind == "local-min" and c < cpn and not J > 0:
            ok = False
            notes.append("local minimum below threshold should have J > 0")
    if trace.kind == "mountain-pass":
        if not J > 0:
            ok = False
            notes.append("mountain-pass energy should be positive")
        if reference_J is not None and not J > reference_J:
            ok = False
            notes.append("mountain-pass energy should exceed the minimizer energy")
    if not ok:
        return replace(rep, classification="failed", status="misclassified", notes=tuple(notes))
    return replace(rep, notes=tuple(notes))
