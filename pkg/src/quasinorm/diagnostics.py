"""Integral identities, fixed-frequency energies and multiplier asymptotics.

Every identity is evaluated from the five breakdown integrals, so the same
code serves exact algebraic checks on arbitrary fields and accuracy checks on
computed solutions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import (
    EnergyBreakdown,
    RadialField,
    breakdown,
    J_mu,
)
from .fileio import write_csv

EPS_FLOOR = 1e-12
DEFAULT_TOL = 1e-3


@dataclass(frozen=True)
class IdentityReport:
    name: str
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    tolerance: float
    passed: bool
    note: str = ""

    @classmethod
    def build(cls, name, lhs, rhs, tolerance=DEFAULT_TOL, scale=None, note=""):
        lhs, rhs = float(lhs), float(rhs)
        a = abs(lhs - rhs)
        s = max(abs(lhs), abs(rhs), EPS_FLOOR) if scale is None else max(scale, EPS_FLOOR)
        rel = a / s
        return cls(name, lhs, rhs, a, rel, tolerance, bool(rel < tolerance), note)

    @property
    def signed(self) -> float:
        return self.lhs - self.rhs


def _bd(u: RadialField, p: float) -> EnergyBreakdown:
    return breakdown(u, p)


def pohozaev_terms(b: EnergyBreakdown, lam: float, p: float, N: int, mu: float = 0.0):
    """(lhs, rhs) of the dilation identity with the optional grad-4 term."""
    lhs = (
        mu * (N - 4) / (4.0 * N) * b.grad4
        + (N - 2) / N * (0.5 * b.grad2 + b.quasi)
        - 0.5 * lam * b.mass
    )
    rhs = b.pot / (p + 1)
    return lhs, rhs


def pohozaev_residual(u: RadialField, lam: float, p: float, N: int,
                      tolerance: float = DEFAULT_TOL) -> IdentityReport:
    """``(N-2)/N (grad2/2 + quasi) - lam/2 mass = pot/(p+1)``."""
    lhs, rhs = pohozaev_terms(_bd(u, p), lam, p, N)
    return IdentityReport.build("pohozaev", lhs, rhs, tolerance)


def perturbed_pohozaev_residual(u: RadialField, beta: float, mu: float, p: float, N: int,
                                tolerance: float = DEFAULT_TOL) -> IdentityReport:
    lhs, rhs = pohozaev_terms(_bd(u, p), beta, p, N, mu)
    return IdentityReport.build("pohozaev_mu", lhs, rhs, tolerance)


def nehari_residual(u: RadialField, lam: float, p: float, mu: float = 0.0,
                    tolerance: float = DEFAULT_TOL) -> IdentityReport:
    """``mu grad4 + grad2 + 4 quasi = lam mass + pot`` (testing the equation by u)."""
    b = _bd(u, p)
    lhs = mu * b.grad4 + b.grad2 + 4.0 * b.quasi
    rhs = lam * b.mass + b.pot
    return IdentityReport.build("nehari", lhs, rhs, tolerance)


def multiplier_coefficients(p: float, N: int) -> tuple[float, float]:
    """(A, B) with ``lam mass = A grad2 + 2 B quasi`` at critical points (mu = 0)."""
    d = N * (p - 1.0)
    return ((N - 2) * p - (N + 2)) / d, ((N - 2) * p - (3 * N + 2)) / d


def multiplier_combination(p: float) -> tuple[float, float]:
    """(a, b) with the multiplier residual = a * pohozaev + b * nehari (signed residuals)."""
    return -2.0 * (p + 1) / (p - 1), 2.0 / (p - 1)


def multiplier_residual(u: RadialField, lam: float, p: float, N: int,
                 tolerance: float = DEFAULT_TOL) -> IdentityReport:
    """Multiplier reconstructed from grad2 and quasi alone."""
    b = _bd(u, p)
    A, B = multiplier_coefficients(p, N)
    return IdentityReport.build("multiplier", lam * b.mass, A * b.grad2 + 2 * B * b.quasi, tolerance)


def reconstructed_multiplier(u: RadialField, p: float, N: int) -> float:
    b = _bd(u, p)
    A, B = multiplier_coefficients(p, N)
    return (A * b.grad2 + 2 * B * b.quasi) / b.mass


def energy_identity_residual(u: RadialField, beta: float, mu: float, p: float, N: int,
                             tolerance: float = DEFAULT_TOL) -> IdentityReport:
    """``J_mu = mu/N grad4 + (grad2 + 2 quasi)/N + beta/2 mass``.

    The signed residual equals the signed ``pohozaev_mu`` residual exactly.
    """
    b = _bd(u, p)
    rhs = mu / N * b.grad4 + (b.grad2 + 2 * b.quasi) / N + 0.5 * beta * b.mass
    return IdentityReport.build("energy", J_mu(b, mu, p), rhs, tolerance)


def identity_suite(u: RadialField, lam: float, mu: float, p: float, N: int,
                   tolerance: float = DEFAULT_TOL) -> list[IdentityReport]:
    """All identities applicable to a critical point of J_mu with multiplier lam."""
    out = [
        perturbed_pohozaev_residual(u, lam, mu, p, N, tolerance),
        nehari_residual(u, lam, p, mu, tolerance),
        energy_identity_residual(u, lam, mu, p, N, tolerance),
    ]
    if mu == 0.0:
        out[0] = pohozaev_residual(u, lam, p, N, tolerance)
        out.append(multiplier_residual(u, lam, p, N, tolerance))
    return out


def write_identity_csv(path, reports: Sequence[IdentityReport]) -> None:
    write_csv(
        path,
        ("name", "lhs", "rhs", "abs_residual", "rel_residual", "tolerance", "pass"),
        [(r.name, r.lhs, r.rhs, r.abs_residual, r.rel_residual, r.tolerance, int(r.passed))
         for r in reports],
    )


def summary(reports: Sequence[IdentityReport]) -> str:
    lines = []
    for r in reports:
        flag = "PASS" if r.passed else "FAIL"
        lines.append(f"{flag} {r.name:12s} rel={r.rel_residual:.3e} tol={r.tolerance:.1e}")
    return "\n".join(lines)


def observed_order(coarse: float, fine: float, ratio: float = 2.0) -> float:
    """Convergence order from errors at h and h/ratio."""
    if coarse <= 0 or fine <= 0:
        return math.inf
    return math.log(coarse / fine) / math.log(ratio)


# --- fixed-frequency energy and ground states --------------------------------

def fixed_lambda_energy(u: RadialField, lam: float, p: float) -> float:
    """``I_lam(u) = grad2/2 - lam/2 mass + quasi - pot/(p+1)``."""
    b = _bd(u, p)
    return 0.5 * b.grad2 - 0.5 * lam * b.mass + b.quasi - b.pot / (p + 1)


def t_profile(b: EnergyBreakdown, lam: float, p: float, N: int, t):
    """``I_lam(u(./t))`` directly from the scaled integrals."""
    t = np.asarray(t, dtype=float)
    return t ** (N - 2) * (0.5 * b.grad2 + b.quasi) - t**N * (0.5 * lam * b.mass + b.pot / (p + 1))


def t_profile_closed(b: EnergyBreakdown, N: int, t):
    """Profile after eliminating lam and pot with the dilation identity."""
    t = np.asarray(t, dtype=float)
    return (t ** (N - 2) - (N - 2) / N * t**N) * (0.5 * b.grad2 + b.quasi)


@dataclass(frozen=True)
class GroundStateComparison:
    lam: float
    I_value_minimizer: float
    I_value_shooting: float
    t: np.ndarray
    t_profile: np.ndarray
    t_profile_closed: np.ndarray
    t0: float
    I_value_t0: float
    t_peak: float
    skipped: bool = False

    @property
    def rel_gap(self) -> float:
        a, b = self.I_value_minimizer, self.I_value_shooting
        return abs(a - b) / max(abs(a), abs(b), EPS_FLOOR)

    @property
    def ordering_ok(self) -> bool:
        """``I(minimizer) <= I(u_t0) <= I(shooting)`` up to a relative slack."""
        s = 1e-3 * max(abs(self.I_value_shooting), EPS_FLOOR)
        return (self.I_value_t0 <= self.I_value_shooting + s
                and self.I_value_minimizer <= self.I_value_t0 + s)


def groundstate_compare(minimizer, shooting_solution: RadialField, p: float, N: int,
                        c: Optional[float] = None, t_grid=None) -> GroundStateComparison:
    """Compare ``I_beta`` of a constrained minimizer and a fixed-frequency solution.

    ``minimizer`` is a ``SolveReport`` (its multiplier is beta).  For N = 1
    the comparison is skipped: positive solutions at fixed frequency are
    unique, so both candidates coincide.
    """
    lam = float(minimizer.lam)
    u = minimizer.field
    c = u.mass() if c is None else c
    bs = _bd(shooting_solution, p)
    t = np.linspace(0.5, 1.5, 1001) if t_grid is None else np.asarray(t_grid, float)
    prof = t_profile(bs, lam, p, N, t)
    closed = t_profile_closed(bs, N, t)
    Im = fixed_lambda_energy(u, lam, p)
    Is = fixed_lambda_energy(shooting_solution, lam, p)
    t0 = (c / bs.mass) ** (1.0 / N)
    if not (t[0] <= t0 <= t[-1]):
        raise ValueError(f"mass-matching dilation t0={t0:.4g} outside the profile range")
    It0 = float(t_profile(bs, lam, p, N, t0))
    t_peak = float(t[int(np.argmax(prof))])
    return GroundStateComparison(lam, Im, Is, t, prof, closed, t0, It0, t_peak, skipped=(N == 1))


# --- multiplier asymptotics ---------------------------------------------------

@dataclass(frozen=True)
class AsymptoticScaling:
    alpha: float
    beta: float
    lambda1: float
    lambda2: float
    lambda3: float

    @classmethod
    def of(cls, p: float, N: int) -> "AsymptoticScaling":
        d = 3 * N + 4 - N * p
        if d <= 0:
            raise ValueError("requires p < 3 + 4/N")
        return cls(
            1.0 / d,
            (p - (3 + 2.0 / N)) / d,
            (2 * p - 6 - 4.0 / N) / d,
            (2 * p - 4 - 4.0 / N) / d,
            (p - 1) / d,
        )

    def holds(self) -> bool:
        return self.lambda3 > 0 and self.lambda3 > max(self.lambda1, self.lambda2)


@dataclass(frozen=True)
class AsymptoticRow:
    c: float
    m: float
    beta: float
    status: str


@dataclass(frozen=True)
class AsymptoticTable:
    rows: list
    scaling: AsymptoticScaling

    @property
    def beta_strictly_decreasing(self) -> bool:
        b = [r.beta for r in self.rows]
        return all(y < x for x, y in zip(b, b[1:]))

    @property
    def m_over_c_strictly_decreasing(self) -> bool:
        q = [r.m / r.c for r in self.rows]
        return all(y < x for x, y in zip(q, q[1:]))

    def beta_growth(self) -> list[float]:
        b = [r.beta for r in self.rows]
        return [abs(y) / abs(x) for x, y in zip(b, b[1:])]


def multiplier_asymptotics(p: float, N: int, c_ladder: Sequence[float], flow_cfg=None,
                           grid=None) -> AsymptoticTable:
    """Global minimization along a mass ladder, with the analytic exponents."""
    from . import flow
    from .model import Params

    scaling = AsymptoticScaling.of(p, N)
    rows = []
    for c in c_ladder:
        g = grid if grid is not None else flow.default_grid(N, p, c)
        rep = flow.minimize_global(Params(N, p, c), g, flow_cfg)
        rows.append(AsymptoticRow(c, rep.J_value, rep.lam, rep.status))
    return AsymptoticTable(rows, scaling)


# --- sign checks --------------------------------------------------------------

def covered_regime(p: float, N: int) -> bool:
    """Range where nontrivial solutions require a negative multiplier."""
    return N <= 4 or p <= (N + 2) / (N - 2)


def nonexistence_check(report, p: float, N: int, tolerance: float = DEFAULT_TOL) -> IdentityReport:
    """Negative multiplier in the covered range plus agreement with the reconstructed multiplier."""
    lam = float(report.lam)
    lam3 = reconstructed_multiplier(report.field, p, N)
    rep = IdentityReport.build("multiplier_sign", lam, lam3, tolerance)
    if not covered_regime(p, N):
        return IdentityReport(rep.name, rep.lhs, rep.rhs, rep.abs_residual, rep.rel_residual,
                              tolerance, True, "outside-theorem")
    ok = rep.passed and lam < 0
    return IdentityReport(rep.name, rep.lhs, rep.rhs, rep.abs_residual, rep.rel_residual,
                          tolerance, ok, "" if lam < 0 else "nonnegative multiplier")
