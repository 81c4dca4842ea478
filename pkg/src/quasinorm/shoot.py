"""Radial shooting for the semilinear dual equation and power-tail analysis.

The profile solves ``v'' + (N-1)/r v' + rhs(v) = 0`` with ``v(0) = v0``,
``v'(0) = 0`` and ``rhs = f'(v)(|f(v)|^{p-1} f(v) + lam f(v))``.  The ground
state is the amplitude separating the two behaviours

* too high: the profile crosses zero;
* too low: it stays positive and either turns back up (lam < 0) or levels
  off at a positive constant (lam = 0, detected through
  ``v + r v'/(N-2)`` at the outer radius).

For lam < 0 the decaying tail is continued beyond the radius where round-off
in v0 lets the growing mode take over, by re-shooting on the slope from an
interior matching radius.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp, cumulative_trapezoid, trapezoid

from .model import RadialField, build_grid, surface_measure
from .dual import DualTransform, f_eval, f_scalar, kernel_K
from .fileio import write_csv


class BracketError(ValueError):
    pass


class ShootingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ShootConfig:
    lam: float
    v0_bracket: tuple = (0.1, 10.0)
    r_max: float = 200.0
    step: float = 0.01
    zero_tolerance: float = 1e-8
    max_bisect: int = 200
    rtol: float = 1e-11
    atol: float = 1e-16

    def __post_init__(self):
        lo, hi = self.v0_bracket
        if not 0 < lo < hi:
            raise ValueError("need 0 < low < high amplitude bracket")
        if not self.step > 0 or not self.r_max > 0:
            raise ValueError("step and r_max must be positive")
        if self.lam > 0:
            raise ValueError("shooting is set up for lam <= 0")


def _rhs_factory(t: DualTransform, lam: float, p: float, N: int):
    def rhs(r, y):
        v, w = y
        fv = f_scalar(t, v)
        src = (abs(fv) ** (p - 1) * fv + lam * fv) / math.sqrt(1.0 + 2.0 * fv * fv)
        return [w, -(N - 1) / r * w - src]

    return rhs


def _crossed(r, y):
    return y[0]


_crossed.terminal = True
_crossed.direction = -1


def _turned(r, y):
    return y[1]


_turned.terminal = True
_turned.direction = 1


def _blowup(r, y):
    return abs(y[0]) - 1e8


_blowup.terminal = True


def _start(t: DualTransform, v0: float, lam: float, p: float, N: int, r0: float):
    fv = f_scalar(t, v0)
    src = (abs(fv) ** (p - 1) * fv + lam * fv) / math.sqrt(1.0 + 2.0 * fv * fv)
    return [v0 - src * r0 * r0 / (2 * N), -src * r0 / N]


def shoot(t: DualTransform, p: float, N: int, lam: float, y0, r0: float, r1: float,
          rtol: float = 1e-11, atol: float = 1e-16, dense: bool = False):
    events = [_crossed, _blowup] + ([_turned] if lam < 0 else [])
    sol = solve_ivp(_rhs_factory(t, lam, p, N), (r0, r1), y0, method="DOP853",
                    rtol=rtol, atol=atol, events=events, dense_output=dense)
    outcome = "reached"
    if sol.status == 1:
        if len(sol.t_events[0]):
            outcome = "crossed"
        elif len(sol.t_events[1]):
            outcome = "blowup"
        else:
            outcome = "turned"
    return sol, outcome


def _too_low(sol, outcome: str, N: int, lam: float) -> Optional[bool]:
    if outcome == "crossed":
        return False
    if outcome == "turned":
        return True
    if outcome == "blowup":
        return None
    v, w = sol.y[0, -1], sol.y[1, -1]
    r = sol.t[-1]
    if lam == 0.0:
        return bool(v + r * w / (N - 2) > 0)
    return bool(w + math.sqrt(-lam) * v > 0)


def integrate_radial(cfg: ShootConfig, v0: float, t: DualTransform, p: float, N: int) -> RadialField:
    """Single shot sampled on the uniform grid ``step``; zero past a sign change."""
    if not v0 > 0:
        raise ValueError("v0 must be positive")
    r0 = 1e-6
    sol, outcome = shoot(t, p, N, cfg.lam, _start(t, v0, cfg.lam, p, N, r0), r0, cfg.r_max,
                         cfg.rtol, cfg.atol, dense=True)
    if outcome == "blowup":
        raise ShootingError("profile blew up")
    grid = build_grid(N, cfg.r_max, int(round(cfg.r_max / cfg.step)))
    r = grid.r
    vals = np.zeros_like(r)
    m = (r >= r0) & (r <= sol.t[-1])
    vals[m] = sol.sol(r[m])[0]
    vals[r < r0] = v0
    if outcome == "crossed":
        vals[r > sol.t[-1]] = 0.0
    else:
        vals[r > sol.t[-1]] = sol.y[0, -1]
    return RadialField(grid, vals)


@dataclass(frozen=True)
class GroundProfile:
    r: np.ndarray = dfield(repr=False)
    v: np.ndarray = dfield(repr=False)
    dv: np.ndarray = dfield(repr=False)
    v0: float
    lam: float
    p: float
    N: int
    segments: int = 1

    def on_grid(self, r_max: float, step: float) -> RadialField:
        grid = build_grid(self.N, r_max, int(round(r_max / step)))
        vals = np.interp(grid.r, self.r, self.v, right=0.0)
        return RadialField(grid, vals)


def _bisect(fire, lo: float, hi: float, max_iter: int):
    """Bisection on a monotone predicate ``fire(x) -> too_low``."""
    sol_lo = sol_hi = None
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi) or hi - lo < 1e-14 * abs(mid):
            break
        low, sol = fire(mid)
        if low is None:
            hi = mid
            continue
        if low:
            lo, sol_lo = mid, sol
        else:
            hi, sol_hi = mid, sol
    return lo, hi, sol_lo, sol_hi


def _agree_until(s_lo, s_hi, rel: float = 1e-3) -> float:
    """Largest radius up to which two bracketing shots agree to ``rel``."""
    r_end = min(s_lo.t[-1], s_hi.t[-1])
    rr = np.linspace(s_lo.t[0], r_end, 4000)
    a = s_lo.sol(rr)[0]
    b = s_hi.sol(rr)[0]
    bad = np.abs(a - b) > rel * np.maximum(np.abs(a), np.abs(b))
    return float(rr[np.argmax(bad)]) if bad.any() else float(r_end)


def ground_state(cfg: ShootConfig, t: DualTransform, p: float, N: int,
                 max_segments: int = 40) -> GroundProfile:
    """Positive decreasing ground state by amplitude bisection (plus slope
    re-shooting along the exponential tail when lam < 0)."""
    lam = cfg.lam
    if lam == 0.0 and N < 3:
        raise ValueError("the zero-frequency problem needs N >= 3")
    r0 = 1e-6

    def fire_v0(v0):
        sol, out = shoot(t, p, N, lam, _start(t, v0, lam, p, N, r0), r0, cfg.r_max,
                         cfg.rtol, cfg.atol, dense=True)
        return _too_low(sol, out, N, lam), sol

    lo, hi = cfg.v0_bracket
    low_lo, _ = fire_v0(lo)
    low_hi, _ = fire_v0(hi)
    if not (low_lo is True and low_hi is False):
        raise BracketError(f"bracket {cfg.v0_bracket} does not separate the two behaviours")
    lo, hi, s_lo, s_hi = _bisect(fire_v0, lo, hi, cfg.max_bisect)
    v0 = 0.5 * (lo + hi)
    if s_lo is None or s_hi is None:
        raise ShootingError("bisection produced no bracketing shots")
    rs, vs, ws = [], [], []
    segments = 1
    while True:
        r_ok = _agree_until(s_lo, s_hi)
        cut = r_ok if lam < 0 else min(s_lo.t[-1], s_hi.t[-1])
        rr = np.arange(s_lo.t[0], cut, cfg.step / 4)
        y = s_lo.sol(rr) if lam < 0 else 0.5 * (s_lo.sol(rr) + s_hi.sol(rr))
        rs.append(rr)
        vs.append(y[0])
        ws.append(y[1])
        done = (lam == 0.0 or cut >= cfg.r_max * (1 - 1e-12) or y[0, -1] < cfg.zero_tolerance
                or segments >= max_segments)
        if done:
            break
        # restart at 0.9*cut on the slope, keeping v fixed
        r1 = s_lo.t[0] + 0.9 * (cut - s_lo.t[0])
        rs[-1], vs[-1], ws[-1] = rr[rr < r1], y[0][rr < r1], y[1][rr < r1]
        va = float(0.5 * (s_lo.sol(r1)[0] + s_hi.sol(r1)[0]))
        wa = float(0.5 * (s_lo.sol(r1)[1] + s_hi.sol(r1)[1]))
        kappa = math.sqrt(-lam)

        def fire_w(w, r1=r1, va=va):
            # a steeper slope crosses, so "crosses" plays the role of too-low in w
            sol, out = shoot(t, p, N, lam, [va, w], r1, cfg.r_max, cfg.rtol, cfg.atol, dense=True)
            low = _too_low(sol, out, N, lam)
            return (None if low is None else not low), sol

        wlo, whi = wa - 0.5 * kappa * va, wa + 0.5 * kappa * va
        if not (fire_w(wlo)[0] is True and fire_w(whi)[0] is False):
            break
        _, _, s_cross, s_turn = _bisect(fire_w, wlo, whi, cfg.max_bisect)
        if s_cross is None or s_turn is None:
            break
        s_lo_w, s_hi_w = s_turn, s_cross
        s_lo, s_hi = s_lo_w, s_hi_w
        segments += 1
    r = np.concatenate(rs)
    v = np.concatenate(vs)
    dv = np.concatenate(ws)
    return GroundProfile(r, v, dv, v0, lam, p, N, segments)


def find_ground(cfg: ShootConfig, t: DualTransform, p: float, N: int) -> RadialField:
    """Ground-state profile sampled on the uniform grid of spacing ``cfg.step``."""
    prof = ground_state(cfg, t, p, N)
    return prof.on_grid(cfg.r_max, cfg.step)


# --- tail analysis ---------------------------------------------------------------

@dataclass(frozen=True)
class DecayReport:
    slope: float
    C_fit: float
    C_integral: float
    window: tuple
    r: np.ndarray = dfield(repr=False)
    a_r: np.ndarray = dfield(repr=False)
    b_r: np.ndarray = dfield(repr=False)
    A_r: np.ndarray = dfield(repr=False)
    v: np.ndarray = dfield(repr=False)
    dv: np.ndarray = dfield(repr=False)

    @property
    def ratio(self) -> float:
        return self.C_fit / self.C_integral

    def write_csv(self, path) -> None:
        write_csv(path, ("r", "v", "dv", "a", "b", "A"),
                  zip(self.r.tolist(), self.v.tolist(), self.dv.tolist(), self.a_r.tolist(),
                      self.b_r.tolist(), self.A_r.tolist()))


def _profile_arrays(v, N: int):
    if isinstance(v, GroundProfile):
        return v.r, v.v, v.dv
    r = v.grid.r
    vals = v.values.copy()
    vals[-1] = vals[-2] + (vals[-2] - vals[-3])  # undo the forced boundary zero
    return r, vals, np.gradient(vals, r)


def decay_fit(v, t: DualTransform, p: float, N: int, window: Optional[tuple] = None) -> DecayReport:
    """Power-tail fit of a zero-frequency profile.

    ``C_integral`` is the tail constant implied by integrating
    ``(r^{N-2} a)' = 2(N-1) r^{N-3} b`` to infinity, i.e.
    ``C^2 = 4(N-1)|S^{N-1}|/(p+1) * int_{R^N} |x|^{N-2} f(v)^{p+1} dx``.
    """
    if N < 3:
        raise ValueError("power tails need N >= 3")
    r, vv, dv = _profile_arrays(v, N)
    r_end = r[-1]
    lo, hi = window if window is not None else (r_end / 10, r_end / 2)
    if not (r[0] <= lo < hi <= r_end):
        raise ValueError("window outside the profile range")
    m = (r >= lo) & (r <= hi) & (vv > 0)
    slope = float(np.polyfit(np.log(r[m]), np.log(vv[m]), 1)[0])
    C_fit = float(np.mean(vv[m] / kernel_K(r[m], N)))
    fv = np.asarray(f_eval(t, np.maximum(vv, 0.0)))
    S = surface_measure(N)
    integrand = r ** (2 * N - 3) * fv ** (p + 1)
    integral = S * float(trapezoid(integrand, r))
    C_integral = math.sqrt(4 * (N - 1) * S / (p + 1) * integral)
    a = r**N * (dv**2 + 2 * fv ** (p + 1) / (p + 1))
    b = 2 * r**N * fv ** (p + 1) / (p + 1)
    A = np.maximum.accumulate(a[::-1])[::-1]
    return DecayReport(slope, C_fit, C_integral, (lo, hi), r, a, b, A, vv, dv)


def pohozaev_flux_residual(prof: GroundProfile, t: DualTransform) -> np.ndarray:
    """Pointwise residual of
    ``d/dr[r^N(v'^2 + 2F)] + r^{N-1}[(N-2) v'^2 - 2N F]`` with ``F = f^{p+1}/(p+1)``,
    scaled by the local size of the terms.  The derivative is taken
    through the ODE, so the residual measures how well (v, v') solve it."""
    r, v, dv, N, p, lam = prof.r, prof.v, prof.dv, prof.N, prof.p, prof.lam
    fv = np.asarray(f_eval(t, np.maximum(v, 0.0)))
    fp = 1.0 / np.sqrt(1.0 + 2.0 * fv * fv)
    F = fv ** (p + 1) / (p + 1)
    rhs = fp * (fv**p + lam * fv)
    d2v = -(N - 1) / r * dv - rhs
    terms = np.stack([
        N * r ** (N - 1) * (dv**2 + 2 * F),
        2 * r**N * dv * d2v,
        2 * r**N * fv**p * fp * dv,
        r ** (N - 1) * (N - 2) * dv**2,
        -2 * N * r ** (N - 1) * F,
    ])
    if lam != 0.0:
        # the lam part of the source does not belong to the zero-frequency identity
        terms[1] += 2 * r**N * dv * lam * fv * fp
    return terms.sum(0) / np.maximum(np.abs(terms).sum(0), 1e-300)


def tail_rate(prof: GroundProfile, window: tuple) -> float:
    """Fitted exponential rate of ``r^{(N-1)/2} v`` over ``window`` (the
    algebraic prefactor of the decaying radial mode removed)."""
    lo, hi = window
    m = (prof.r >= lo) & (prof.r <= hi) & (prof.v > 0)
    if m.sum() < 3:
        raise ValueError("window outside the profile range")
    y = np.log(prof.r[m] ** ((prof.N - 1) / 2) * prof.v[m])
    return float(-np.polyfit(prof.r[m], y, 1)[0])


def l2_membership(v, N: int, windows: int = 4) -> bool:
    """Whether ``int r^{N-1} v^2`` converges, judged from the ratios of the
    integrals over consecutive doubling windows ending at the outer radius."""
    if isinstance(v, GroundProfile):
        r, vals = v.r, v.v
    else:
        r, vals = v.grid.r, v.values
    R = r[-1]
    edges = R / 2.0 ** np.arange(windows, -1, -1)
    dens = r ** (N - 1) * vals**2
    cum = np.concatenate(([0.0], cumulative_trapezoid(dens, r)))
    I = np.diff(np.interp(edges, r, cum))
    ratios = [I[k + 1] / I[k] for k in range(len(I) - 1) if I[k] > 0]
    if not ratios:
        return True
    return bool(np.mean(ratios[-2:]) < 0.75)
