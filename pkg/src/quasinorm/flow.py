"""Minimization on the mass sphere.

Descent uses a Sobolev metric (the tridiagonal ``shift*M + K(u)``), a
tangential projection that keeps the direction orthogonal to the constraint
normal in that metric, renormalization of the mass, and Armijo backtracking.
Once the projected gradient is small a bordered Newton iteration on
``(J'(u) - lam M u, mass - c)`` polishes the critical point to round-off.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dfield, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.optimize import brentq

from .model import (
    EnergyBreakdown,
    InvalidConfig,
    Params,
    RadialField,
    RadialGrid,
    J_mu,
    Q_mu,
    barrier_value,
    breakdown,
    build_grid,
    dilate,
    dilation_profile,
    energy,
    energy_gradient,
    energy_hessian,
    euler_lagrange,
    field_from_function,
    format_solution,
    multiplier,
    normalize,
    stiffness_preconditioner,
)
from . import diagnostics
from .fileio import atomic_write_text, write_csv

UNBOUNDED_J = -1e12


class ConvergenceError(RuntimeError):
    pass


class NoRootError(RuntimeError):
    """Raised when the dilation fiber has no zero of Q in the search range."""


class CalibrationError(RuntimeError):
    pass


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class FlowConfig:
    tau: float = 1.0
    max_iters: int = 6000
    grad_tol: float = 1e-8
    q_tol: float = 1e-3
    backtrack: float = 0.5
    restarts: int = 3
    newton: bool = True
    switch_tol: float = 1e-5
    tau_max: float = 4.0
    shift_floor: float = 1.0
    newton_every: int = 200

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidConfig("step size must be positive")
        for name in ("grad_tol", "q_tol", "switch_tol", "shift_floor"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be positive")
        if not 0 < self.backtrack < 1:
            raise InvalidConfig("backtracking factor must lie in (0, 1)")
        if self.max_iters < 1 or self.restarts < 0 or self.newton_every < 1:
            raise InvalidConfig("iteration counts must be positive")


@dataclass(frozen=True)
class SolveReport:
    field: RadialField = dfield(repr=False)
    lam: float
    J_value: float
    Q_value: float
    pohozaev_residual: float
    iters: int
    classification: str
    mu: float
    c: float
    p: float = 3.0
    status: str = "converged"
    grad_norm: float = math.nan
    breakdown: Optional[EnergyBreakdown] = dfield(default=None, repr=False)
    notes: tuple = ()

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def barrier(self) -> float:
        return self.breakdown.grad2 + self.breakdown.quasi

    @property
    def Q_relative(self) -> float:
        b = self.breakdown
        return abs(self.Q_value) / max(b.grad2 + b.quasi, 1e-300)

    def relabel(self, classification: str, **kw) -> "SolveReport":
        return replace(self, classification=classification, **kw)

    def to_dict(self) -> dict:
        b = self.breakdown
        return {
            "classification": self.classification,
            "status": self.status,
            "N": self.field.grid.N,
            "p": self.p,
            "c": self.c,
            "mu": self.mu,
            "lambda": self.lam,
            "J": self.J_value,
            "Q": self.Q_value,
            "pohozaev_residual": self.pohozaev_residual,
            "grad_norm": self.grad_norm,
            "iters": self.iters,
            "breakdown": None if b is None else {
                "grad2": b.grad2, "grad4": b.grad4, "quasi": b.quasi, "pot": b.pot, "mass": b.mass,
            },
            "notes": list(self.notes),
        }

    def to_json(self, embed_solution: bool = True) -> str:
        d = self.to_dict()
        if embed_solution:
            d["solution"] = format_solution(
                self.field, Params(self.field.grid.N, self.p, self.c, self.mu)
            )
        return json.dumps(d, indent=2, sort_keys=True)

    def write_json(self, path, embed_solution: bool = True) -> None:
        atomic_write_text(path, self.to_json(embed_solution) + "\n")


def default_grid(N: int, p: float = 3.0, c: float = 1.0) -> RadialGrid:
    return build_grid(N, 40.0, 4000)


# --- elementary pieces -------------------------------------------------------

def _stationarity(u: RadialField, G: np.ndarray) -> float:
    w = u.grid.w
    return math.sqrt(float(np.sum(G[:-1] ** 2 / w[:-1]))) / u.l2()


def project_gradient(u: RadialField, mu: float, p: float) -> RadialField:
    """L2 gradient on the mass sphere: the Euler-Lagrange residual at the
    multiplier that makes it orthogonal to ``u``."""
    if u.mass() <= 0:
        raise ZeroDivisionError("projected gradient undefined for the zero field")
    return euler_lagrange(u, multiplier(u, mu, p), mu, p)


def _report(u: RadialField, params: Params, lam: float, iters: int, classification: str,
            status: str, grad_norm: float, notes=()) -> SolveReport:
    b = breakdown(u, params.p)
    N = u.grid.N
    poho = diagnostics.perturbed_pohozaev_residual(u, lam, params.mu, params.p, N)
    return SolveReport(
        field=u,
        lam=float(lam),
        J_value=J_mu(b, params.mu, params.p),
        Q_value=Q_mu(b, params.mu, params.p, N),
        pohozaev_residual=poho.rel_residual,
        iters=iters,
        classification=classification,
        mu=params.mu,
        c=params.c,
        p=params.p,
        status=status,
        grad_norm=grad_norm,
        breakdown=b,
        notes=tuple(notes),
    )


def _banded(P: sp.spmatrix) -> np.ndarray:
    m = P.shape[0]
    ab = np.zeros((3, m))
    ab[0, 1:] = P.diagonal(1)
    ab[1] = P.diagonal(0)
    ab[2, :-1] = P.diagonal(-1)
    return ab


def sobolev_direction(u: RadialField, G: np.ndarray, mu: float, shift: float) -> np.ndarray:
    """Preconditioned tangential direction ``d`` with ``<M u, d> = 0``."""
    g = u.grid
    ab = _banded(stiffness_preconditioner(u, mu, shift))
    Mu = (g.w * u.values)[:-1]
    rhs = np.column_stack([G[:-1], Mu])
    sol = sla.solve_banded((1, 1), ab, rhs)
    d, z = sol[:, 0], sol[:, 1]
    d = d - (np.dot(d, Mu) / np.dot(z, Mu)) * z
    return np.append(d, 0.0)


def newton_polish(u: RadialField, params: Params, lam: Optional[float] = None,
                  tol: float = 1e-11, max_iters: int = 30):
    """Bordered Newton on ``J'(u) - lam M u = 0, mass(u) = c``.

    Returns ``(u, lam, iters, residual, ok)``; ``u`` is renormalized to the
    exact mass at the end.  Divergent attempts return ``ok = False``.
    """
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _newton_polish(u, params, lam, tol, max_iters)


def _newton_polish(u, params, lam, tol, max_iters):
    g = u.grid
    mu, p, c = params.mu, params.p, params.c
    lam = multiplier(u, mu, p) if lam is None else lam
    Mw = g.w[:-1]
    nr = math.inf
    it = 0
    for it in range(max_iters + 1):
        F = energy_gradient(u, mu, p)[:-1] - lam * Mw * u.values[:-1]
        G = u.mass() - c
        nr = math.sqrt(float(np.sum(F**2 / Mw))) / u.l2()
        if not math.isfinite(nr):
            return u, lam, it, nr, False
        if nr < tol and abs(G) < 1e-12 * c:
            break
        if it == max_iters:
            break
        H = energy_hessian(u, mu, p) - lam * sp.diags(Mw)
        b = Mw * u.values[:-1]
        # eliminate the border: H dx - b dlam = -F, 2 b.dx = -G
        try:
            y = sla.solve_banded((1, 1), _banded(H), np.column_stack((F, b)))
        except (np.linalg.LinAlgError, ValueError):
            return u, lam, it, nr, False
        den = 2.0 * float(b @ y[:, 1])
        if den == 0.0 or not np.all(np.isfinite(y)):
            return u, lam, it, nr, False
        dlam = (2.0 * float(b @ y[:, 0]) - G) / den
        dx = -y[:, 0] + dlam * y[:, 1]
        u = RadialField(g, np.append(u.values[:-1] + dx, 0.0))
        lam = lam + dlam
    u = normalize(u, c)
    F = energy_gradient(u, mu, p)[:-1] - lam * Mw * u.values[:-1]
    nr = math.sqrt(float(np.sum(F**2 / Mw))) / u.l2()
    return u, float(lam), it, nr, bool(nr < max(tol, 1e-9) * 100)


def _negative_pivots(diag: np.ndarray, off: np.ndarray) -> int:
    """Negative eigenvalue count of a symmetric tridiagonal matrix (Sylvester)."""
    count = 0
    d = diag[0]
    count += d < 0
    for k in range(1, len(diag)):
        if d == 0.0:
            d = 1e-300
        d = diag[k] - off[k - 1] ** 2 / d
        count += d < 0
    return int(count)


def morse_index(u: RadialField, params: Params, lam: float) -> int:
    """Number of descent directions of ``J_mu - lam/2 mass`` tangent to the
    mass sphere at ``u`` (0 at a strict local minimizer, 1 at a mountain pass)."""
    g = u.grid
    Mw = g.w[:-1]
    H = energy_hessian(u, params.mu, params.p) - lam * sp.diags(Mw)
    b = Mw * u.values[:-1]
    neg = _negative_pivots(H.diagonal(0), H.diagonal(1))
    s = float(b @ sla.solve_banded((1, 1), _banded(H), b))
    return neg + (1 if s > 0 else 0) - 1


def descend(u0: RadialField, params: Params, cfg: Optional[FlowConfig] = None,
            k0: Optional[float] = None, classification: str = "global-min") -> SolveReport:
    """Projected Sobolev descent of J_mu on the mass sphere, then Newton polish.

    With ``k0`` set, trial points with ``barrier_value <= k0`` are rejected
    (the step is halved) so the iterates stay outside the barrier set.
    """
    cfg = cfg or FlowConfig()
    mu, p, c = params.mu, params.p, params.c
    g = u0.grid
    u = normalize(u0, c)
    J = energy(u, mu, p)
    tau = cfg.tau
    switch = cfg.switch_tol if cfg.newton else cfg.grad_tol
    boundary_hits = 0
    notes = []
    it = 0
    total = 0
    for attempt in range(cfg.restarts + 1):
        res = math.inf
        for it in range(cfg.max_iters):
            lam = multiplier(u, mu, p)
            G = energy_gradient(u, mu, p) - lam * g.w * u.values
            res = _stationarity(u, G)
            if res < switch:
                break
            if cfg.newton and it and it % cfg.newton_every == 0:
                early = _early_newton(u, J, params, k0)
                if early is not None:
                    un, lam_n, nit, nres = early
                    return _finish(un, params, lam_n, total + it + nit, classification, nres, cfg,
                                   k0, notes + ["early newton"])
            d = sobolev_direction(u, G, mu, max(cfg.shift_floor, -lam))
            slope = -float(np.dot(G, d))
            pinned = False
            while True:
                un = normalize(RadialField(g, u.values - tau * d), c)
                Jn = energy(un, mu, p)
                if k0 is not None and barrier_value(un) <= k0:
                    pinned = True
                elif Jn <= J + 1e-4 * tau * slope:
                    break
                tau *= cfg.backtrack
                if tau < 1e-14:
                    break
            if tau < 1e-14:
                if pinned:
                    boundary_hits += 1
                tau = cfg.tau
                break
            u, J = un, Jn
            if J < UNBOUNDED_J:
                return _report(u, params, multiplier(u, mu, p), total + it, "failed",
                               "unbounded", res, ["energy diverged"])
            tau = min(tau / cfg.backtrack, cfg.tau_max)
        total += it
        if res >= switch:
            if boundary_hits > cfg.restarts:
                return _report(u, params, multiplier(u, mu, p), total, "failed",
                               "boundary-trap", res)
            if it == cfg.max_iters - 1:
                return _report(u, params, multiplier(u, mu, p), total, "failed",
                               "max-iters", res)
            continue
        if not cfg.newton:
            return _finish(u, params, multiplier(u, mu, p), total, classification, res, cfg, k0, notes)
        un, lam_n, nit, nres, ok = newton_polish(u, params)
        Jn = energy(un, mu, p)
        scale = abs(J) + breakdown(u, p).grad2
        stay = ok and Jn <= J + 1e-6 * scale
        if stay and k0 is not None and barrier_value(un) <= k0:
            stay = False
        if stay:
            return _finish(un, params, lam_n, total + nit, classification, nres, cfg, k0, notes)
        notes.append(f"newton rejected at switch tolerance {switch:.1e}")
        switch *= 0.1
    lam = multiplier(u, mu, p)
    G = energy_gradient(u, mu, p) - lam * g.w * u.values
    return _report(u, params, lam, total, "failed", "max-iters", _stationarity(u, G), notes)


def _early_newton(u: RadialField, J: float, params: Params, k0: Optional[float]):
    """Newton from a stalled descent iterate, kept only if it lands on a
    minimizer (Morse index 0) at no higher energy, outside the barrier."""
    un, lam_n, nit, nres, ok = newton_polish(u, params)
    if not ok:
        return None
    scale = abs(J) + breakdown(u, params.p).grad2
    if energy(un, params.mu, params.p) > J + 1e-6 * scale:
        return None
    if k0 is not None and barrier_value(un) <= k0:
        return None
    if morse_index(un, params, lam_n) != 0:
        return None
    return un, lam_n, nit, nres


def _finish(u, params, lam, iters, classification, res, cfg, k0, notes) -> SolveReport:
    rep = _report(u, params, lam, iters, classification, "converged", res, notes)
    if rep.grad_norm >= max(cfg.grad_tol, 1e-300) and cfg.newton:
        return replace(rep, status="max-iters", classification="failed")
    if rep.Q_relative >= cfg.q_tol:
        return replace(rep, status="pohozaev", classification="failed")
    return rep


# --- dilation fiber ------------------------------------------------------------

def fiber_roots(b: EnergyBreakdown, mu: float, p: float, N: int,
                t_min: float = 1e-6, t_max: float = 1e6, samples: int = 2001):
    """All zeros of ``t -> Q_mu(u^t)`` in ``[t_min, t_max]`` with their type.

    Returns a list of ``(t, kind)`` where kind is ``'max'`` if J is locally
    maximal along the fiber at t and ``'min'`` otherwise.
    """
    s = np.linspace(math.log(t_min), math.log(t_max), samples)

    def q(x):
        return dilation_profile(b, mu, p, N, math.exp(x))[1]

    Jt, Qt = dilation_profile(b, mu, p, N, np.exp(s))
    out = []
    for i in range(samples - 1):
        a, bq = Qt[i], Qt[i + 1]
        if a == 0.0:
            x = s[i]
        elif a * bq < 0:
            x = brentq(q, s[i], s[i + 1], xtol=1e-15, rtol=1e-15)
        else:
            continue
        kind = "max" if (a > 0 or (a == 0 and bq < 0)) else "min"
        out.append((math.exp(x), kind))
    return out


def zero_Q_factor(b: EnergyBreakdown, mu: float, p: float, N: int) -> float:
    """Dilation factor ``t*`` with ``Q_mu(u^{t*}) = 0`` nearest to ``t = 1``
    on the side the sign of ``Q_mu(u)`` points to."""
    J1, Q1 = dilation_profile(b, mu, p, N, 1.0)
    scale = b.grad2 + b.quasi + mu * b.grad4
    if abs(Q1) <= 1e-14 * max(scale, 1e-300):
        return 1.0
    roots = [t for t, _ in fiber_roots(b, mu, p, N)]
    side = [t for t in roots if (t > 1.0 if Q1 < 0 else t < 1.0)]
    if not side:
        raise NoRootError("no zero of Q along the dilation fiber in [1e-6, 1e6]")
    return min(side, key=lambda t: abs(math.log(t)))


def scale_to_zero_Q(u: RadialField, mu: float, p: float) -> RadialField:
    """Dilate ``u`` onto the Pohozaev set ``Q_mu = 0``."""
    if u.mass() <= 0:
        raise ZeroDivisionError("zero field")
    t = zero_Q_factor(breakdown(u, p), mu, p, u.grid.N)
    return dilate(u, t)


# --- probe family and k0 ---------------------------------------------------------

_SHAPES = (
    lambda r: np.exp(-0.5 * r**2),
    lambda r: 1.0 / np.cosh(r),
    lambda r: 1.0 / np.cosh(r) ** 2,
    lambda r: np.exp(-r) * (1 + r),
    lambda r: (1 + r**2) ** -2.0,
    lambda r: np.exp(-(r**4)),
    lambda r: np.exp(-((r - 1.5) ** 2)),
    lambda r: np.clip(1 - r**2 / 4, 0, None) ** 2,
)


def probe_breakdowns(params: Params, probes: int = 64, seed: int = 0,
                     grid: Optional[RadialGrid] = None, fixed: bool = True) -> list[EnergyBreakdown]:
    """Breakdowns of probe bumps, each rescaled in amplitude to mass c.

    With ``fixed`` the first probes are the standard shapes; the rest are
    seeded random sums of Gaussians with widths in [0.3, 3] and shifted centres.
    """
    N, p, c = params.N, params.p, params.c
    g = grid or build_grid(N, 16.0, 3200)
    rng = np.random.default_rng(seed)
    fields = [field_from_function(g, f) for f in _SHAPES] if fixed else []
    while len(fields) < probes:
        k = int(rng.integers(1, 4))
        amp = rng.uniform(0.2, 1.0, k)
        wid = rng.uniform(0.3, 3.0, k)
        cen = rng.uniform(0.0, 2.0, k) * (rng.random(k) < 0.4)
        fields.append(field_from_function(
            g, lambda r: sum(a * np.exp(-0.5 * ((r - x) / s) ** 2) for a, s, x in zip(amp, wid, cen))))
    out = []
    for f in fields[:probes]:
        b = breakdown(f, p)
        a2 = c / b.mass
        out.append(EnergyBreakdown(b.grad2 * a2, b.grad4 * a2**2, b.quasi * a2**2,
                                   b.pot * a2 ** ((p + 1) / 2), c))
    return out


def barrier_dilation(b: EnergyBreakdown, N: int, k: float) -> float:
    """Dilation factor placing the field on the ring ``barrier_value = k``."""
    def f(x):
        t = math.exp(x)
        return math.log(t * t * b.grad2 + t ** (N + 2) * b.quasi) - math.log(k)

    lo, hi = -60.0, 60.0
    return math.exp(brentq(f, lo, hi, xtol=1e-14))


def ring_values(b: EnergyBreakdown, params: Params, k: float):
    """``(J_mu, Q_mu)`` of the probe dilated onto the ring ``barrier = k``."""
    t = barrier_dilation(b, params.N, k)
    return dilation_profile(b, params.mu, params.p, params.N, t)


def _ring_ok(bs, params: Params, k: float) -> bool:
    for b in bs:
        for kk in (0.9 * k, k, 1.1 * k):
            J, Q = ring_values(b, params, kk)
            if J < 0.25 * k or Q < 0.25 * k:
                return False
    return True


def calibrate_k0(params: Params, probes: int = 64, seed: int = 0,
                 k_min: float = 1e-8, k_max: float = 1e6, factor: float = 2**0.25) -> float:
    """Largest ladder value k for which every probe on the barrier rings near
    k (and every smaller ladder value) has ``J, Q >= k/4``; halved once."""
    if params.p <= 1 + 4.0 / params.N:
        raise CalibrationError("barrier geometry needs p > 1 + 4/N")
    bs = probe_breakdowns(params, probes, seed)
    k = k_min
    last = None
    while k <= k_max:
        if not _ring_ok(bs, params, k):
            break
        last = k
        k *= factor
    if last is None:
        raise CalibrationError("no admissible barrier level on the ladder")
    return 0.5 * last


def check_k0(params: Params, k0: float, probes: int = 100, seed: int = 12345):
    """Check on a fresh random probe sample (no standard shapes); returns
    ``(ok, min J - k0/4, min Q - k0/4)``."""
    bs = probe_breakdowns(params, probes, seed, fixed=False)
    mJ, mQ = math.inf, math.inf
    for b in bs:
        for kk in (0.9 * k0, k0, 1.1 * k0):
            J, Q = ring_values(b, params, kk)
            mJ = min(mJ, J - 0.25 * kk)
            mQ = min(mQ, Q - 0.25 * kk)
    return bool(mJ >= 0 and mQ >= 0), mJ, mQ


def probe_ring_min(params: Params, k0: float, probes: int = 100, seed: int = 7) -> float:
    """Smallest J_mu over a probe sample placed exactly on the ring ``barrier = k0``."""
    return min(ring_values(b, params, k0)[0] for b in probe_breakdowns(params, probes, seed))


# --- minimizers ----------------------------------------------------------------

def gaussian_guess(grid: RadialGrid, c: float, amplitude: float) -> RadialField:
    N = grid.N
    s = (c / (amplitude**2 * math.pi ** (N / 2.0))) ** (1.0 / N)
    u = field_from_function(grid, lambda r: amplitude * np.exp(-0.5 * (r / s) ** 2))
    return normalize(u, c)


def minimize_global(params: Params, grid: RadialGrid, cfg: Optional[FlowConfig] = None,
                    guesses: Optional[Sequence[RadialField]] = None,
                    amplitudes: Sequence[float] = (0.5, 1.5, 3.0)) -> SolveReport:
    """Best converged descent over a set of starting fields (lowest J wins)."""
    cfg = cfg or FlowConfig()
    starts = list(guesses or [])
    starts += [gaussian_guess(grid, params.c, a) for a in amplitudes]
    best = None
    for u0 in starts:
        rep = descend(u0, params, cfg)
        if rep.status == "unbounded":
            return rep
        if rep.converged and (best is None or rep.J_value < best.J_value):
            best = rep
    if best is None:
        return rep
    return replace(best, notes=best.notes + (f"starts={len(starts)}",))


def minimize_local(params: Params, k0: float, cfg: Optional[FlowConfig] = None,
                   cpn_minimizer: Optional[RadialField] = None,
                   grid: Optional[RadialGrid] = None, ring_probes: int = 100) -> SolveReport:
    """Local minimizer outside the barrier set ``barrier_value <= k0``.

    Starts from the mass-shrunk minimizer at the threshold mass (or a
    Gaussian bump when that is unavailable), dilated onto ``Q = 0``.
    """
    cfg = cfg or FlowConfig()
    if cpn_minimizer is not None:
        u0 = normalize(cpn_minimizer, params.c)
    else:
        u0 = gaussian_guess(grid or default_grid(params.N), params.c, 3.0)
    try:
        u0 = scale_to_zero_Q(u0, params.mu, params.p)
    except NoRootError:
        pass
    if barrier_value(u0) <= k0:
        rep = _report(u0, params, multiplier(u0, params.mu, params.p), 0, "failed",
                      "boundary-trap", math.inf, ["initial guess inside barrier"])
        return rep
    rep = descend(u0, params, cfg, k0=k0, classification="local-min")
    if not rep.converged:
        return rep
    notes = list(rep.notes)
    ring = probe_ring_min(params, k0, ring_probes)
    ok = rep.barrier > k0 and rep.lam < 0 and 0 <= rep.J_value < ring
    if not ok:
        notes.append(f"local-min geometry violated (ring min {ring:.4g})")
        return replace(rep, classification="failed", status="geometry", notes=tuple(notes))
    return replace(rep, notes=tuple(notes + [f"ring min {ring:.6g}"]))


# --- thresholds and scans ------------------------------------------------------

def _negative_threshold(cfg: FlowConfig) -> float:
    return -10.0 * cfg.grad_tol


@dataclass(frozen=True)
class CpnEstimate:
    c: float
    lo: float
    hi: float
    minimizer: Optional[SolveReport] = dfield(default=None, repr=False)
    history: tuple = ()

    def __float__(self):
        return self.c


def critical_ratio(b: EnergyBreakdown, p: float) -> float:
    """``pot/((p+1) quasi)``; J of the dilation ladder diverges to -inf iff > 1
    when the quasi and potential terms share the same scaling power."""
    return b.pot / ((p + 1) * b.quasi)


def _critical_negative(params: Params, probes: int = 64) -> bool:
    bs = probe_breakdowns(params, probes, 0)
    return max(critical_ratio(b, params.p) for b in bs) > 1.0


def estimate_cpn(p: float, N: int, c_bracket, cfg: Optional[FlowConfig] = None,
                 grid: Optional[RadialGrid] = None, rel_width: float = 0.01) -> CpnEstimate:
    """Bisection for the smallest mass with negative minimal energy.

    For p in (1+4/N, 3+4/N) each probe is a global minimization warm-started
    from the last negative-energy minimizer.  At p = 3+4/N the sign test is the
    divergence of the dilation ladder over the probe family (an upper bound
    for the threshold, since the family is finite).
    """
    cfg = cfg or FlowConfig()
    lo, hi = map(float, c_bracket)
    if not 0 < lo < hi:
        raise BracketError("need 0 < lo < hi")
    crit = abs(p - (3 + 4.0 / N)) < 1e-12
    if not crit and not (1 + 4.0 / N < p < 3 + 4.0 / N):
        raise InvalidConfig("threshold bisection needs 1+4/N < p <= 3+4/N")
    grid = grid or default_grid(N)
    thr = _negative_threshold(cfg)
    history = []
    warm: Optional[SolveReport] = None

    def negative(c):
        nonlocal warm
        prm = Params(N, p, c)
        if crit:
            neg = _critical_negative(prm)
            history.append((c, -math.inf if neg else 0.0))
            return neg
        guesses = [normalize(warm.field, c)] if warm is not None else []
        rep = minimize_global(prm, grid, cfg, guesses=guesses, amplitudes=(3.0,))
        neg = rep.converged and rep.J_value < thr
        history.append((c, rep.J_value))
        if neg:
            warm = rep
        return neg

    if not negative(hi):
        raise BracketError(f"minimal energy not negative at upper end c={hi}")
    if negative(lo):
        raise BracketError(f"minimal energy already negative at lower end c={lo}")
    while (hi - lo) / hi > rel_width:
        mid = 0.5 * (lo + hi)
        if negative(mid):
            hi = mid
        else:
            lo = mid
    return CpnEstimate(0.5 * (lo + hi), lo, hi, warm, tuple(history))


@dataclass(frozen=True)
class MassScan:
    N: int
    p: float
    rows: tuple

    def __post_init__(self):
        cs = [r[0] for r in self.rows]
        if any(b <= a for a, b in zip(cs, cs[1:])):
            raise ValueError("masses must be strictly increasing")

    def write_csv(self, path) -> None:
        write_csv(path, ("c", "m", "lambda", "status"), self.rows)


def ladder_energy(b: EnergyBreakdown, params: Params, t_max: float = 1e6, steps: int = 121):
    """Minimum of J_mu along a geometric dilation ladder ``t in [1, t_max]``."""
    t = np.geomspace(1.0, t_max, steps)
    J, _ = dilation_profile(b, params.mu, params.p, params.N, t)
    return float(np.min(J))


def _scan_row(args):
    params, grid, cfg = args
    reg = params.regime
    if reg in ("supercritical", "critical"):
        b = breakdown(gaussian_guess(grid, params.c, 1.0), params.p)
        Jmin = ladder_energy(b, params)
        if reg == "critical" and not _critical_negative(params):
            return (params.c, 0.0, math.nan, "zero")
        if Jmin < -1e6:
            return (params.c, -math.inf, math.nan, "unbounded")
        return (params.c, Jmin, math.nan, "ladder")
    rep = minimize_global(params, grid, cfg)
    if rep.status != "unbounded" and rep.J_value >= _negative_threshold(cfg):
        # nonnegative energy (a positive critical point or a spreading
        # sequence): the infimum is zero and is not attained
        return (params.c, 0.0, math.nan, "zero")
    m = rep.J_value if rep.converged else math.nan
    return (params.c, m, rep.lam, rep.status)


def mass_scan(p: float, N: int, c_list: Sequence[float], cfg: Optional[FlowConfig] = None,
              grid: Optional[RadialGrid] = None, jobs: int = 1) -> MassScan:
    """Minimal energy per mass; divergent regimes are detected by dilation ladders."""
    cfg = cfg or FlowConfig()
    grid = grid or default_grid(N)
    cs = sorted(float(c) for c in c_list)
    tasks = [(Params(N, p, c), grid, cfg) for c in cs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_scan_row, tasks))
    else:
        rows = [_scan_row(t) for t in tasks]
    return MassScan(N, p, tuple(rows))
