"""Mountain-pass solutions on the mass sphere.

A discrete path joins a spread-out, low-gradient field ``u0`` to a
low-energy field ``u1``.  Interior points descend in the pair ``(u, s)``,
where ``s`` is a log-dilation coordinate, with the steps near the current
maximum damped; the path is then respaced by arc length.  The maximizer is
refined by minimizing the fiber maximum ``max_t J(u^t)`` (a descent that
stays on the Pohozaev set) and finally polished by Newton.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield, replace
from typing import Optional

import numpy as np

from .model import (
    EnergyBreakdown,
    Params,
    RadialField,
    RadialGrid,
    barrier_value,
    breakdown,
    build_grid,
    dilate,
    dilation_exponents,
    dilation_profile,
    energy,
    format_solution,
    normalize,
    resample,
    scaled_energy_gradient,
)
from .flow import (
    FlowConfig,
    SolveReport,
    _report,
    descend,
    fiber_roots,
    newton_polish,
    sobolev_direction,
)
from .fileio import atomic_write_text, svg_lines, write_csv


class GeometryError(RuntimeError):
    """Endpoint inequalities cannot be met (mass outside the two-solution window)."""


class RefinementError(RuntimeError):
    pass


@dataclass(frozen=True)
class MPConfig:
    points: int = 24
    max_sweeps: int = 150
    tau: float = 1.0
    peak_damping: float = 0.5
    tol: float = 1e-7
    patience: int = 3
    refine_iters: int = 4000
    refine_switch: float = 1e-4
    saddle_delta: float = 0.05


@dataclass
class Path:
    points: list
    aux_s: np.ndarray

    def __post_init__(self):
        self.aux_s = np.asarray(self.aux_s, dtype=float)
        if len(self.points) != len(self.aux_s):
            raise ValueError("one aux coordinate per point")

    def materialized(self) -> list:
        return [H(u, s) for u, s in zip(self.points, self.aux_s)]

    def energies(self, mu: float, p: float) -> np.ndarray:
        return np.array([aux_energy(u, s, mu, p) for u, s in zip(self.points, self.aux_s)])

    def write(self, path, params: Params) -> None:
        """All profiles in one file, blocks separated by ``# point k``."""
        blocks = []
        for k, u in enumerate(self.materialized()):
            blocks.append(f"# point {k}\n" + format_solution(u, params))
        atomic_write_text(path, "".join(blocks))


@dataclass(frozen=True)
class MPReport:
    gamma: float
    peak: SolveReport = dfield(repr=False)
    path_values: np.ndarray = dfield(repr=False)
    saddle_check: bool = False
    gamma_history: tuple = ()
    path: Optional[Path] = dfield(default=None, repr=False)
    k0: Optional[float] = None
    endpoint_values: tuple = ()

    def write_path_csv(self, path) -> None:
        s = np.linspace(0.0, 1.0, len(self.path_values))
        write_csv(path, ("s", "J"), zip(s.tolist(), self.path_values.tolist()))

    def path_svg(self, title: str = "energy along the path") -> str:
        s = np.linspace(0.0, 1.0, len(self.path_values))
        return svg_lines([("J", s, self.path_values)], title=title, xlabel="path parameter",
                         ylabel="J")


# --- auxiliary functional ------------------------------------------------------------

def H(u: RadialField, s: float) -> RadialField:
    """``e^{Ns/2} u(e^s r)``; identity at s = 0."""
    return u if s == 0.0 else dilate(u, math.exp(s))


def aux_energy(u: RadialField, s: float, mu: float, p: float) -> float:
    """``J_mu(H(u, s))`` in closed form from the breakdown of u."""
    return dilation_profile(breakdown(u, p), mu, p, u.grid.N, math.exp(s))[0]


def _scaled_coef(mu, p, N, t):
    e4, e2, eq, ep = dilation_exponents(p, N)
    return (mu * t**e4, t**e2, t**eq, t**ep)


def aux_gradient(u: RadialField, s: float, mu: float, p: float, N: Optional[int] = None):
    """Tangential gradient of ``(u, s) -> J_mu(H(u, s))``.

    ``g_u`` is the L2 gradient pulled back to u's coordinates and projected
    orthogonally to u; ``g_s = Q_mu(H(u, s))``.
    """
    N = u.grid.N if N is None else N
    t = math.exp(s)
    gr = scaled_energy_gradient(u, p, _scaled_coef(mu, p, N, t))
    g = u.grid
    lam = float(np.dot(gr, u.values)) / u.mass()
    G = gr - lam * g.w * u.values
    g_u = RadialField(g, G / g.w)
    g_s = dilation_profile(breakdown(u, p), mu, p, N, t)[1]
    return g_u, float(g_s)


def _fiber_curvature(b: EnergyBreakdown, mu: float, p: float, N: int, t: float) -> float:
    e = dilation_exponents(p, N)
    terms = (0.25 * mu * b.grad4 * t ** e[0], 0.5 * b.grad2 * t ** e[1], b.quasi * t ** e[2],
             -b.pot / (p + 1) * t ** e[3])
    return float(sum(k * k * x for k, x in zip(e, terms)))


# --- endpoints and initial path ------------------------------------------------------

def mp_grid(N: int, R_max: float = 200.0, n: int = 5000) -> RadialGrid:
    """Default grid for mountain-pass work: the saddle decays slowly."""
    return build_grid(N, R_max, n)


def endpoints(params: Params, cpn_minimizer: RadialField, k0: float,
              grid: Optional[RadialGrid] = None, cfg: Optional[FlowConfig] = None,
              global_minimizer: Optional[RadialField] = None):
    """``(u0, u1)`` with ``barrier(u0) < k0``, ``J(u0) <= k0/8``,
    ``J(u1) < k0/4`` and ``barrier(u1) >= 3 k0/2``.

    Above the threshold mass u1 is the global minimizer (warm-started from the
    threshold minimizer); below it u1 is the threshold minimizer shrunk in
    amplitude to mass c.  u0 is a dilation of u1.
    """
    mu, p, c = params.mu, params.p, params.c
    grid = grid or cpn_minimizer.grid
    cpn_mass = cpn_minimizer.mass()
    base = resample(cpn_minimizer, grid)
    if c >= cpn_mass:
        if global_minimizer is not None:
            u1 = normalize(resample(global_minimizer, grid), c)
        else:
            rep = descend(normalize(base, c), params, cfg)
            if not rep.converged:
                raise GeometryError(f"global minimization failed ({rep.status})")
            u1 = rep.field
    else:
        u1 = normalize(base, c)
    J1 = energy(u1, mu, p)
    B1 = barrier_value(u1)
    if not (J1 < 0.25 * k0 and B1 >= 1.5 * k0):
        raise GeometryError(
            f"u1 violates J < k0/4 or barrier >= 3k0/2 (J={J1:.4g}, barrier={B1:.4g}, k0={k0:.4g})")
    from .flow import gaussian_guess

    for v in (u1, gaussian_guess(grid, c, 1.0)):
        u0 = _small_dilation(v, params, k0)
        if u0 is not None:
            return u0, u1
    raise GeometryError("no small dilation fits inside the barrier on this grid")


def _small_dilation(v: RadialField, params: Params, k0: float) -> Optional[RadialField]:
    """Largest ``theta = 0.9^j`` with ``barrier(v^theta) < k0`` and ``J <= k0/8``."""
    mu, p, N = params.mu, params.p, params.N
    b = breakdown(v, p)
    theta = 1.0
    for _ in range(120):
        theta *= 0.9
        J, _q = dilation_profile(b, mu, p, N, theta)
        bar = theta**2 * b.grad2 + theta ** (N + 2) * b.quasi
        if bar < 0.5 * k0 and J <= 0.125 * k0:
            u0 = dilate(v, theta)
            if barrier_value(u0) < k0 and energy(u0, mu, p) <= 0.125 * k0:
                return u0
            if barrier_value(u0) > 2 * bar:
                return None
    return None


def init_path(u0: RadialField, u1: RadialField, P: int = 24) -> Path:
    """Initial path with exact endpoints.

    When u0 is (numerically) a dilation of u1 the interior follows that
    dilation fiber geometrically in the dilation factor; otherwise it is the
    mass-renormalized amplitude blend ``(1-s) u0 + s u1``.
    """
    if P < 16:
        raise ValueError("use at least 16 path points")
    c = u1.mass()
    s = np.linspace(0.0, 1.0, P)
    b0, b1 = breakdown(u0, 3.0), breakdown(u1, 3.0)
    theta = math.sqrt(b0.grad2 / b1.grad2) if b1.grad2 > 0 else 1.0
    fiber = theta < 1 and (dilate(u1, theta) - u0).l2() < 1e-3 * u0.l2()
    pts = [u0]
    for x in s[1:-1]:
        if fiber:
            pts.append(dilate(u1, theta ** (1.0 - x)))
        else:
            pts.append(normalize((1 - x) * u0 + x * u1, c))
    pts.append(u1)
    return Path(pts, np.zeros(P))


# --- deformation -----------------------------------------------------------------

def _distance(a: RadialField, b: RadialField, Ja: float, Jb: float) -> float:
    d = a - b
    bd = breakdown(d, 3.0)
    return math.sqrt(bd.mass + bd.grad2 + (Ja - Jb) ** 2)


def _respace(pts: list, J: np.ndarray, c: float) -> list:
    """Equal arc-length redistribution by piecewise-linear interpolation."""
    P = len(pts)
    seg = np.array([_distance(pts[k], pts[k + 1], J[k], J[k + 1]) for k in range(P - 1)])
    arc = np.concatenate(([0.0], np.cumsum(seg)))
    if arc[-1] <= 0:
        return pts
    target = np.linspace(0.0, arc[-1], P)
    out = [pts[0]]
    for x in target[1:-1]:
        k = min(int(np.searchsorted(arc, x, side="right")) - 1, P - 2)
        a = (x - arc[k]) / max(seg[k], 1e-300)
        out.append(normalize((1 - a) * pts[k] + a * pts[k + 1], c))
    out.append(pts[-1])
    return out


def _tangent(prev: RadialField, nxt: RadialField) -> np.ndarray:
    t = nxt.values - prev.values
    nrm = math.sqrt(prev.grid.inner(t, t))
    return t / nrm if nrm > 0 else t


def _point_step(u: RadialField, tangent: np.ndarray, params: Params, tau: float):
    """One descent step in (u, s) from s = 0 with the path-tangent part removed."""
    mu, p, N, c = params.mu, params.p, params.N, params.c
    g = u.grid
    g_u, g_s = aux_gradient(u, 0.0, mu, p, N)
    G = g_u.values * g.w
    d = sobolev_direction(u, G, mu, 1.0)
    curv = abs(_fiber_curvature(breakdown(u, p), mu, p, N, 1.0))
    ds = max(-0.2, min(0.2, -g_s / max(curv, 1e-300)))
    J0 = energy(u, mu, p)
    while tau > 1e-10:
        w = normalize(RadialField(g, u.values - tau * d), c)
        delta = H(w, min(tau, 1.0) * ds).values - u.values
        delta = delta - g.inner(delta, tangent) * tangent
        un = normalize(RadialField(g, u.values + delta), c)
        Jn = energy(un, mu, p)
        if Jn < J0:
            return un, Jn, tau
        tau *= 0.5
    return u, J0, tau


def deform(path: Path, params: Params, cfg: Optional[FlowConfig] = None,
           mp_cfg: Optional[MPConfig] = None, k0: Optional[float] = None,
           refine: bool = True) -> MPReport:
    """Lower the path maximum by damped, tangent-free descent of the interior
    points followed by arc-length respacing.

    Respacing is skipped on sweeps where it would raise the maximum, and a
    sweep that still raises it is retried with half the step, so the string
    maximum never increases.  After refinement the reported level is the
    maximum along the certificate path through the refined saddle.
    """
    cfg = cfg or FlowConfig()
    mc = mp_cfg or MPConfig()
    mu, p, c = params.mu, params.p, params.c
    pts = path.materialized()
    P = len(pts)
    J = np.array([energy(u, mu, p) for u in pts])
    gamma = float(J.max())
    history = [gamma]
    scale = mc.tau
    quiet = 0
    for sweep in range(mc.max_sweeps):
        kmax = int(np.argmax(J))
        new_pts = list(pts)
        new_J = J.copy()
        for k in range(1, P - 1):
            f = mc.peak_damping if abs(k - kmax) <= 1 else 1.0
            tan = _tangent(pts[k - 1], pts[k + 1])
            new_pts[k], new_J[k], _ = _point_step(pts[k], tan, params, scale * f)
        respaced = _respace(new_pts, new_J, c)
        rJ = np.array([energy(u, mu, p) for u in respaced])
        if rJ.max() <= new_J.max():
            new_pts, new_J = respaced, rJ
        new_gamma = float(new_J.max())
        if new_gamma > gamma:
            scale *= 0.5
            if scale < 1e-6:
                break
            continue
        drop = gamma - new_gamma
        pts, J, gamma = new_pts, new_J, new_gamma
        history.append(gamma)
        scale = min(mc.tau, 2.0 * scale)
        if drop < mc.tol * max(abs(gamma), 1.0):
            quiet += 1
            if quiet >= mc.patience:
                break
        else:
            quiet = 0
    final_path = Path(pts, np.zeros(P))
    kmax = int(np.argmax(J))
    peak_rep = None
    saddle = False
    if refine:
        start = _refine_start(pts, J, params, kmax)
        peak_rep = refine_peak(pts[start], params, cfg, mc, floor=max(J[0], J[-1]))
        if peak_rep.classification == "mountain-pass":
            cert = certificate_path(pts[0], pts[-1], peak_rep.field, params, k0)
            if cert is not None:
                cJ = cert.energies(mu, p)
                km = int(np.argmax(cJ))
                along = bool(0 < km < len(cJ) - 1 and cJ[km - 1] < cJ[km] > cJ[km + 1])
                # the string maximum is taken over its nodes only and can sit
                # below the pass; the certificate runs through the saddle itself
                final_path, J, gamma = cert, cJ, float(cJ.max())
                history.append(gamma)
                saddle = bool(along and _fiber_saddle(peak_rep.field, params, mc.saddle_delta))
            if not saddle:
                peak_rep = replace(peak_rep, classification="failed", status="saddle-check")
    return MPReport(gamma, peak_rep, J, saddle, tuple(history), final_path, k0,
                    (float(J[0]), float(J[-1])))


def descent_trajectory(u: RadialField, params: Params, max_iters: int = 3000,
                       tol: float = 1e-6, min_drop: float = 1e-3) -> list:
    """Iterates of projected Sobolev descent, thinned to energy drops >= min_drop."""
    mu, p, c = params.mu, params.p, params.c
    g = u.grid
    J = energy(u, mu, p)
    out = [u]
    last = J
    tau = 1.0
    for _ in range(max_iters):
        gu, _gs = aux_gradient(u, 0.0, mu, p)
        G = gu.values * g.w
        if gu.l2() / u.l2() < tol:
            break
        d = sobolev_direction(u, G, mu, 1.0)
        slope = -float(np.dot(G, d))
        while tau > 1e-14:
            un = normalize(RadialField(g, u.values - tau * d), c)
            Jn = energy(un, mu, p)
            if Jn <= J + 1e-4 * tau * slope:
                break
            tau *= 0.5
        if tau <= 1e-14:
            break
        u, J = un, Jn
        tau = min(4.0, 2.0 * tau)
        if last - J >= min_drop:
            out.append(u)
            last = J
    if out[-1] is not u:
        out.append(u)
    return out


def _blend(a: RadialField, b: RadialField, m: int, c: float) -> list:
    return [normalize((1 - x) * a + x * b, c) for x in np.linspace(0.0, 1.0, m)[1:-1]]


def certificate_path(u0: RadialField, u1: RadialField, saddle: RadialField, params: Params,
                     k0: Optional[float] = None, fiber_points: int = 41) -> Optional[Path]:
    """Explicit path from u0 to u1 through ``saddle`` along its dilation fiber.

    u0 is joined to a small dilation of the saddle, the fiber is followed up
    to its local minimum past t = 1 (or a 3x dilation), and a descent
    trajectory leads into a minimizer basin which is blended into u1.
    Returns None when the construction leaves the grid.
    """
    mu, p, c, N = params.mu, params.p, params.c, params.N
    b = breakdown(saddle, p)
    kk = k0 if k0 is not None else barrier_value(u0) * 2
    lo, best = None, math.inf
    theta = 1.0
    for _ in range(120):
        theta *= 0.9
        Jc, _q = dilation_profile(b, mu, p, N, theta)
        Jg = energy(dilate(saddle, theta), mu, p)
        if abs(Jg - Jc) > 0.01 * abs(Jc) + 1e-3 * kk:
            break  # the dilated field no longer fits on the grid
        if Jg < best:
            lo, best = theta, Jg
        if Jg <= 0.125 * kk and theta**2 * b.grad2 < kk:
            break
    if lo is None:
        return None
    hi = 3.0
    for t, kind in fiber_roots(b, mu, p, N):
        if t > 1.0 and kind == "min":
            hi = min(hi, t)
            break
    ts = np.concatenate((np.geomspace(lo, 1.0, fiber_points // 2 + 1),
                         np.geomspace(1.0, hi, fiber_points // 2 + 1)[1:]))
    fiber = [dilate(saddle, t) for t in ts]
    fiber[int(np.argmin(np.abs(np.log(ts))))] = saddle
    traj = descent_trajectory(fiber[-1], params)
    pts = [u0] + _blend(u0, fiber[0], 8, c) + fiber + traj[1:] + _blend(traj[-1], u1, 8, c) + [u1]
    return Path(pts, np.zeros(len(pts)))


def _refine_start(pts, J, params: Params, kmax: int) -> int:
    """Path point nearest the maximum whose dilation fiber has a local maximum."""
    order = sorted(range(len(pts)), key=lambda k: (abs(k - kmax), -J[k]))
    for k in order:
        if fiber_max_factor(breakdown(pts[k], params.p), params.mu, params.p, params.N):
            return k
    raise RefinementError("no path point has a fiber maximum")


def _fiber_saddle(u: RadialField, params: Params, delta: float) -> bool:
    """J decreases when u is dilated either way (closed form)."""
    b = breakdown(u, params.p)
    J0 = dilation_profile(b, params.mu, params.p, params.N, 1.0)[0]
    Jm = dilation_profile(b, params.mu, params.p, params.N, math.exp(-delta))[0]
    Jp = dilation_profile(b, params.mu, params.p, params.N, math.exp(delta))[0]
    return bool(Jm < J0 and Jp < J0)


def fiber_max_factor(b: EnergyBreakdown, mu: float, p: float, N: int) -> Optional[float]:
    """Local maximizer of ``t -> J_mu(u^t)`` nearest to t = 1, if any."""
    rs = [t for t, kind in fiber_roots(b, mu, p, N) if kind == "max"]
    return min(rs, key=lambda t: abs(math.log(t))) if rs else None


def fiber_descent(w: RadialField, params: Params, iters: int = 4000, tol: float = 1e-4):
    """Minimize ``F(w) = max_t J_mu(w^t)`` on the mass sphere.

    By the envelope property the gradient of F is the pulled-back gradient at
    the fiber maximizer.  Returns ``(w, t*, F, iters, residual)``.
    """
    mu, p, c, N = params.mu, params.p, params.c, params.N
    g = w.grid
    w = normalize(w, c)
    t = fiber_max_factor(breakdown(w, p), mu, p, N)
    if t is None:
        raise RefinementError("no fiber maximum at the starting point")
    F = dilation_profile(breakdown(w, p), mu, p, N, t)[0]
    tau = 1.0
    res = math.inf
    it = 0
    for it in range(iters):
        gr = scaled_energy_gradient(w, p, _scaled_coef(mu, p, N, t))
        lam = float(np.dot(gr, w.values)) / w.mass()
        G = gr - lam * g.w * w.values
        res = math.sqrt(float(np.sum(G[:-1] ** 2 / g.w[:-1]))) / w.l2()
        if res < tol:
            break
        d = sobolev_direction(w, G, mu, 1.0)
        slope = -float(np.dot(G, d))
        while True:
            wn = normalize(RadialField(g, w.values - tau * d), c)
            bn = breakdown(wn, p)
            tn = fiber_max_factor(bn, mu, p, N)
            if tn is not None:
                Fn = dilation_profile(bn, mu, p, N, tn)[0]
                if Fn <= F + 1e-4 * tau * slope:
                    break
            tau *= 0.5
            if tau < 1e-14:
                return w, t, F, it, res
        w, t, F = wn, tn, Fn
        tau = min(2.0 * tau, 4.0)
    return w, t, F, it, res


def refine_peak(peak: RadialField, params: Params, cfg: Optional[FlowConfig] = None,
                mp_cfg: Optional[MPConfig] = None, floor: Optional[float] = None) -> SolveReport:
    """Turn the path maximizer into a critical point of mountain-pass type."""
    cfg = cfg or FlowConfig()
    mc = mp_cfg or MPConfig()
    w, t, F, it, res = fiber_descent(peak, params, mc.refine_iters, mc.refine_switch)
    u = dilate(w, t)
    un, lam, nit, nres, ok = newton_polish(u, params)
    rep = _report(un, params, lam, it + nit, "mountain-pass",
                  "converged" if ok else "max-iters", nres, [f"fiber level {F:.10g}"])
    notes = list(rep.notes)
    if floor is not None and rep.J_value <= floor + 1e-6 * max(1.0, abs(floor)):
        notes.append("collapsed into the endpoint basin")
        return replace(rep, classification="failed", status="collapse", notes=tuple(notes))
    if not ok or rep.Q_relative >= cfg.q_tol:
        return replace(rep, classification="failed", status=rep.status if not ok else "pohozaev")
    if not (rep.lam < 0 and rep.J_value > 0):
        notes.append("sign conditions failed")
        return replace(rep, classification="failed", status="signs", notes=tuple(notes))
    if not _fiber_saddle(un, params, mc.saddle_delta):
        return replace(rep, classification="failed", status="saddle-check")
    return rep


def mountain_pass(params: Params, cpn_minimizer: RadialField, k0: float,
                  grid: Optional[RadialGrid] = None, cfg: Optional[FlowConfig] = None,
                  mp_cfg: Optional[MPConfig] = None,
                  global_minimizer: Optional[RadialField] = None) -> MPReport:
    """Endpoints, initial path, deformation and refinement in one call."""
    mc = mp_cfg or MPConfig()
    grid = grid or mp_grid(params.N)
    u0, u1 = endpoints(params, cpn_minimizer, k0, grid, cfg, global_minimizer)
    path = init_path(u0, u1, mc.points)
    return deform(path, params, cfg, mc, k0=k0)
