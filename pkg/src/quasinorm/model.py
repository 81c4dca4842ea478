"""Radial discretization and the energy functionals.

Fields live on a uniform radial grid ``r_i = i*h`` (``i = 0..n``) with a
Dirichlet node at ``R_max`` and a symmetry (zero-flux) condition at the
origin.  Nodal quantities use dual-cell volumes as quadrature weights and
gradient quantities live on the faces ``r_{i+1/2}`` with midpoint weights.
The discrete functionals are homogeneous in ``u`` term by term, so the
Nehari-type pairing ``<J'(u), u>`` reproduces the breakdown integrals to
round-off, and the Euler-Lagrange operator is the exact weighted gradient of
the discrete energy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp


class InvalidConfig(ValueError):
    """Raised for parameter sets outside the admissible range."""


def surface_measure(N: int) -> float:
    """Area of the unit sphere S^{N-1} (|S^0| = 2)."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


@dataclass(frozen=True)
class Params:
    N: int
    p: float
    c: float
    mu: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidConfig(f"N must be a positive integer, got {self.N}")
        if not self.p > 1:
            raise InvalidConfig(f"p must exceed 1, got {self.p}")
        if not self.c > 0:
            raise InvalidConfig(f"mass c must be positive, got {self.c}")
        if self.mu < 0:
            raise InvalidConfig(f"mu must be non-negative, got {self.mu}")
        if self.N >= 3 and self.p >= (3 * self.N + 2) / (self.N - 2):
            raise InvalidConfig(
                f"p={self.p} is not below the critical exponent (3N+2)/(N-2)"
            )

    @property
    def regime(self) -> str:
        return regime(self.N, self.p)

    def with_mu(self, mu: float) -> "Params":
        return Params(self.N, self.p, self.c, mu)

    def with_c(self, c: float) -> "Params":
        return Params(self.N, self.p, c, self.mu)


def regime(N: int, p: float, tol: float = 1e-12) -> str:
    """Classify (N, p) against the thresholds 1+4/N and 3+4/N.

    Returns one of ``'subcritical'``, ``'mass-critical'``, ``'intermediate'``,
    ``'critical'``, ``'supercritical'``.
    """
    lo, hi = 1.0 + 4.0 / N, 3.0 + 4.0 / N
    if p < lo - tol:
        return "subcritical"
    if abs(p - lo) <= tol:
        return "mass-critical"
    if p < hi - tol:
        return "intermediate"
    if abs(p - hi) <= tol:
        return "critical"
    return "supercritical"


@dataclass(frozen=True, eq=False)
class RadialGrid:
    N: int
    R_max: float
    n: int
    r: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    r_face: np.ndarray = field(repr=False)
    w_face: np.ndarray = field(repr=False)
    surface: float

    @property
    def h(self) -> float:
        return self.R_max / self.n

    @property
    def volume(self) -> float:
        return self.surface * self.R_max**self.N / self.N

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(np.dot(self.w * a, b))

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.N == other.N and self.n == other.n and self.R_max == other.R_max
        )


def build_grid(N: int, R_max: float, n: int) -> RadialGrid:
    """Uniform radial grid with dual-cell node weights.

    Node weight ``w_i`` is the volume of the shell ``|r - r_i| < h/2`` (the
    ball of radius ``h/2`` at the origin, the inner half-shell at ``R_max``),
    so ``sum(w)`` is the ball volume exactly.  Face weights are the midpoint
    rule ``|S^{N-1}| r_{i+1/2}^{N-1} h``.
    """
    if int(N) != N or N < 1:
        raise InvalidConfig(f"N must be a positive integer, got {N}")
    if not R_max > 0:
        raise InvalidConfig(f"R_max must be positive, got {R_max}")
    if n < 16:
        raise InvalidConfig(f"need at least 16 intervals, got {n}")
    N = int(N)
    h = R_max / n
    r = np.arange(n + 1) * h
    S = surface_measure(N)
    edges = np.concatenate(([0.0], r[:-1] + 0.5 * h, [R_max]))
    cum = S * edges**N / N
    w = np.diff(cum)
    r_face = r[:-1] + 0.5 * h
    w_face = S * r_face ** (N - 1) * h
    for a in (r, w, r_face, w_face):
        a.setflags(write=False)
    return RadialGrid(N, float(R_max), int(n), r, w, r_face, w_face, S)


@dataclass(frozen=True, eq=False)
class RadialField:
    """Samples ``u(r_i)`` on a grid; the node at ``R_max`` is forced to zero."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n + 1,):
            raise ValueError(
                f"expected {self.grid.n + 1} samples, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v[-1] = 0.0
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def __mul__(self, a: float) -> "RadialField":
        return RadialField(self.grid, a * self.values)

    __rmul__ = __mul__

    def __add__(self, other: "RadialField") -> "RadialField":
        _check_grid(self, other)
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialField") -> "RadialField":
        _check_grid(self, other)
        return RadialField(self.grid, self.values - other.values)

    def mass(self) -> float:
        return self.grid.inner(self.values, self.values)

    def l2(self) -> float:
        return math.sqrt(self.mass())


def _check_grid(a: RadialField, b: RadialField):
    if not a.grid.same_as(b.grid):
        raise ValueError("fields live on different grids")


def field_from_function(grid: RadialGrid, fn: Callable[[np.ndarray], np.ndarray]) -> RadialField:
    return RadialField(grid, fn(grid.r))


def normalize(u: RadialField, c: float) -> RadialField:
    m = u.mass()
    if m <= 0:
        raise ZeroDivisionError("cannot normalize the zero field")
    return RadialField(u.grid, u.values * math.sqrt(c / m))


@dataclass(frozen=True)
class EnergyBreakdown:
    grad2: float
    grad4: float
    quasi: float
    pot: float
    mass: float

    def as_array(self) -> np.ndarray:
        return np.array([self.grad2, self.grad4, self.quasi, self.pot, self.mass])


def _face_diff(u: RadialField) -> np.ndarray:
    return np.diff(u.values) / u.grid.h


def breakdown(u: RadialField, p: float, grid: Optional[RadialGrid] = None) -> EnergyBreakdown:
    """The five integrals every functional is assembled from."""
    if grid is not None and not grid.same_as(u.grid):
        raise ValueError("field does not live on the requested grid")
    g = u.grid
    v = u.values
    D2 = _face_diff(u) ** 2
    v2 = v * v
    return EnergyBreakdown(
        grad2=float(np.dot(g.w_face, D2)),
        grad4=float(np.dot(g.w_face, D2 * D2)),
        quasi=float(np.dot(g.w_face, 0.5 * (v2[:-1] + v2[1:]) * D2)),
        pot=float(np.dot(g.w, np.abs(v) ** (p + 1))),
        mass=float(np.dot(g.w, v2)),
    )


def J_mu(b: EnergyBreakdown, mu: float, p: float) -> float:
    return 0.25 * mu * b.grad4 + 0.5 * b.grad2 + b.quasi - b.pot / (p + 1)


def Q_mu(b: EnergyBreakdown, mu: float, p: float, N: int) -> float:
    return (
        0.25 * mu * (N + 4) * b.grad4
        + b.grad2
        + (N + 2) * b.quasi
        - N * (p - 1) / (2.0 * (p + 1)) * b.pot
    )


def energy(u: RadialField, mu: float, p: float) -> float:
    return J_mu(breakdown(u, p), mu, p)


def energy_gradient(u: RadialField, mu: float, p: float) -> np.ndarray:
    """Partial derivatives dJ_mu/du_i of the discrete energy (zero at R_max)."""
    return scaled_energy_gradient(u, p, (mu, 1.0, 1.0, 1.0))


def scaled_energy_gradient(u: RadialField, p: float, coef) -> np.ndarray:
    """Gradient of ``a4*G4/4 + a2*G2/2 + aq*V - ap*P/(p+1)``.

    ``coef = (a4, a2, aq, ap)``; ``(mu, 1, 1, 1)`` gives J_mu.  Other weights
    arise when the energy of a dilated field is pulled back to ``u``.
    """
    a4, a2, aq, ap = coef
    g = u.grid
    v = u.values
    h = g.h
    D = _face_diff(u)
    s = 0.5 * (v[:-1] ** 2 + v[1:] ** 2)
    flux = g.w_face * (a4 * D**3 + a2 * D + 2.0 * aq * s * D) / h
    src = aq * g.w_face * D * D
    out = np.zeros_like(v)
    out[:-1] -= flux
    out[1:] += flux
    out[:-1] += src * v[:-1]
    out[1:] += src * v[1:]
    out -= ap * g.w * np.abs(v) ** (p - 1) * v
    out[-1] = 0.0
    return out


def energy_hessian(u: RadialField, mu: float, p: float) -> sp.csc_matrix:
    """Hessian of the discrete J_mu restricted to the free nodes 0..n-1."""
    g = u.grid
    v = u.values
    h = g.h
    D = _face_diff(u)
    W = g.w_face
    s = 0.5 * (v[:-1] ** 2 + v[1:] ** 2)
    stiff = (3.0 * mu * D * D + 1.0 + 2.0 * s) / (h * h)
    a, b = v[:-1], v[1:]
    d_left = W * (stiff - 4.0 * a * D / h + D * D)
    d_right = W * (stiff + 4.0 * b * D / h + D * D)
    off = W * (-stiff - 2.0 * b * D / h + 2.0 * a * D / h)
    diag = np.zeros_like(v)
    diag[:-1] += d_left
    diag[1:] += d_right
    diag -= p * g.w * np.abs(v) ** (p - 1)
    m = g.n
    return sp.diags(
        [off[: m - 1], diag[:m], off[: m - 1]], [-1, 0, 1], shape=(m, m), format="csc"
    )


def stiffness_preconditioner(u: RadialField, mu: float, shift: float = 1.0) -> sp.csc_matrix:
    """SPD tridiagonal ``shift*M + K(u)`` used as a Sobolev metric for descent."""
    g = u.grid
    v = u.values
    D = _face_diff(u)
    s = 0.5 * (v[:-1] ** 2 + v[1:] ** 2)
    k = g.w_face * (3.0 * mu * D * D + 1.0 + 2.0 * s) / g.h**2
    diag = shift * g.w.copy()
    diag[:-1] += k
    diag[1:] += k
    m = g.n
    return sp.diags([-k[: m - 1], diag[:m], -k[: m - 1]], [-1, 0, 1], shape=(m, m), format="csc")


def euler_lagrange(u: RadialField, lam: float, mu: float, p: float) -> RadialField:
    """Strong-form residual ``J_mu'(u) - lam*u`` on the grid.

    The divergence terms come out in conservative form
    ``r^{1-N} (r^{N-1} F)'`` with the flux vanishing at the origin.
    """
    g = energy_gradient(u, mu, p)
    return RadialField(u.grid, g / u.grid.w - lam * u.values)


def multiplier(u: RadialField, mu: float, p: float) -> float:
    b = breakdown(u, p)
    if b.mass <= 0:
        raise ZeroDivisionError("multiplier undefined for the zero field")
    return (mu * b.grad4 + b.grad2 + 4.0 * b.quasi - b.pot) / b.mass


def relative_residual(u: RadialField, lam: float, mu: float, p: float) -> float:
    """||J_mu'(u) - lam u||_2 scaled by the zero-order terms ||lam u|| + ||u^p||."""
    res = euler_lagrange(u, lam, mu, p)
    g = u.grid
    scale = abs(lam) * u.l2() + math.sqrt(g.inner(np.abs(u.values) ** (2 * p), np.ones_like(u.values)))
    return res.l2() / max(scale, 1e-300)


def dilate(u: RadialField, t: float) -> RadialField:
    """``t^{N/2} u(t r)`` by linear interpolation, renormalized to the same mass."""
    if not t > 0:
        raise ValueError(f"dilation factor must be positive, got {t}")
    if t == 1.0:
        return u
    g = u.grid
    vals = t ** (g.N / 2.0) * np.interp(t * g.r, g.r, u.values, right=0.0)
    out = RadialField(g, vals)
    m0, m1 = u.mass(), out.mass()
    if m1 > 0:
        out = RadialField(g, out.values * math.sqrt(m0 / m1))
    return out


def resample(u: RadialField, grid: RadialGrid, keep_mass: bool = True) -> RadialField:
    """Linear interpolation onto another grid of the same dimension (zero beyond R_max)."""
    if grid.N != u.grid.N:
        raise ValueError("dimension mismatch")
    out = RadialField(grid, np.interp(grid.r, u.grid.r, u.values, right=0.0))
    return normalize(out, u.mass()) if keep_mass else out


def dilation_exponents(p: float, N: int) -> tuple[float, float, float, float]:
    """Scaling powers of (grad4, grad2, quasi, pot) under u -> t^{N/2} u(t .)."""
    return N + 4.0, 2.0, N + 2.0, N * (p - 1) / 2.0


def dilation_profile(b: EnergyBreakdown, mu: float, p: float, N: int, t):
    """Closed-form ``(J_mu(u^t), Q_mu(u^t))`` from the breakdown of ``u``.

    ``t`` may be a scalar or an array.
    """
    e4, e2, eq, ep = dilation_exponents(p, N)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("dilation factor must be positive")
    terms = (
        0.25 * mu * b.grad4 * t**e4,
        0.5 * b.grad2 * t**e2,
        b.quasi * t**eq,
        -b.pot / (p + 1) * t**ep,
    )
    Jt = sum(terms)
    Qt = sum(e * x for e, x in zip((e4, e2, eq, ep), terms))
    if Jt.ndim == 0:
        return float(Jt), float(Qt)
    return Jt, Qt


def barrier_value(u: RadialField) -> float:
    """``int (1+u^2)|grad u|^2``."""
    b = breakdown(u, 2.0)
    return b.grad2 + b.quasi


def in_barrier(u: RadialField, k0: float) -> bool:
    return barrier_value(u) <= k0


def X_norm(u: RadialField) -> float:
    b = breakdown(u, 3.0)
    l4 = float(np.dot(u.grid.w, u.values**4))
    return b.grad4**0.25 + l4**0.25 + b.grad2**0.5 + b.mass**0.5


def _volume_coordinate(w: np.ndarray) -> np.ndarray:
    return np.cumsum(w) - 0.5 * w


def rearrange_decreasing(u: RadialField) -> RadialField:
    """Discrete Schwarz symmetrization by equal-measure shell sorting.

    The sorted values ``|u|`` are placed at the volume coordinate of the cells
    they occupy after sorting and resampled at the grid's own volume
    coordinates, so an already non-increasing profile is reproduced exactly.
    """
    g = u.grid
    a = np.abs(u.values)
    order = np.argsort(-a, kind="stable")
    vs = a[order]
    pos = _volume_coordinate(g.w[order])
    target = _volume_coordinate(g.w)
    out = np.interp(target, pos, vs)
    return RadialField(g, out)


def gn_bounds(u: RadialField, p: float, N: int):
    """Left side ``||u||_{p+1}^{p+1}`` and the constant-free right-hand sides.

    Returns ``(lhs, rhs11, rhs12, rhs451)``; ``rhs12`` is ``None`` for N < 3.
    """
    b = breakdown(u, p)
    bar = b.grad2 + b.quasi
    rhs11 = bar ** (N * (p - 1) / 4.0) * b.mass ** (((N + 2) - (N - 2) * p) / 4.0)
    rhs12 = bar ** (N / (N - 2.0)) if N >= 3 else None
    rhs451 = b.mass ** ((3 * N + 2 - (N - 2) * p) / (2.0 * (N + 2))) * b.quasi ** (
        N * (p - 1) / (2.0 * (N + 2))
    )
    return b.pot, rhs11, rhs12, rhs451


# --- solution files -------------------------------------------------------

_HEADER_KEYS = ("N", "p", "c", "mu", "R_max", "n")


class SolutionFormatError(ValueError):
    pass


def format_solution(u: RadialField, params: Params) -> str:
    g = u.grid
    lines = [
        f"N={g.N}",
        f"p={params.p!r}",
        f"c={params.c!r}",
        f"mu={params.mu!r}",
        f"R_max={g.R_max!r}",
        f"n={g.n}",
    ]
    lines += [f"{r:.17g} {v:.17g}" for r, v in zip(g.r, u.values)]
    return "\n".join(lines) + "\n"


def write_solution(path, u: RadialField, params: Params) -> None:
    from .fileio import atomic_write_text

    atomic_write_text(path, format_solution(u, params))


def parse_solution(text: str) -> tuple[RadialField, Params]:
    header: dict[str, str] = {}
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" in s:
            key, _, val = s.partition("=")
            key = key.strip()
            if key not in _HEADER_KEYS:
                raise SolutionFormatError(f"line {lineno}: unknown header key {key!r}")
            header[key] = val.strip()
            continue
        parts = s.split()
        if len(parts) != 2:
            raise SolutionFormatError(f"line {lineno}: expected 'r value', got {s!r}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise SolutionFormatError(f"line {lineno}: non-numeric entry {s!r}") from None
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise SolutionFormatError(f"missing header keys: {', '.join(missing)}")
    try:
        N = int(header["N"])
        n = int(header["n"])
        params = Params(N, float(header["p"]), float(header["c"]), float(header["mu"]))
        R_max = float(header["R_max"])
    except (ValueError, InvalidConfig) as exc:
        raise SolutionFormatError(f"bad header: {exc}") from None
    if len(rows) != n + 1:
        raise SolutionFormatError(f"expected {n + 1} data rows, found {len(rows)}")
    grid = build_grid(N, R_max, n)
    data = np.array(rows)
    if not np.allclose(data[:, 0], grid.r, rtol=1e-12, atol=1e-12 * R_max):
        raise SolutionFormatError("radii do not match a uniform grid on [0, R_max]")
    return RadialField(grid, data[:, 1]), params


def read_solution(path) -> tuple[RadialField, Params]:
    with open(path) as fh:
        return parse_solution(fh.read())
