"""The change of unknown ``u = f(v)`` that turns the quasilinear equation
into a semilinear one.

``f`` is the odd solution of ``f' = 1/sqrt(1 + 2 f^2)``, ``f(0) = 0``.  Its
inverse has the closed form

    g(u) = u sqrt(1 + 2u^2)/2 + asinh(sqrt(2) u)/(2 sqrt(2)),

so ``f`` is evaluated by Newton iteration on ``g(u) = s`` started from a
tabulated cubic Hermite interpolant (or from the large-s asymptotic
``2^{1/4} sqrt(s)`` beyond the table).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dfield

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .model import RadialField, surface_measure
from .fileio import write_csv

SQRT2 = math.sqrt(2.0)
ASYMPTOTIC_LIMIT = 1e12


class RangeError(ValueError):
    pass


def g_inverse(u):
    """``f^{-1}(u) = int_0^u sqrt(1 + 2 s^2) ds``."""
    u = np.asarray(u, dtype=float)
    out = 0.5 * u * np.sqrt(1.0 + 2.0 * u * u) + np.arcsinh(SQRT2 * u) / (2.0 * SQRT2)
    return float(out) if out.ndim == 0 else out


def _newton(s, u, iters: int = 6):
    for _ in range(iters):
        u = u - (g_inverse(u) - s) / np.sqrt(1.0 + 2.0 * u * u)
    return u


def asymptotic_f(s):
    """Two-term large-s expansion from ``g(u) ~ u^2/sqrt2 + log(2 sqrt2 u)/(2 sqrt2) + 1/(4 sqrt2)``."""
    s = np.asarray(s, dtype=float)
    u0 = 2**0.25 * np.sqrt(s)
    corr = (np.log(2 * SQRT2 * u0) + 0.5) / (2.0 * SQRT2)
    return np.sqrt(np.maximum(SQRT2 * (s - corr), 0.0)) * np.sign(s) + 0.0


@dataclass(frozen=True)
class DualTransform:
    s: np.ndarray = dfield(repr=False)
    f: np.ndarray = dfield(repr=False)
    s_max: float = 100.0
    odd: bool = True
    _spline: object = dfield(default=None, repr=False, compare=False)

    def __post_init__(self):
        fp = 1.0 / np.sqrt(1.0 + 2.0 * self.f**2)
        object.__setattr__(self, "_spline", CubicHermiteSpline(self.s, self.f, fp))

    @property
    def f_prime_table(self) -> np.ndarray:
        return 1.0 / np.sqrt(1.0 + 2.0 * self.f**2)

    def growth_constants(self) -> tuple[float, float]:
        """``(sup_{0<s<=1} f/s, sup_{s>=1} f/sqrt(s))`` over the table."""
        m1 = (self.s > 0) & (self.s <= 1)
        m2 = self.s >= 1
        c1 = float(np.max(self.f[m1] / self.s[m1])) if m1.any() else 1.0
        c2 = float(np.max(self.f[m2] / np.sqrt(self.s[m2]))) if m2.any() else math.nan
        return c1, c2

    def write_csv(self, path) -> None:
        write_csv(path, ("s", "f", "f_prime"),
                  zip(self.s.tolist(), self.f.tolist(), self.f_prime_table.tolist()))


def build_transform(s_max: float = 100.0, n: int = 2000) -> DualTransform:
    """Table of f on a grid graded towards the origin (``s = s_max x^2``)."""
    if not s_max > 0:
        raise ValueError("s_max must be positive")
    if n < 100:
        raise ValueError("need at least 100 table nodes")
    x = np.linspace(0.0, 1.0, n)
    s = s_max * x * x
    guess = np.where(s < 1.0, s, 2**0.25 * np.sqrt(s))
    f = _newton(s, guess, 50)
    f[0] = 0.0
    return DualTransform(s, f, float(s_max))


def f_eval(t: DualTransform, s):
    """``f(s)``, odd in s; round-off accurate within and beyond the table."""
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    if np.any(a > ASYMPTOTIC_LIMIT):
        raise RangeError(f"|s| beyond {ASYMPTOTIC_LIMIT:g}")
    inside = a <= t.s_max
    guess = np.where(inside, t._spline(np.minimum(a, t.s_max)), asymptotic_f(np.maximum(a, 1.0)))
    u = _newton(a, guess, 3) * np.sign(s)
    return float(u) if u.ndim == 0 else u


def f_scalar(t: DualTransform, s: float) -> float:
    """Scalar fast path of ``f_eval`` for ODE right-hand sides."""
    a = abs(s)
    if a <= t.s_max:
        u = float(t._spline(a))
    elif a <= ASYMPTOTIC_LIMIT:
        u = float(asymptotic_f(a))
    else:
        raise RangeError(f"|s| beyond {ASYMPTOTIC_LIMIT:g}")
    for _ in range(3):
        q = math.sqrt(1.0 + 2.0 * u * u)
        u -= (0.5 * u * q + math.asinh(SQRT2 * u) / (2.0 * SQRT2) - a) / q
    return u if s >= 0 else -u


def f_prime(t: DualTransform, s):
    fs = f_eval(t, s)
    return 1.0 / np.sqrt(1.0 + 2.0 * np.asarray(fs) ** 2) if np.ndim(fs) else 1.0 / math.sqrt(1.0 + 2.0 * fs * fs)


def f_inv(t: DualTransform, u):
    return g_inverse(u)


def semilinear_rhs(t: DualTransform, v, lam: float, p: float):
    """``f'(v) (|f(v)|^{p-1} f(v) + lam f(v))``."""
    fv = np.asarray(f_eval(t, v))
    out = (np.abs(fv) ** (p - 1) * fv + lam * fv) / np.sqrt(1.0 + 2.0 * fv * fv)
    return float(out) if out.ndim == 0 else out


def to_primal(t: DualTransform, v: RadialField) -> RadialField:
    return RadialField(v.grid, f_eval(t, v.values))


def to_dual(t: DualTransform, u: RadialField) -> RadialField:
    return RadialField(u.grid, g_inverse(u.values))


def kernel_K(r, N: int):
    """Fundamental solution ``1/((N-2)|S^{N-1}| r^{N-2})`` of ``-Laplace`` for N >= 3."""
    if N < 3:
        raise ValueError("the kernel is defined for N >= 3")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    out = 1.0 / ((N - 2) * surface_measure(N) * r ** (N - 2))
    return float(out) if out.ndim == 0 else out
