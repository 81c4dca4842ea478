"""Command-line entry point: ``quasinorm {solve,scan,verify,decay}``.

Settings come from (lowest to highest precedence) built-in defaults, a
``key=value`` config file, ``QUASINORM_<KEY>`` environment variables and
command-line flags.  Exit codes: 0 success, 2 rejected configuration or
input, 3 convergence failure, 4 identity or classification violation.  Every
run writes ``status.json`` with the exit code and reason into the output
directory.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .model import (
    InvalidConfig,
    Params,
    SolutionFormatError,
    build_grid,
    multiplier,
    read_solution,
    relative_residual,
    regime,
    resample,
    write_solution,
)
from .fileio import atomic_write_text, svg_lines
from . import diagnostics
from .flow import (
    BracketError,
    CalibrationError,
    FlowConfig,
    SolveReport,
    calibrate_k0,
    check_k0,
    estimate_cpn,
    mass_scan,
    minimize_global,
    minimize_local,
)

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IDENTITY = 0, 2, 3, 4
ENV_PREFIX = "QUASINORM_"


class RunFailure(Exception):
    def __init__(self, code: int, reason: str):
        super().__init__(reason)
        self.code = code
        self.reason = reason


@dataclass(frozen=True)
class RunConfig:
    command: str = "solve"
    kind: str = "global-min"
    N: int = 3
    p: float = 3.0
    c: float = 300.0
    mu0: float = 0.0
    mu_min: float = 1e-6
    mu_factor: float = 0.1
    grid_n: Optional[int] = None
    r_max: Optional[float] = None
    jobs: int = 1
    seed: int = 0
    out: str = "quasinorm-out"
    c_list: str = ""
    threshold: bool = False
    cpn: Optional[float] = None
    solution: str = ""
    grad_tol: float = 1e-8
    tolerance: float = 1e-3

    def params(self, mu: float = 0.0) -> Params:
        return Params(self.N, self.p, self.c, mu)


_FLAG_KEYS = {f.name for f in fields(RunConfig)} - {"command", "solution"}


def _coerce(name: str, value):
    typ = {f.name: f.type for f in fields(RunConfig)}[name]
    if value is None or not isinstance(value, str):
        return value
    if value.strip().lower() in ("none", ""):
        return None if "Optional" in str(typ) else value
    if "bool" in str(typ):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if "int" in str(typ):
        return int(value)
    if "float" in str(typ):
        return float(value)
    return value


def read_config_file(path) -> dict:
    """``key=value`` lines; ``#`` starts a comment; keys use underscores or dashes."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.split("#", 1)[0].strip()
            if not s:
                continue
            if "=" not in s:
                raise InvalidConfig(f"{path}:{lineno}: expected key=value")
            k, _, v = s.partition("=")
            k = k.strip().replace("-", "_")
            if k not in _FLAG_KEYS:
                raise InvalidConfig(f"{path}:{lineno}: unknown key {k!r}")
            out[k] = _coerce(k, v.strip())
    return out


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for k in _FLAG_KEYS:
        key = ENV_PREFIX + k.upper()
        if key in environ:
            out[k] = _coerce(k, environ[key])
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quasinorm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key=value configuration file")
        sp.add_argument("--N", type=int)
        sp.add_argument("--p", type=float)
        sp.add_argument("--grid-n", dest="grid_n", type=int)
        sp.add_argument("--r-max", dest="r_max", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")

    s = sub.add_parser("solve", help="constrained critical point plus identity report")
    common(s)
    s.add_argument("--kind", choices=("global-min", "local-min", "mountain-pass"))
    s.add_argument("--c", type=float)
    s.add_argument("--mu0", type=float, help="start of the mu continuation (0: none)")
    s.add_argument("--mu-min", dest="mu_min", type=float)
    s.add_argument("--mu-factor", dest="mu_factor", type=float)
    s.add_argument("--cpn", type=float, help="expected threshold mass (centre of the initial bisection bracket)")

    s = sub.add_parser("scan", help="minimal energy and multiplier over a mass list")
    common(s)
    s.add_argument("--c-list", dest="c_list", help="comma-separated masses")
    s.add_argument("--jobs", type=int)
    s.add_argument("--threshold", action="store_true", default=None,
                   help="also locate the threshold mass by bisection")

    s = sub.add_parser("verify", help="identity report for a solution file")
    s.add_argument("solution")
    s.add_argument("--config")
    s.add_argument("--out")
    s.add_argument("--tolerance", type=float)

    s = sub.add_parser("decay", help="zero-frequency shooting and power-tail fit")
    common(s)
    return ap


def resolve_config(argv=None, environ=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    merged: dict = {}
    if getattr(ns, "config", None):
        merged.update(read_config_file(ns.config))
    merged.update(env_overrides(environ))
    for k, v in vars(ns).items():
        if k in _FLAG_KEYS and v is not None:
            merged[k] = v
    merged["command"] = ns.command
    if ns.command == "verify":
        merged["solution"] = ns.solution
    return RunConfig(**merged)


# --- shared pieces ---------------------------------------------------------------

def _out(cfg: RunConfig) -> Path:
    d = Path(cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _grid(cfg: RunConfig, R_default: float, n_default: int):
    return build_grid(cfg.N, cfg.r_max or R_default, cfg.grid_n or n_default)


def _profile_svg(path: Path, field, title: str) -> None:
    atomic_write_text(path, svg_lines([("u", field.grid.r, field.values)], title=title,
                                      xlabel="r", ylabel="u"))


def _write_solve_artifacts(d: Path, rep: SolveReport, params: Params, tolerance: float):
    rep.write_json(d / "report.json", embed_solution=False)
    write_solution(d / "solution.txt", rep.field, params)
    ids = diagnostics.identity_suite(rep.field, rep.lam, rep.mu, params.p, params.N, tolerance)
    diagnostics.write_identity_csv(d / "identities.csv", ids)
    _profile_svg(d / "profile.svg", rep.field, f"{rep.classification} N={params.N} p={params.p:g} c={params.c:g}")
    return ids


def _check_intermediate(N: int, p: float, what: str) -> None:
    if not (1 + 4.0 / N < p < 3 + 4.0 / N):
        raise RunFailure(EXIT_CONFIG, f"{what} needs 1+4/N < p < 3+4/N (regime {regime(N, p)})")


def threshold_mass(N: int, p: float, c_hint: float, fcfg: FlowConfig, grid, max_steps: int = 8):
    """Threshold mass by bisection after expanding a bracket around ``c_hint``."""
    lo, hi = c_hint / 2, c_hint * 2
    last = None
    for _ in range(max_steps):
        try:
            return estimate_cpn(p, N, (lo, hi), fcfg, grid)
        except BracketError as exc:
            last = exc
            if "upper end" in str(exc):
                lo, hi = hi, hi * 4
            else:
                lo, hi = lo / 4, lo
    raise RunFailure(EXIT_CONVERGENCE, f"threshold bracket not found ({last})")


# --- commands ----------------------------------------------------------------------

def cmd_solve(cfg: RunConfig) -> dict:
    from .continuation import classify_limit, continue_solve, mu_schedule

    params = cfg.params()
    fcfg = FlowConfig(grad_tol=cfg.grad_tol)
    d = _out(cfg)
    if cfg.kind == "global-min":
        if params.regime == "supercritical":
            raise RunFailure(EXIT_CONFIG, "no global minimizer: J is unbounded below for p > 3+4/N")
        grid = _grid(cfg, 40.0, 4000)
        if cfg.mu0 > 0:
            trace = continue_solve("global-min", params, mu_schedule(cfg.mu0, cfg.mu_factor, cfg.mu_min),
                                   fcfg, grid=grid)
            trace.write_csv(d / "continuation.csv")
            if trace.final is None or not trace.complete:
                raise RunFailure(EXIT_CONVERGENCE, "; ".join(trace.flags) or "continuation failed")
            rep = classify_limit(trace, params)
        else:
            rep = minimize_global(params, grid, fcfg)
    elif cfg.kind in ("local-min", "mountain-pass"):
        _check_intermediate(cfg.N, cfg.p, cfg.kind)
        rep = _solve_barrier_kind(cfg, params, fcfg, d)
    else:
        raise RunFailure(EXIT_CONFIG, f"unknown kind {cfg.kind!r}")
    if not rep.converged:
        _write_solve_artifacts(d, rep, params, cfg.tolerance)
        raise RunFailure(EXIT_CONVERGENCE, f"solve ended with status {rep.status}: {'; '.join(rep.notes)}")
    ids = _write_solve_artifacts(d, rep, params, cfg.tolerance)
    if rep.classification == "failed":
        raise RunFailure(EXIT_IDENTITY, f"misclassified: {'; '.join(rep.notes)}")
    if cfg.kind == "global-min" and rep.lam >= 0:
        raise RunFailure(EXIT_IDENTITY, "nonnegative multiplier")
    bad = [r.name for r in ids if not r.passed]
    if bad:
        raise RunFailure(EXIT_IDENTITY, f"identity violation: {', '.join(bad)}")
    return {"J": rep.J_value, "lambda": rep.lam, "classification": rep.classification}


def _solve_barrier_kind(cfg: RunConfig, params: Params, fcfg: FlowConfig, d: Path) -> SolveReport:
    from .mpass import GeometryError, RefinementError, mountain_pass, mp_grid

    base_grid = build_grid(cfg.N, 40.0, 4000)
    cp = threshold_mass(cfg.N, cfg.p, cfg.cpn or cfg.c, fcfg, base_grid)
    if cp.minimizer is None:
        raise RunFailure(EXIT_CONVERGENCE, "threshold bisection returned no minimizer")
    try:
        k0 = calibrate_k0(params, seed=cfg.seed)
    except CalibrationError as exc:
        raise RunFailure(EXIT_CONVERGENCE, str(exc)) from None
    ok, _, _ = check_k0(params, k0, seed=cfg.seed + 12345)
    meta = {"cpn": cp.c, "cpn_bracket": [cp.lo, cp.hi], "k0": k0, "k0_fresh_check": ok}
    atomic_write_text(d / "barrier.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if cfg.kind == "local-min":
        if params.c >= cp.c:
            raise RunFailure(EXIT_CONFIG, f"local minimizer needs c below the threshold {cp.c:.6g}")
        return minimize_local(params, k0, fcfg, cpn_minimizer=cp.minimizer.field)
    grid = _grid(cfg, 200.0, 5000) if (cfg.r_max or cfg.grid_n) else mp_grid(cfg.N)
    glob = None
    if params.c >= cp.c:
        g = minimize_global(params, base_grid, fcfg, guesses=[resample(cp.minimizer.field, base_grid)])
        glob = g.field if g.converged else None
    try:
        mp = mountain_pass(params, cp.minimizer.field, k0, grid, fcfg, global_minimizer=glob)
    except (GeometryError, RefinementError) as exc:
        raise RunFailure(EXIT_CONVERGENCE, f"mountain pass: {exc}") from None
    mp.write_path_csv(d / "path.csv")
    atomic_write_text(d / "path.svg", mp.path_svg())
    rep = mp.peak
    if not mp.saddle_check or not rep.J_value > 0:
        return replace(rep, classification="failed", notes=rep.notes + ("saddle check failed",))
    return rep


def cmd_scan(cfg: RunConfig) -> dict:
    if not cfg.c_list:
        raise RunFailure(EXIT_CONFIG, "scan needs --c-list")
    try:
        cs = [float(x) for x in cfg.c_list.split(",") if x.strip()]
    except ValueError:
        raise RunFailure(EXIT_CONFIG, f"bad mass list {cfg.c_list!r}") from None
    if not cs or min(cs) <= 0:
        raise RunFailure(EXIT_CONFIG, "masses must be positive")
    Params(cfg.N, cfg.p, min(cs))  # regime validation
    d = _out(cfg)
    fcfg = FlowConfig(grad_tol=cfg.grad_tol)
    grid = _grid(cfg, 40.0, 4000)
    scan = mass_scan(cfg.p, cfg.N, cs, fcfg, grid, jobs=cfg.jobs)
    scan.write_csv(d / "scan.csv")
    c = np.array([r[0] for r in scan.rows])
    m = np.array([r[1] for r in scan.rows], dtype=float)
    lam = np.array([r[2] for r in scan.rows], dtype=float)
    fin = np.isfinite(m)
    series = [("m(c)", c[fin], m[fin])]
    if np.isfinite(lam).any():
        series.append(("multiplier", c[np.isfinite(lam)], lam[np.isfinite(lam)]))
    atomic_write_text(d / "scan.svg", svg_lines(series, title=f"N={cfg.N} p={cfg.p:g}", xlabel="c"))
    out = {"rows": len(scan.rows), "statuses": sorted({r[3] for r in scan.rows})}
    if cfg.threshold:
        reg = regime(cfg.N, cfg.p)
        if reg not in ("intermediate", "critical"):
            raise RunFailure(EXIT_CONFIG, f"no threshold mass in the {reg} regime")
        cp = threshold_mass(cfg.N, cfg.p, float(np.median(cs)), fcfg, grid)
        out["threshold"] = {"c": cp.c, "lo": cp.lo, "hi": cp.hi}
        atomic_write_text(d / "threshold.json", json.dumps(out["threshold"], indent=2) + "\n")
    return out


def verify_field(u, params: Params, tolerance: float = 1e-3):
    """Identity reports for a stored field, with the multiplier recomputed."""
    if not np.any(u.values != 0) or u.mass() <= 0:
        raise RunFailure(EXIT_CONFIG, "trivial (zero) field")
    lam = multiplier(u, params.mu, params.p)
    ids = diagnostics.identity_suite(u, lam, params.mu, params.p, params.N, tolerance)
    res = relative_residual(u, lam, params.mu, params.p)
    return lam, ids, res


def cmd_verify(cfg: RunConfig) -> dict:
    try:
        u, params = read_solution(cfg.solution)
    except FileNotFoundError:
        raise RunFailure(EXIT_CONFIG, f"no such file {cfg.solution}") from None
    except SolutionFormatError as exc:
        raise RunFailure(EXIT_CONFIG, f"parse error: {exc}") from None
    lam, ids, res = verify_field(u, params, cfg.tolerance)
    d = _out(cfg)
    diagnostics.write_identity_csv(d / "identities.csv", ids)
    print(diagnostics.summary(ids))
    bad = [r.name for r in ids if not r.passed]
    if bad:
        raise RunFailure(EXIT_IDENTITY, f"identity violation: {', '.join(bad)}")
    return {"lambda": lam, "el_residual": res}


def cmd_decay(cfg: RunConfig) -> dict:
    from .dual import build_transform, kernel_K
    from .shoot import ShootConfig, ShootingError, decay_fit, ground_state, l2_membership
    from .shoot import BracketError as ShootBracketError

    N, p = cfg.N, cfg.p
    if N < 3 or not ((N + 2) / (N - 2) < p < (3 * N + 2) / (N - 2)):
        raise RunFailure(EXIT_CONFIG, "decay needs N >= 3 and (N+2)/(N-2) < p < (3N+2)/(N-2)")
    r_max = cfg.r_max or 200.0
    t = build_transform()
    scfg = ShootConfig(lam=0.0, v0_bracket=(0.05, 50.0), r_max=r_max)
    try:
        prof = ground_state(scfg, t, p, N)
    except (ShootBracketError, ShootingError) as exc:
        raise RunFailure(EXIT_CONVERGENCE, f"shooting: {exc}") from None
    rep = decay_fit(prof, t, p, N)
    l2 = l2_membership(prof, N)
    d = _out(cfg)
    rep.write_csv(d / "decay.csv")
    m = prof.r >= 1.0
    atomic_write_text(d / "decay.svg", svg_lines(
        [("v", prof.r[m], prof.v[m]), ("C K(r)", prof.r[m], rep.C_integral * kernel_K(prof.r[m], N))],
        title=f"zero-frequency profile N={N} p={p:g}", xlabel="r", ylabel="v", logx=True, logy=True))
    out = {"v0": prof.v0, "slope": rep.slope, "C_fit": rep.C_fit, "C_integral": rep.C_integral,
           "window": list(rep.window), "l2_membership": l2}
    atomic_write_text(d / "decay.json", json.dumps(out, indent=2, sort_keys=True) + "\n")
    return out


COMMANDS = {"solve": cmd_solve, "scan": cmd_scan, "verify": cmd_verify, "decay": cmd_decay}


def run(argv=None, environ=None) -> int:
    try:
        cfg = resolve_config(argv, environ)
    except (InvalidConfig, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, reason, result = EXIT_OK, "ok", {}
    try:
        if cfg.command in ("solve", "scan", "decay"):
            Params(cfg.N, cfg.p, cfg.c)  # regime validation before any compute
        result = COMMANDS[cfg.command](cfg)
    except RunFailure as exc:
        code, reason = exc.code, exc.reason
    except InvalidConfig as exc:
        code, reason = EXIT_CONFIG, str(exc)
    status = {"command": cfg.command, "exit_code": code, "reason": reason, "result": result}
    try:
        atomic_write_text(Path(cfg.out) / "status.json",
                          json.dumps(status, indent=2, sort_keys=True, default=_json_default) + "\n")
    except OSError:
        pass
    if code:
        print(f"error: {reason}", file=sys.stderr)
    else:
        print(json.dumps(result, sort_keys=True, default=_json_default))
    return code


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(type(x).__name__)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
