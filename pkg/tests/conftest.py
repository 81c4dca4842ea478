import time

import pytest

from quasinorm.flow import calibrate_k0, estimate_cpn, minimize_global, minimize_local
from quasinorm.mpass import mountain_pass
from quasinorm.model import Params, build_grid
from quasinorm.dual import build_transform

# criterion number -> (name, passed, detail); printed at the end of the run
ACCEPTANCE = {}
# fixture name -> wall time of its construction
TIMINGS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for k in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {k:2d} {name}: {detail}")


class timed:
    def __init__(self, key):
        self.key = key

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        TIMINGS[self.key] = time.perf_counter() - self.t0


@pytest.fixture(scope="session")
def grid33():
    return build_grid(3, 40.0, 4000)


@pytest.fixture(scope="session")
def cpn33(grid33):
    """Threshold mass for N = 3, p = 3 on the reference grid."""
    with timed("cpn33"):
        est = estimate_cpn(3.0, 3, (150.0, 300.0), grid=grid33)
    return est


@pytest.fixture(scope="session")
def global33(cpn33, grid33):
    """Global minimizer at 1.5x the threshold mass."""
    with timed("global33"):
        rep = minimize_global(Params(3, 3.0, 1.5 * cpn33.c), grid33)
    return rep


@pytest.fixture(scope="session")
def transform():
    return build_transform()


@pytest.fixture(scope="session")
def two_solutions(cpn33, grid33):
    """Local minimizer and mountain pass just below the threshold, probing down."""
    with timed("two_solutions"):
        umin = cpn33.minimizer.field
        for frac in (0.99, 0.97, 0.95, 0.93, 0.91, 0.90):
            prm = Params(3, 3.0, frac * cpn33.c)
            k0 = calibrate_k0(prm)
            loc = minimize_local(prm, k0, cpn_minimizer=umin)
            if loc.converged and loc.classification == "local-min":
                break
        mp = mountain_pass(prm, umin, k0)
    return frac, prm, k0, loc, mp


@pytest.fixture(scope="session")
def mp_above(cpn33, global33):
    with timed("mp_above"):
        prm = Params(3, 3.0, 1.5 * cpn33.c)
        k0 = calibrate_k0(prm)
        mp = mountain_pass(prm, cpn33.minimizer.field, k0, global_minimizer=global33.field)
    return prm, k0, mp
