"""End-to-end acceptance checks; each records a PASS/FAIL line for the run summary."""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, TIMINGS, timed
from quasinorm import diagnostics
from quasinorm.continuation import classify_limit, continue_solve, mu_schedule
from quasinorm.dual import f_eval, f_inv, build_transform, to_primal
from quasinorm.flow import (
    check_k0,
    descend,
    estimate_cpn,
    gaussian_guess,
    ladder_energy,
    mass_scan,
    minimize_global,
)
from quasinorm.model import (
    EnergyBreakdown,
    J_mu,
    Params,
    Q_mu,
    breakdown,
    build_grid,
    dilation_profile,
    energy,
    euler_lagrange,
    field_from_function,
    relative_residual,
    resample,
)
from quasinorm.shoot import ShootConfig, decay_fit, ground_state, l2_membership

# u = exp(-r^2/2), N = 3: (grad2, grad4, quasi, pot[p=3], mass) by 30-digit quadrature
GAUSS3 = EnergyBreakdown(grad2=8.3524919952475618, grad4=1.8456574155143461,
                         quasi=1.4765259324114769, pot=1.9687012432153025,
                         mass=5.5683279968317078)
F_AT_ONE = 0.834424741483279252714  # root of the antiderivative at s = 1


def record(k, name, ok, detail):
    ACCEPTANCE[k] = (name, bool(ok), detail)
    print(f"[{'PASS' if ok else 'FAIL'}] {k} {name}: {detail}")
    assert ok, detail


def _smooth_field(grid, rng):
    k = int(rng.integers(1, 4))
    amp = rng.uniform(0.2, 1.5, k)
    wid = rng.uniform(0.5, 2.0, k)
    cen = rng.uniform(0.0, 3.0, k)
    return field_from_function(
        grid, lambda r: sum(a * np.exp(-0.5 * ((r - x) / s) ** 2) for a, s, x in zip(amp, wid, cen)))


# --- shared heavy objects ---------------------------------------------------

@pytest.fixture(scope="module")
def n1_minima():
    with timed("n1_minima"):
        g = build_grid(1, 40.0, 4000)
        reps = [minimize_global(Params(1, 2.0, c), g) for c in (0.5, 1.0, 2.0)]
    return reps


@pytest.fixture(scope="module")
def beta_ladder():
    with timed("beta_ladder"):
        tab = diagnostics.multiplier_asymptotics(3.0, 2, [16.0, 64.0, 256.0, 1024.0])
    return tab


def _since(t0, *keys):
    return time.perf_counter() - t0 + sum(TIMINGS.get(k, 0.0) for k in keys)


# --- criteria ------------------------------------------------------------------

class TestAcceptance:
    def test_01_gradient_consistency(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(2024)
        worst = 0.0
        for case in range(20):
            N = int(rng.choice([1, 2, 3]))
            p = float(rng.choice([2.0, 3.0, 4.0]))
            mu = float(rng.choice([0.0, 0.1]))
            g = build_grid(N, 10.0, 400)
            u = _smooth_field(g, rng)
            phi = _smooth_field(g, rng)
            analytic = g.inner(euler_lagrange(u, 0.0, mu, p).values, phi.values)
            eps = 1e-4
            fd = (energy(u + eps * phi, mu, p) - energy(u - eps * phi, mu, p)) / (2 * eps)
            worst = max(worst, abs(analytic - fd) / max(abs(analytic), abs(fd)))
        dt = _since(t0)
        record(1, "gradient consistency", worst < 1e-6 and dt < 5,
               f"max relative gap {worst:.2e} over 20 cases, {dt:.1f}s")

    def test_02_scaling_algebra(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(7)
        at_one, slope = 0.0, 0.0
        for _ in range(10):
            N = int(rng.choice([1, 2, 3]))
            p = float(rng.choice([2.0, 3.0, 4.0]))
            mu = float(rng.choice([0.0, 0.1]))
            b = breakdown(_smooth_field(build_grid(N, 10.0, 400), rng), p)
            J1, Q1 = dilation_profile(b, mu, p, N, 1.0)
            J0, Q0 = J_mu(b, mu, p), Q_mu(b, mu, p, N)
            at_one = max(at_one, abs(J1 - J0) / abs(J0), abs(Q1 - Q0) / abs(Q0))
            for t in np.geomspace(0.1, 10.0, 25):
                h = 1e-5 * t
                dJ = (dilation_profile(b, mu, p, N, t + h)[0]
                      - dilation_profile(b, mu, p, N, t - h)[0]) / (2 * h)
                Qt = dilation_profile(b, mu, p, N, t)[1]
                slope = max(slope, abs(dJ - Qt / t) / max(abs(Qt / t), 1e-300))
        orders = []
        for mu in (0.0, 0.1):
            for t in (0.5, 2.0):
                Jc, Qc = dilation_profile(GAUSS3, mu, 3.0, 3, t)
                exact = np.append(GAUSS3.as_array() * np.array(
                    [t**2, t**7, t**5, t**3, 1.0]), [Jc, Qc])
                errs = []
                for n in (200, 400):
                    g = build_grid(3, 16.0 / t, n)
                    u = field_from_function(g, lambda r: t**1.5 * np.exp(-0.5 * (t * r) ** 2))
                    bb = breakdown(u, 3.0)
                    errs.append(np.abs(np.append(bb.as_array(), [J_mu(bb, mu, 3.0),
                                                                 Q_mu(bb, mu, 3.0, 3)]) - exact))
                keep = errs[0] > 1e-13 * np.abs(exact)
                orders.extend(np.log2(errs[0][keep] / errs[1][keep]).tolist())
        dt = _since(t0)
        ok = at_one < 1e-12 and slope < 1e-8 and min(orders) >= 1.8 and dt < 5
        record(2, "scaling algebra", ok,
               f"t=1 gap {at_one:.1e}, dJ/dt gap {slope:.1e}, min order {min(orders):.3f}, {dt:.1f}s")

    def test_03_identity_suite(self, cpn33, global33):
        t0 = time.perf_counter()
        prm = Params(3, 3.0, 1.5 * cpn33.c)
        g2 = build_grid(3, 40.0, 8000)
        fine = descend(resample(global33.field, g2), prm)
        rows = {}
        for tag, rep in (("coarse", global33), ("fine", fine)):
            ids = diagnostics.identity_suite(rep.field, rep.lam, 0.0, 3.0, 3)
            pert = descend(rep.field, prm.with_mu(0.01))
            ids += [i for i in diagnostics.identity_suite(pert.field, pert.lam, 0.01, 3.0, 3)
                    if i.name == "pohozaev_mu"]
            rows[tag] = {i.name: i.rel_residual for i in ids}
        worst = max(max(r.values()) for r in rows.values())
        orders = {}
        for k, a in rows["coarse"].items():
            b = rows["fine"][k]
            # residuals at round-off level carry no discretization order
            orders[k] = math.inf if a < 1e-10 else diagnostics.observed_order(a, b)
        dt = _since(t0, "cpn33", "global33")
        ok = worst < 1e-3 and min(orders.values()) >= 1.8 and dt < 120
        detail = ", ".join(f"{k} {rows['coarse'][k]:.1e} (order {o:.2f})" for k, o in orders.items())
        record(3, "identity suite", ok, f"{detail}; {dt:.1f}s")

    def test_04_regime_table(self, n1_minima, cpn33):
        t0 = time.perf_counter()
        a_ok = all(r.converged and r.J_value < 0 and r.lam < 0 for r in n1_minima)
        fine = estimate_cpn(3.0, 3, (150.0, 300.0), grid=build_grid(3, 40.0, 8000))
        drift = abs(fine.c - cpn33.c) / cpn33.c
        b_ok = drift < 0.05
        prm5 = Params(3, 5.0, 1.0)
        ladder = ladder_energy(breakdown(gaussian_guess(build_grid(3, 40.0, 4000), 1.0, 1.0), 5.0), prm5)
        scan = mass_scan(5.0, 3, [1.0, 10.0])
        c_ok = ladder < -1e6 and all(r[3] == "unbounded" for r in scan.rows)
        dt = _since(t0, "n1_minima", "cpn33")
        record(4, "regime table", a_ok and b_ok and c_ok and dt < 600,
               f"N=1 m(c)={[round(r.J_value, 5) for r in n1_minima]}; "
               f"c(3,3)={cpn33.c:.3f}/{fine.c:.3f} drift {drift:.1e}; "
               f"p=5 ladder min J {ladder:.2e}; {dt:.1f}s")

    def test_05_two_solutions(self, two_solutions, global33, mp_above):
        t0 = time.perf_counter()
        frac, prm, k0, loc, mp = two_solutions
        pk = mp.peak
        below = (loc.converged and loc.J_value > 0 and loc.lam < 0
                 and pk.classification == "mountain-pass" and pk.J_value > loc.J_value
                 and pk.lam < 0 and pk.Q_relative < 1e-3 and mp.saddle_check)
        _, _, mpa = mp_above
        pa = mpa.peak
        above = (global33.J_value < 0 and pa.classification == "mountain-pass"
                 and pa.J_value > 0 > global33.J_value and pa.lam < 0 and pa.Q_relative < 1e-3)
        dt = _since(t0, "two_solutions", "mp_above", "global33", "cpn33")
        record(5, "two solutions", below and above and dt < 1800,
               f"c={frac}c*: local J={loc.J_value:.4f} beta={loc.lam:.4f}, "
               f"mp J={pk.J_value:.4f} lam={pk.lam:.4f} |Q|rel={pk.Q_relative:.1e}; "
               f"c=1.5c*: global J={global33.J_value:.4f}, mp J={pa.J_value:.4f}; {dt:.1f}s")

    def test_06_continuation(self, cpn33, global33):
        t0 = time.perf_counter()
        prm = Params(3, 3.0, 1.5 * cpn33.c)
        sched = mu_schedule(0.1, 0.1, 1e-6)
        trace = continue_solve("global-min", prm, sched, start=global33.field)
        g4 = [r.mu_grad4 for r in trace.rows]
        steps = trace.lam_steps()
        last = steps[-2:]
        limit = classify_limit(trace, prm)
        dt = _since(t0, "cpn33", "global33")
        ok = (trace.complete and len(trace.rows) == len(sched) and g4[0] / g4[-1] >= 1e3
              and all(b < a for a, b in zip(last, last[1:]))
              and limit.pohozaev_residual < 1e-3 and limit.classification != "failed" and dt < 1200)
        record(6, "continuation", ok,
               f"mu*grad4 {g4[0]:.2e} -> {g4[-1]:.2e}, last lambda steps "
               f"{', '.join(f'{s:.1e}' for s in last)}, mu=0 Pohozaev {limit.pohozaev_residual:.1e}; {dt:.1f}s")

    def test_07_multiplier_signs(self, global33, two_solutions, mp_above, n1_minima, beta_ladder):
        t0 = time.perf_counter()
        _, prm_b, _, loc, mp = two_solutions
        _, _, mpa = mp_above
        cases = [(global33, 3), (loc, 3), (mp.peak, 3), (mpa.peak, 3)] + [(r, 1) for r in n1_minima]
        checks = [diagnostics.nonexistence_check(rep, rep.p, N) for rep, N in cases]
        neg = all(rep.lam < 0 for rep, _ in cases) and all(r.beta < 0 for r in beta_ladder.rows)
        worst = max(c.rel_residual for c in checks)
        dt = _since(t0)
        record(7, "multiplier signs", neg and all(c.passed for c in checks),
               f"{len(cases) + len(beta_ladder.rows)} solutions, all multipliers negative={neg}, "
               f"worst reconstruction gap {worst:.1e}; {dt:.1f}s")

    def test_08_decay(self, transform):
        t0 = time.perf_counter()
        prof5 = ground_state(ShootConfig(lam=0.0), transform, 4.0, 5)
        rep = decay_fit(prof5, transform, 4.0, 5, window=(20.0, 100.0))
        prof3 = ground_state(ShootConfig(lam=0.0), transform, 6.0, 3)
        l5, l3 = l2_membership(prof5, 5), l2_membership(prof3, 3)
        dt = _since(t0)
        ok = abs(rep.slope + 3) <= 0.05 and 0.97 <= rep.ratio <= 1.03 and l5 and not l3 and dt < 120
        record(8, "power decay", ok,
               f"slope {rep.slope:.4f}, C_fit/C_int {rep.ratio:.5f}, L2 N=5 {l5}, N=3 {l3}; {dt:.1f}s")

    def test_09_dual_consistency(self):
        t0 = time.perf_counter()
        t = build_transform()
        prof = ground_state(ShootConfig(lam=-1.0, r_max=40.0), t, 3.0, 3)
        u = to_primal(t, prof.on_grid(40.0, 0.01))
        res = relative_residual(u, -1.0, 0.0, 3.0)
        s = np.linspace(0.0, 50.0, 5001)
        fs = f_eval(t, s)
        h = 1e-5
        fd = (f_eval(t, s + h) - f_eval(t, s - h)) / (2 * h)
        cauchy = np.max(np.abs(fd - 1.0 / np.sqrt(1.0 + 2.0 * fs**2)))
        odd = np.max(np.abs(f_eval(t, -s) + fs))
        trip = np.max(np.abs(f_inv(t, fs) - s) / np.maximum(s, 1.0))
        f1 = abs(f_eval(t, 1.0) - F_AT_ONE)
        growth = abs(f_eval(t, 1e8) / 1e4 - 2**0.25)
        dt = _since(t0)
        ok = (res < 1e-3 and cauchy < 1e-8 and odd == 0 and trip < 1e-12 and f1 < 1e-3
              and growth < 1e-3 and dt < 60)
        record(9, "dual consistency", ok,
               f"primal residual {res:.1e}, f'-gap {cauchy:.1e}, round trip {trip:.1e}, "
               f"f(1) err {f1:.1e}, f(s)/sqrt(s) gap {growth:.1e}; {dt:.1f}s")

    def test_10_beta_divergence(self, beta_ladder):
        t0 = time.perf_counter()
        growth = beta_ladder.beta_growth()
        conv = all(r.status == "converged" for r in beta_ladder.rows)
        dt = _since(t0, "beta_ladder")
        ok = (conv and beta_ladder.beta_strictly_decreasing and min(growth) >= 2.0
              and beta_ladder.m_over_c_strictly_decreasing and dt < 600)
        record(10, "beta divergence", ok,
               f"beta {[round(r.beta, 4) for r in beta_ladder.rows]}, growth "
               f"{[round(x, 2) for x in growth]}; {dt:.1f}s")

    def test_11_ground_state(self, global33, transform):
        t0 = time.perf_counter()
        lam = global33.lam
        prof = ground_state(ShootConfig(lam=lam, r_max=40.0), transform, 3.0, 3)
        v = to_primal(transform, prof.on_grid(40.0, 0.01))
        cmp = diagnostics.groundstate_compare(global33, v, 3.0, 3)
        step = cmp.t[1] - cmp.t[0]
        dt = _since(t0, "global33")
        ok = cmp.rel_gap < 0.01 and abs(cmp.t_peak - 1.0) <= step and cmp.ordering_ok and dt < 300
        record(11, "ground state", ok,
               f"I(min)={cmp.I_value_minimizer:.6f} I(shoot)={cmp.I_value_shooting:.6f} "
               f"gap {cmp.rel_gap:.1e}, t-peak {cmp.t_peak:.3f}; {dt:.1f}s")

    def test_12_mountain_pass_floor(self, two_solutions, mp_above):
        t0 = time.perf_counter()
        _, prm_b, k0_b, _, mp_b = two_solutions
        prm_a, k0_a, mp_a = mp_above
        floors = [min(mp_b.gamma_history) / (k0_b / 4), min(mp_a.gamma_history) / (k0_a / 4)]
        fresh = [check_k0(prm_b, k0_b, probes=100, seed=99), check_k0(prm_a, k0_a, probes=100, seed=99)]
        dt = _since(t0)
        ok = min(floors) >= 1.0 and all(f[0] for f in fresh) and dt < 120
        record(12, "mountain-pass floor", ok,
               f"min path max/(k0/4) = {min(floors):.2f}, fresh-probe margins "
               f"{[(round(f[1], 4), round(f[2], 4)) for f in fresh]}; {dt:.1f}s")
