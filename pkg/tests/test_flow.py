import math

import numpy as np
import pytest
import scipy.sparse as sp

from quasinorm.flow import (
    BracketError,
    CalibrationError,
    FlowConfig,
    MassScan,
    _negative_pivots,
    calibrate_k0,
    check_k0,
    critical_ratio,
    estimate_cpn,
    fiber_roots,
    gaussian_guess,
    mass_scan,
    minimize_local,
    morse_index,
    newton_polish,
    probe_breakdowns,
    project_gradient,
    ring_values,
    scale_to_zero_Q,
    sobolev_direction,
    zero_Q_factor,
)
from quasinorm.model import (
    EnergyBreakdown,
    InvalidConfig,
    Params,
    RadialField,
    barrier_value,
    breakdown,
    build_grid,
    dilation_profile,
    energy_gradient,
    parse_solution,
)


@pytest.fixture(scope="module")
def small_grid():
    return build_grid(3, 30.0, 1500)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(tau=0.0), dict(grad_tol=-1.0), dict(backtrack=1.0),
                                    dict(max_iters=0), dict(restarts=-1), dict(shift_floor=0.0),
                                    dict(newton_every=0)])
    def test_rejects(self, kw):
        with pytest.raises(InvalidConfig):
            FlowConfig(**kw)


class TestElementary:
    def test_gaussian_guess_mass(self, small_grid):
        u = gaussian_guess(small_grid, 42.0, 2.0)
        np.testing.assert_allclose(u.mass(), 42.0, rtol=1e-14)
        np.testing.assert_allclose(u.values[0], 2.0, rtol=1e-3)

    def test_projected_gradient_tangent(self, small_grid):
        u = gaussian_guess(small_grid, 50.0, 1.5)
        g = project_gradient(u, 0.1, 3.0)
        np.testing.assert_allclose(small_grid.inner(g.values, u.values), 0.0,
                                   atol=1e-12 * g.l2() * u.l2())

    def test_sobolev_direction_tangent(self, small_grid):
        u = gaussian_guess(small_grid, 50.0, 1.5)
        G = energy_gradient(u, 0.0, 3.0)
        d = sobolev_direction(u, G, 0.0, 1.0)
        np.testing.assert_allclose(small_grid.inner(d, u.values), 0.0, atol=1e-12 * np.abs(d).max())
        # a descent direction: positive pairing with the gradient
        assert G @ d > 0

    def test_negative_pivots_match_eigenvalues(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            d = rng.standard_normal(40)
            e = rng.standard_normal(39)
            A = sp.diags([e, d, e], [-1, 0, 1]).toarray()
            assert _negative_pivots(d, e) == int(np.sum(np.linalg.eigvalsh(A) < 0))


class TestFiber:
    # Gaussian breakdown in N = 3 with the amplitude raised so the fiber has a max and a min
    B = EnergyBreakdown(grad2=83.5, grad4=184.6, quasi=147.7, pot=1968.7, mass=55.7)

    def test_roots_are_zeros_of_Q(self):
        roots = fiber_roots(self.B, 0.0, 3.0, 3)
        assert [k for _, k in roots] == ["max", "min"]
        for t, _ in roots:
            J, Q = dilation_profile(self.B, 0.0, 3.0, 3, t)
            assert abs(Q) < 1e-10 * (self.B.grad2 + self.B.quasi)

    def test_kind_from_second_variation(self):
        for t, kind in fiber_roots(self.B, 0.0, 3.0, 3):
            h = 1e-4
            Jm, J0, Jp = (dilation_profile(self.B, 0.0, 3.0, 3, t * math.exp(x))[0] for x in (-h, 0, h))
            assert (Jp + Jm - 2 * J0 < 0) == (kind == "max")

    def test_zero_Q_factor_closed_form(self):
        t = zero_Q_factor(self.B, 0.0, 3.0, 3)
        _, Q = dilation_profile(self.B, 0.0, 3.0, 3, t)
        assert abs(Q) < 1e-10 * self.B.grad2

    def test_scale_to_zero_Q_on_grid(self):
        u = gaussian_guess(build_grid(3, 40.0, 6000), 200.0, 3.0)
        v = scale_to_zero_Q(u, 0.0, 3.0)
        b = breakdown(v, 3.0)
        _, Q = dilation_profile(b, 0.0, 3.0, 3, 1.0)
        assert abs(Q) < 1e-2 * (b.grad2 + b.quasi)
        with pytest.raises(ZeroDivisionError):
            scale_to_zero_Q(0.0 * u, 0.0, 3.0)

    def test_critical_ratio(self):
        np.testing.assert_allclose(critical_ratio(self.B, 3.0), 1968.7 / (4 * 147.7))


class TestBarrier:
    def test_probe_masses(self):
        bs = probe_breakdowns(Params(3, 3.0, 120.0), probes=20, seed=1)
        np.testing.assert_allclose([b.mass for b in bs], 120.0)

    def test_probe_determinism(self):
        a = probe_breakdowns(Params(3, 3.0, 120.0), probes=12, seed=5, fixed=False)
        b = probe_breakdowns(Params(3, 3.0, 120.0), probes=12, seed=5, fixed=False)
        assert a == b

    def test_ring_level(self):
        prm = Params(3, 3.0, 200.0)
        b = probe_breakdowns(prm, probes=1)[0]
        J, _ = ring_values(b, prm, 1.0)
        # at small ring level the kinetic part dominates J
        assert 0.25 < J < 1.0

    def test_calibrate_and_check(self):
        prm = Params(3, 3.0, 200.0)
        k0 = calibrate_k0(prm)
        ok, mJ, mQ = check_k0(prm, k0)
        assert k0 > 0 and ok and mJ >= 0 and mQ >= 0

    def test_k0_shrinks_with_mass(self):
        k_small = calibrate_k0(Params(3, 3.0, 100.0))
        k_large = calibrate_k0(Params(3, 3.0, 400.0))
        assert k_large < k_small

    def test_calibration_needs_mass_supercritical(self):
        with pytest.raises(CalibrationError):
            calibrate_k0(Params(3, 2.0, 10.0))

    def test_local_guess_inside_barrier(self, small_grid):
        prm = Params(3, 3.0, 200.0)
        rep = minimize_local(prm, 1e9, grid=small_grid)
        assert rep.status == "boundary-trap" and rep.classification == "failed"


class TestSolutions:
    def test_global_min_is_strict(self, global33):
        prm = Params(3, 3.0, global33.c)
        assert global33.converged
        assert morse_index(global33.field, prm, global33.lam) == 0
        assert global33.J_value < 0 and global33.lam < 0

    def test_mountain_pass_index_one(self, mp_above):
        prm, _, mp = mp_above
        assert morse_index(mp.peak.field, prm, mp.peak.lam) == 1

    def test_newton_recovers_minimizer(self, global33):
        prm = Params(3, 3.0, global33.c)
        u = global33.field
        bump = RadialField(u.grid, u.values * (1 + 0.01 * np.exp(-u.grid.r)))
        v, lam, _, res, ok = newton_polish(bump, prm)
        assert ok and res < 1e-9
        np.testing.assert_allclose(lam, global33.lam, rtol=1e-8)
        np.testing.assert_allclose(v.values, u.values, atol=1e-7 * np.abs(u.values).max())

    def test_report_json_round_trip(self, global33):
        import json

        d = json.loads(global33.to_json())
        assert d["classification"] == "global-min" and d["N"] == 3
        v, prm = parse_solution(d["solution"])
        np.testing.assert_array_equal(v.values, global33.field.values)
        assert prm.c == global33.c

    def test_outside_barrier(self, two_solutions):
        _, _, k0, loc, _ = two_solutions
        assert barrier_value(loc.field) > k0


class TestThreshold:
    def test_bracket_errors(self):
        with pytest.raises(BracketError):
            estimate_cpn(3.0, 3, (10.0, 5.0))
        with pytest.raises(InvalidConfig):
            estimate_cpn(2.0, 3, (10.0, 50.0))

    def test_bracket_must_straddle(self, small_grid):
        with pytest.raises(BracketError):
            estimate_cpn(3.0, 3, (20.0, 40.0), grid=small_grid)

    def test_critical_upper_bound(self):
        est = estimate_cpn(3 + 4 / 3, 3, (1.0, 1000.0))
        assert 1.0 < est.lo < est.c < est.hi < 1000.0
        assert (est.hi - est.lo) / est.hi <= 0.01

    def test_threshold_value(self, cpn33):
        np.testing.assert_allclose(cpn33.c, 208.0, rtol=1e-2)


class TestScan:
    def test_rejects_unsorted_rows(self):
        with pytest.raises(ValueError):
            MassScan(3, 3.0, ((2.0, 0, 0, "x"), (1.0, 0, 0, "x")))

    def test_supercritical_unbounded(self, small_grid):
        scan = mass_scan(5.0, 3, [1.0, 10.0], grid=small_grid)
        assert [r[3] for r in scan.rows] == ["unbounded", "unbounded"]
        assert all(r[1] == -math.inf for r in scan.rows)

    def test_statuses_across_threshold(self, small_grid, tmp_path):
        scan = mass_scan(3.0, 3, [300.0, 100.0], grid=small_grid)
        assert [r[0] for r in scan.rows] == [100.0, 300.0]
        below, above = scan.rows
        assert below[1:] == (0.0, below[2], "zero") and math.isnan(below[2])
        assert above[3] == "converged" and above[1] < 0 and above[2] < 0
        scan.write_csv(tmp_path / "s.csv")
        assert (tmp_path / "s.csv").read_text().splitlines()[0] == "c,m,lambda,status"
