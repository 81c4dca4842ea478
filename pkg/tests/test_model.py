import math

import numpy as np
import pytest

from quasinorm.model import (
    EnergyBreakdown,
    InvalidConfig,
    J_mu,
    Params,
    Q_mu,
    RadialField,
    SolutionFormatError,
    barrier_value,
    breakdown,
    build_grid,
    dilate,
    dilation_profile,
    energy,
    energy_gradient,
    energy_hessian,
    field_from_function,
    format_solution,
    gn_bounds,
    multiplier,
    normalize,
    parse_solution,
    read_solution,
    rearrange_decreasing,
    regime,
    resample,
    surface_measure,
    write_solution,
)

# exp(-r^2/2) in N = 3, high-precision quadrature
GAUSS3 = EnergyBreakdown(grad2=8.3524919952475618, grad4=1.8456574155143461,
                         quasi=1.4765259324114769, pot=1.9687012432153025,
                         mass=5.5683279968317078)


def gauss(grid, a=1.0):
    return field_from_function(grid, lambda r: a * np.exp(-r**2 / 2))


class TestSurfaceMeasure:
    def test_known_values(self):
        np.testing.assert_allclose(
            [surface_measure(N) for N in (1, 2, 3, 4)],
            [2.0, 2 * math.pi, 4 * math.pi, 2 * math.pi**2], rtol=1e-14)


class TestParams:
    @pytest.mark.parametrize("kw", [dict(N=0, p=3, c=1), dict(N=3, p=1.0, c=1),
                                    dict(N=3, p=3, c=0.0), dict(N=3, p=3, c=1, mu=-1),
                                    dict(N=3, p=11.0, c=1), dict(N=2.5, p=3, c=1)])
    def test_rejects(self, kw):
        with pytest.raises(InvalidConfig):
            Params(**kw)

    def test_critical_exponent_bound_open(self):
        Params(3, 10.999, 1.0)
        Params(1, 50.0, 1.0)

    def test_with_helpers(self):
        prm = Params(3, 3.0, 10.0)
        assert prm.with_mu(0.5).mu == 0.5 and prm.with_mu(0.5).c == 10.0
        assert prm.with_c(2.0).c == 2.0


class TestRegime:
    @pytest.mark.parametrize("N,p,expect", [
        (3, 2.0, "subcritical"), (3, 1 + 4 / 3, "mass-critical"), (3, 3.0, "intermediate"),
        (3, 3 + 4 / 3, "critical"), (3, 5.0, "supercritical"), (1, 5.0, "mass-critical"),
        (2, 3.0, "mass-critical"), (2, 4.0, "intermediate"), (2, 5.0, "critical"),
    ])
    def test_table(self, N, p, expect):
        assert regime(N, p) == expect
        assert Params(N, p, 1.0).regime == expect


class TestGrid:
    @pytest.mark.parametrize("N", [1, 2, 3, 5])
    def test_weights_sum_to_ball_volume(self, N):
        g = build_grid(N, 7.5, 300)
        np.testing.assert_allclose(g.w.sum(), g.volume, rtol=1e-13)
        assert np.all(g.w > 0)

    def test_face_weights_midpoint(self):
        g = build_grid(3, 10.0, 100)
        np.testing.assert_allclose(g.w_face, 4 * math.pi * g.r_face**2 * g.h)

    def test_arrays_read_only(self):
        g = build_grid(2, 5.0, 32)
        with pytest.raises(ValueError):
            g.r[0] = 1.0

    @pytest.mark.parametrize("args", [(0, 1.0, 32), (3, -1.0, 32), (3, 1.0, 8)])
    def test_rejects(self, args):
        with pytest.raises(InvalidConfig):
            build_grid(*args)


class TestField:
    def test_boundary_pinned(self):
        g = build_grid(3, 4.0, 20)
        u = RadialField(g, np.ones(21))
        assert u.values[-1] == 0.0

    def test_shape_and_finite(self):
        g = build_grid(3, 4.0, 20)
        with pytest.raises(ValueError):
            RadialField(g, np.ones(20))
        bad = np.ones(21)
        bad[3] = np.nan
        with pytest.raises(ValueError):
            RadialField(g, bad)

    def test_grid_mismatch(self):
        a = gauss(build_grid(3, 4.0, 20))
        b = gauss(build_grid(3, 4.0, 40))
        with pytest.raises(ValueError):
            a + b

    def test_normalize(self):
        u = normalize(gauss(build_grid(3, 12.0, 400)), 7.0)
        np.testing.assert_allclose(u.mass(), 7.0, rtol=1e-14)
        with pytest.raises(ZeroDivisionError):
            normalize(0.0 * u, 1.0)


class TestBreakdown:
    def test_gaussian_second_order(self):
        errs = []
        for n in (400, 800):
            b = breakdown(gauss(build_grid(3, 16.0, n)), 3.0)
            errs.append(np.abs(b.as_array() / GAUSS3.as_array() - 1))
        assert np.all(errs[1] < 2e-4)
        # halving h cuts every error by about four
        np.testing.assert_allclose(errs[0] / errs[1], 4.0, rtol=0.1)

    def test_functional_assembly(self):
        b = EnergyBreakdown(grad2=2.0, grad4=4.0, quasi=1.0, pot=3.0, mass=1.0)
        np.testing.assert_allclose(J_mu(b, 0.5, 2.0), 0.5 + 1.0 + 1.0 - 1.0)
        np.testing.assert_allclose(Q_mu(b, 0.5, 2.0, 3), 0.25 * 0.5 * 7 * 4 + 2 + 5 - 1.5 * 3 / 3)

    def test_barrier(self):
        u = gauss(build_grid(3, 12.0, 400))
        b = breakdown(u, 3.0)
        np.testing.assert_allclose(barrier_value(u), b.grad2 + b.quasi)


class TestGradient:
    @pytest.mark.parametrize("mu", [0.0, 0.3])
    def test_matches_finite_differences(self, mu):
        g = build_grid(3, 8.0, 60)
        u = gauss(g, 1.3)
        G = energy_gradient(u, mu, 3.0)
        rng = np.random.default_rng(1)
        for _ in range(3):
            d = rng.standard_normal(g.n + 1)
            d[-1] = 0.0
            eps = 1e-5
            fd = (energy(u + RadialField(g, eps * d), mu, 3.0)
                  - energy(u - RadialField(g, eps * d), mu, 3.0)) / (2 * eps)
            np.testing.assert_allclose(G @ d, fd, rtol=1e-7)
        assert G[-1] == 0.0

    def test_hessian_matches_gradient_differences(self):
        g = build_grid(3, 8.0, 60)
        u = gauss(g, 1.3)
        H = energy_hessian(u, 0.2, 3.0).toarray()
        np.testing.assert_allclose(H, H.T, atol=1e-12)
        d = np.sin(g.r)
        d[-1] = 0.0
        eps = 1e-6
        fd = (energy_gradient(u + RadialField(g, eps * d), 0.2, 3.0)
              - energy_gradient(u - RadialField(g, eps * d), 0.2, 3.0)) / (2 * eps)
        np.testing.assert_allclose(H @ d[:-1], fd[:-1], rtol=1e-6, atol=1e-8)

    def test_multiplier_is_nehari_quotient(self):
        u = gauss(build_grid(3, 12.0, 400), 0.8)
        G = energy_gradient(u, 0.1, 3.0)
        np.testing.assert_allclose(multiplier(u, 0.1, 3.0), G @ u.values / u.mass(), rtol=1e-12)


class TestDilation:
    def test_mass_preserved(self):
        u = gauss(build_grid(3, 20.0, 800))
        for t in (0.5, 1.7):
            np.testing.assert_allclose(dilate(u, t).mass(), u.mass(), rtol=1e-12)
        with pytest.raises(ValueError):
            dilate(u, 0.0)

    def test_closed_form_tracks_grid(self):
        g = build_grid(3, 24.0, 3000)
        u = gauss(g)
        b = breakdown(u, 3.0)
        for t in (0.7, 1.4):
            J, _ = dilation_profile(b, 0.1, 3.0, 3, t)
            np.testing.assert_allclose(energy(dilate(u, t), 0.1, 3.0), J, rtol=1e-3)

    def test_Q_is_t_derivative(self):
        b = GAUSS3
        t = np.array([0.6, 1.0, 1.9])
        h = 1e-6
        Jp, _ = dilation_profile(b, 0.2, 3.0, 3, t * (1 + h))
        Jm, _ = dilation_profile(b, 0.2, 3.0, 3, t * (1 - h))
        _, Q = dilation_profile(b, 0.2, 3.0, 3, t)
        # t dJ/dt by central differences in log t
        np.testing.assert_allclose((Jp - Jm) / (2 * h), Q, rtol=1e-7)

    def test_Q_at_one(self):
        _, Q = dilation_profile(GAUSS3, 0.2, 3.0, 3, 1.0)
        np.testing.assert_allclose(Q, Q_mu(GAUSS3, 0.2, 3.0, 3))


class TestRearrange:
    def test_decreasing_reproduced(self):
        u = gauss(build_grid(3, 10.0, 200))
        np.testing.assert_allclose(rearrange_decreasing(u).values, u.values, atol=1e-15)

    def test_bump_made_monotone(self):
        g = build_grid(3, 10.0, 400)
        u = field_from_function(g, lambda r: np.exp(-(r - 3.0) ** 2))
        v = rearrange_decreasing(u)
        assert np.all(np.diff(v.values) <= 1e-14)
        np.testing.assert_allclose(v.mass(), u.mass(), rtol=1e-2)
        assert breakdown(v, 3.0).grad2 < breakdown(u, 3.0).grad2


class TestResample:
    def test_mass_kept_and_dimension_checked(self):
        u = gauss(build_grid(3, 10.0, 200))
        v = resample(u, build_grid(3, 12.0, 333))
        np.testing.assert_allclose(v.mass(), u.mass(), rtol=1e-14)
        with pytest.raises(ValueError):
            resample(u, build_grid(2, 10.0, 200))


class TestGNBounds:
    def test_no_sobolev_bound_below_three(self):
        u = gauss(build_grid(2, 10.0, 200))
        assert gn_bounds(u, 3.0, 2)[2] is None

    def test_quasi_bound_dilation_invariant(self):
        g = build_grid(3, 30.0, 4000)
        u = gauss(g)
        ratios = []
        for t in (1.0, 0.8, 1.3):
            lhs, _, _, r451 = gn_bounds(dilate(u, t), 3.0, 3)
            ratios.append(lhs / r451)
        np.testing.assert_allclose(ratios, ratios[0], rtol=2e-3)


class TestSolutionFormat:
    def test_round_trip(self, tmp_path):
        g = build_grid(3, 10.0, 50)
        u = gauss(g, 1.234567890123)
        prm = Params(3, 3.0, 12.5, 0.01)
        path = tmp_path / "u.txt"
        write_solution(path, u, prm)
        v, q = read_solution(path)
        assert q == prm
        np.testing.assert_array_equal(v.values, u.values)

    def test_header_first(self):
        text = format_solution(gauss(build_grid(3, 10.0, 20)), Params(3, 3.0, 1.0))
        assert text.splitlines()[0] == "N=3"

    @pytest.mark.parametrize("mutate,msg", [
        (lambda L: L[:7] + ["0.5 abc"] + L[8:], "line 8"),
        (lambda L: L[:7] + ["0.5 1 2"] + L[8:], "line 8"),
        (lambda L: L[1:], "missing header"),
        (lambda L: L[:-1], "data rows"),
        (lambda L: ["bogus=1"] + L, "line 1"),
        (lambda L: ["N=3", "p=20"] + L[2:], "bad header"),
    ])
    def test_errors(self, mutate, msg):
        lines = format_solution(gauss(build_grid(3, 10.0, 20)), Params(3, 3.0, 1.0)).splitlines()
        with pytest.raises(SolutionFormatError, match=msg):
            parse_solution("\n".join(mutate(lines)))

    def test_radii_checked(self):
        lines = format_solution(gauss(build_grid(3, 10.0, 20)), Params(3, 3.0, 1.0)).splitlines()
        lines[8] = "0.123 0.5"
        with pytest.raises(SolutionFormatError, match="radii"):
            parse_solution("\n".join(lines))
