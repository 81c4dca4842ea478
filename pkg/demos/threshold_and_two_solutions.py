"""
Threshold mass and the two solutions below it
=============================================

For N = 3, p = 3 the minimal energy on the mass sphere is zero for small
mass and negative for large mass.  Below the threshold there is still a
local minimizer outside a barrier set, and a mountain pass above it.
"""
import numpy as np

from quasinorm import Params, build_grid
from quasinorm.flow import calibrate_k0, estimate_cpn, minimize_global, minimize_local
from quasinorm.mpass import mountain_pass
from quasinorm.fileio import atomic_write_text, svg_lines

grid = build_grid(3, 40.0, 4000)

# bisection on the sign of the minimal energy
est = estimate_cpn(3.0, 3, (150.0, 300.0), grid=grid)
print(f"threshold mass ~ {est.c:.3f}  (bracket {est.lo:.3f} .. {est.hi:.3f})")

# above: a global minimizer with negative energy
above = minimize_global(Params(3, 3.0, 1.5 * est.c), grid)
print(f"c = 1.5 cpn : J = {above.J_value:.4f}, lambda = {above.lam:.4f}")

# just below: barrier level from probe bumps, then the local minimizer
prm = Params(3, 3.0, 0.99 * est.c)
k0 = calibrate_k0(prm)
loc = minimize_local(prm, k0, cpn_minimizer=est.minimizer.field)
print(f"c = 0.99 cpn: k0 = {k0:.3g}, local min J = {loc.J_value:.4f} ({loc.classification})")

# and the mountain pass between a spread-out bump and the local minimizer
mp = mountain_pass(prm, est.minimizer.field, k0)
print(f"              mountain pass J = {mp.gamma:.4f}, saddle check {mp.saddle_check}")

s = np.linspace(0.0, 1.0, len(mp.path_values))
atomic_write_text("two_solutions_path.svg", svg_lines([("J along path", s, mp.path_values)],
                  title="energy along the optimal path", xlabel="path parameter", ylabel="J"))
atomic_write_text("two_solutions_profiles.svg", svg_lines(
    [("local min", loc.field.r, loc.field.values), ("mountain pass", mp.peak.field.r, mp.peak.field.values)],
    title="profiles at c = 0.99 cpn", xlabel="r", ylabel="u"))
