"""
Power-law tail at zero frequency
================================

With lam = 0 the dual equation has a positive radial solution for
(N+2)/(N-2) < p < (3N+2)/(N-2).  Its tail follows the Newtonian kernel
C K(r), with C fixed by an integral over the profile.
"""
import numpy as np

from quasinorm.dual import build_transform, kernel_K
from quasinorm.shoot import ShootConfig, decay_fit, ground_state, l2_membership
from quasinorm.fileio import atomic_write_text, svg_lines

t = build_transform()
for N, p in [(3, 6.0), (5, 4.0)]:
    prof = ground_state(ShootConfig(lam=0.0, v0_bracket=(0.05, 50.0), r_max=200.0), t, p, N)
    rep = decay_fit(prof, t, p, N)
    print(f"N={N} p={p:g}: v(0) = {prof.v0:.6f}, slope = {rep.slope:.4f} (kernel {2 - N}), "
          f"C_fit/C_integral = {rep.ratio:.5f}, in L2: {l2_membership(prof, N)}")

m = prof.r >= 1.0
atomic_write_text("power_decay.svg", svg_lines(
    [("v", prof.r[m], prof.v[m]), ("C K(r)", prof.r[m], rep.C_integral * kernel_K(prof.r[m], N))],
    title="N=5, p=4", xlabel="r", ylabel="v", logx=True, logy=True))

# A(r) is the running supremum of a(r) = r^N (v'^2 + 2F(v)) from the right
print("A(r) at r = 10, 50, 150:", np.interp([10, 50, 150], rep.r, rep.A_r))
