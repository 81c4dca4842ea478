"""
Switching off the fourth-order regularization
=============================================

The minimizer at mu > 0 is warm-started down a geometric ladder of mu.
The mu grad4 contribution vanishes and the limit is checked at mu = 0.
"""
from quasinorm import Params, build_grid
from quasinorm.continuation import classify_limit, continue_solve, mu_schedule
from quasinorm import diagnostics

params = Params(3, 3.0, 300.0)
grid = build_grid(3, 40.0, 4000)

trace = continue_solve("global-min", params, mu_schedule(1e-2, 0.1, 1e-6), grid=grid)
print(f"{'mu':>8s} {'J':>10s} {'mu*grad4':>10s} {'lambda':>9s}")
for r in trace.rows:
    print(f"{r.mu:8.0e} {r.J:10.5f} {r.mu_grad4:10.3e} {r.lam:9.5f}")
trace.write_csv("continuation.csv")

lim = classify_limit(trace, params, cpn=208.0)
print(f"limit: {lim.classification}, J = {lim.J_value:.5f}, lambda = {lim.lam:.5f}")
print(diagnostics.summary(diagnostics.identity_suite(lim.field, lim.lam, 0.0, 3.0, 3)))
