"""
Multiplier growth with the mass
===============================

For N = 2, p = 3 the global minimizer exists once the mass is large enough,
and its multiplier beta(c) diverges to -infinity as c grows.  The scaling
exponents below enter the bounds; no rate is predicted, so the check is
that |beta| at least doubles per factor 4 in mass.
"""
import numpy as np

from quasinorm import diagnostics

tab = diagnostics.multiplier_asymptotics(3.0, 2, [16.0, 64.0, 256.0, 1024.0])
s = tab.scaling
print(f"exponents: lambda1 = {s.lambda1:g}, lambda2 = {s.lambda2:g}, lambda3 = {s.lambda3:g}")
for r in tab.rows:
    print(f"c = {r.c:7.1f}  m = {r.m:10.4f}  beta = {r.beta:9.4f}  ({r.status})")
print("beta decreasing:", tab.beta_strictly_decreasing, " m/c decreasing:", tab.m_over_c_strictly_decreasing)
print("growth per factor 4 in c:", np.round(tab.beta_growth(), 3))
