"""Multiplier of the obstacle problem and how it is approximated.

The limit minimizer u on (0, pi) satisfies L u = lam u^3 - g with
0 <= g <= lam supported where u = 1.  For finite m the same role is played by
u_m^{m-1}; its L^1 distance to g shrinks slowly.
"""

import numpy as np

from penalab import extract_multiplier, minimize_jinf_on_K, preset, solve_vi, sweep_m

cfg = preset("interval-pi")
op = cfg.build_operator()
params = cfg.params(np.inf)
psi = cfg.build_psi0(op)

start = minimize_jinf_on_K(params, op, psi).solution
vi = solve_vi(params, op, start)
g = vi.multiplier
print(f"VI solve converged: {vi.converged}, fixed-point gap {vi.fixed_point_gap:.2e}")
print(f"g in [{g.g.values.min():.4f}, {g.g.values.max():.4f}], lam = {params.lam}")
print(f"complementarity defect {g.complementarity_defect:.2e}, "
      f"coincidence measure {g.coincidence_measure:.4f}")

# on the contact set u = 1, so L u = 0 there in the interior and g = lam
x = op.grid.coords()[0]
inside = (vi.solution.values >= 1.0)
mid = inside & np.roll(inside, 1) & np.roll(inside, -1)
print(f"g on the interior of the contact set: {g.g.values[mid].min():.6f} .. {g.g.values[mid].max():.6f}")
edge = x[inside]
print(f"free boundary near x = {edge.min():.4f} and {edge.max():.4f}")

sw = sweep_m(cfg.params(max(cfg.m_list)), op, cfg.m_list, psi0=psi, cold_check=False)
for r in sw.records:
    print(f"m = {r.m:5g}: ||u_m^(m-1) - g||_1 = {r.g_approx_defect:.4f}")

again = extract_multiplier(params, op, vi.solution)
print(f"recomputed multiplier agrees: {np.array_equal(again.g.values, g.g.values)}")
