"""One interior node: every solver reduces to a scalar equation.

On (0, 2) with three nodes the stiffness matrix is [[2]] and the cell volume
is 1, so J_m(v) = v^2 + v^m/m - lam v^4/4.  Critical points solve
2 + v^{m-2} = lam v^2.  The smaller root is the mountain-pass point, the larger
one the minimizer.  As m grows the minimizer sinks to the obstacle v = 1 and
v^{m-1} = lam v^3 - 2v tends to the multiplier lam - 2 = 3.
"""

from penalab import ScalarField, initial_guess, minimize_jm, mountain_pass, mp_endpoint, preset

cfg = preset("toy-1node")
op = cfg.build_operator()
one = ScalarField.constant(op.grid, 1.0)

print(f"{'m':>6} {'u_m':>12} {'J(u_m)':>12} {'z_m':>12} {'c_m':>12} {'u^(m-1)':>10}")
for m in cfg.m_list:
    params = cfg.params(m)
    u = minimize_jm(params, op, initial_guess(params, op, one))
    z = mountain_pass(params, op, mp_endpoint(params, op, one, fallback=u.solution),
                      exclude=[u.solution])
    uv, zv = u.solution.values[0], z.solution.values[0]
    print(f"{m:6g} {uv:12.8f} {u.level:12.8f} {zv:12.8f} {z.level:12.8f} {uv ** (m - 1):10.5f}")

print("\nthe power column creeps towards 3 at a rate close to 13 ln(3)/m, not 2/m")
