import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from penalab import (ProblemParams, ScalarField, assemble, build_grid, extract_multiplier,
                     minimize_jinf_on_K, picard_step, principal_eigenpair, probe_vi, psor, solve_vi)


def _box_kkt(A, b, x, lo, hi):
    r = A @ x - b
    r = np.where((x <= lo) & (r > 0), 0.0, r)
    r = np.where((x >= hi) & (r < 0), 0.0, r)
    return np.abs(r).max()


def test_psor_linear_obstacle_contact_point():
    """-u'' = 20 on (0, 1) under u <= 1: contact on [a, 1-a] with a = 1/sqrt(10)."""
    op = assemble(build_grid("interval", 2001))
    b = 20.0 * op.vol * np.ones(op.grid.n_interior)
    x, _, res = psor(op.matrix, b, 0.0, 1.0)
    assert _box_kkt(op.matrix, b, x, 0.0, 1.0) <= 1e-9 * np.linalg.norm(b)
    xs = op.grid.coords()[0]
    contact = xs[x >= 1.0 - 1e-12]
    assert contact.min() == pytest.approx(1 / math.sqrt(10), abs=2 * op.grid.h[0])
    a = 1 / math.sqrt(10)
    exact = np.where(np.abs(xs - 0.5) <= 0.5 - a, 1.0, 1.0 - 10 * (np.minimum(xs, 1 - xs) - a) ** 2)
    assert np.abs(x - exact).max() < 1e-3


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_psor_solves_random_box_lcp(seed):
    rng = np.random.default_rng(seed)
    n = 12
    B = rng.standard_normal((n, n))
    A = sp.csr_matrix(B @ B.T + n * np.eye(n))
    b = rng.standard_normal(n) * 5
    x, _, _ = psor(A, b, -0.5, 0.7)
    assert x.min() >= -0.5 and x.max() <= 0.7
    assert _box_kkt(A, b, x, -0.5, 0.7) <= 1e-9 * max(np.linalg.norm(b), 1.0)


def test_toy_vi_contact_and_trivial():
    op = assemble(build_grid("interval", 3, extents=(0.0, 2.0)))
    rep = solve_vi(ProblemParams(5.0, 4.0), op, ScalarField.constant(op.grid, 1.0))
    assert rep.converged and rep.solution.values[0] == 1.0
    assert rep.multiplier.g.values[0] == pytest.approx(3.0, abs=1e-12)  # lam - 2
    # from 0.9 the interior solution 2 v = 5 v^3 is reached instead
    rep = solve_vi(ProblemParams(5.0, 4.0), op, ScalarField.constant(op.grid, 0.9))
    assert rep.converged and rep.solution.values[0] == pytest.approx(math.sqrt(0.4), abs=1e-12)
    assert abs(rep.multiplier.g.values[0]) < 1e-10
    rep = solve_vi(ProblemParams(1.0, 4.0), op, ScalarField.constant(op.grid, 0.9))
    # lam = 1 < 2: the only solution in K is 0
    assert rep.converged and rep.solution.values[0] < 1e-12


def test_interval_vi_from_constrained_minimizer(pi_coarse):
    params = ProblemParams(3.0, 4.0)
    _, phi = principal_eigenpair(pi_coarse)
    start = minimize_jinf_on_K(params, pi_coarse, phi).solution
    rep = solve_vi(params, pi_coarse, start)
    assert rep.converged
    assert rep.fixed_point_gap <= params.tol_fp
    u = rep.solution.values
    assert u.min() >= 0.0 and u.max() == 1.0
    mult = rep.multiplier
    assert mult.bounds_ok(params.lam)
    assert mult.complementarity_defect <= 1e-6 * params.lam
    assert mult.g_nontrivial and mult.coincidence_measure > 0.5
    # the inequality holds against every probe field in K
    assert probe_vi(params, pi_coarse, rep.solution) >= -1e-9
    # solution is a fixed point of the Picard map
    nxt, _ = picard_step(params, pi_coarse, u)
    assert np.abs(nxt - u).max() <= 1e-9


def test_multiplier_of_interior_solution_is_trivial(pi_coarse):
    """A solution below the obstacle has g = 0 up to the residual."""
    params = ProblemParams(3.0, 4.0)
    _, phi = principal_eigenpair(pi_coarse)
    # start close to the mountain-pass branch, whose sup norm is about 0.68 here
    rep = solve_vi(params, pi_coarse, phi * 0.68)
    assert rep.converged
    assert rep.solution.max() < 1.0
    mult = extract_multiplier(params, pi_coarse, rep.solution)
    assert not mult.g_nontrivial
    assert np.abs(mult.g.values).max() < 1e-6
