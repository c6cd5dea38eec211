"""Acceptance criteria 1-10.  Each test records a PASS/FAIL line shown in the terminal summary."""

import json
import math
import time

import numpy as np
import pytest

from conftest import toy_energy, toy_roots
from penalab import (ProblemParams, ScalarField, check_apriori, convergence_metrics, eval_jinf,
                     eval_jm, grad_jinf, grad_jm, infinity_limit_norm, initial_guess,
                     lambda1_lower_bound, minimize_jm, mountain_pass, mp_endpoint, preset, shoot)
from penalab.cli import main
from penalab.config import PRESETS
from penalab.radial import check_gz_conditions


def test_1_toy_oracle(toy_cfg, toy_op, acceptance):
    t0 = time.perf_counter()
    params = toy_cfg.params()
    one = ScalarField.constant(toy_op.grid, 1.0)
    u = minimize_jm(params, toy_op, initial_guess(params, toy_op, one))
    end = mp_endpoint(params, toy_op, one, fallback=u.solution)
    z = mountain_pass(params, toy_op, end, exclude=[u.solution])
    elapsed = time.perf_counter() - t0
    z_star, u_star = toy_roots(5.0, 4.0, 10.0)
    uv, zv = u.solution.values[0], z.solution.values[0]
    checks = [
        abs(uv - 1.2442) <= 1e-3, abs(u.level - (-0.5585)) <= 1e-3,
        abs(zv - 0.6375) <= 1e-3, abs(z.level - 0.2011) <= 1e-3,
        # the independent scalar oracle agrees far more tightly
        abs(uv - u_star) <= 1e-9, abs(zv - z_star) <= 1e-9,
        abs(u.level - toy_energy(u_star, 5, 4, 10)) <= 1e-12,
        abs(z.level - toy_energy(z_star, 5, 4, 10)) <= 1e-12,
        u.converged and z.converged, elapsed < 1.0,
    ]
    acceptance(1, all(checks), f"u={uv:.7f} J={u.level:.7f} z={zv:.7f} c={z.level:.7f} t={elapsed:.3f}s")
    assert all(checks)


def test_2_apriori_bounds(pi_cfg, pi_op, pi_sweep, square_sweep, acceptance):
    sq_cfg, sq_op, sq = square_sweep
    worst = 0.0
    n_checked = 0
    ok = True
    for cfg, op, sw in ((pi_cfg, pi_op, pi_sweep), (sq_cfg, sq_op, sq)):
        for rec in sw.records:
            params = cfg.params(rec.m)
            for fld, conv in ((sw.u_fields[rec.m], rec.u_converged), (sw.z_fields[rec.m], rec.z_converged)):
                if not conv:
                    continue
                rep = check_apriori(params, fld, op.alpha, tol_apriori=0.02)
                ok = ok and rep.all_pass
                worst = max(worst, rep.linf_actual / rep.linf_bound, rep.lm_actual / rep.lm_bound,
                            rep.energy_actual / rep.energy_bound)
                n_checked += 1
        ok = ok and all(r.u_converged for r in sw.records)
    elapsed = pi_sweep.elapsed + sq.elapsed
    ok = ok and n_checked > 0 and elapsed < 300.0
    acceptance(2, ok, f"{n_checked} solutions, worst ratio {worst:.4f} (<= 1.02), sweeps {elapsed:.1f}s")
    assert ok and worst <= 1.02


def test_3_level_ordering(pi_cfg, pi_op, pi_sweep, acceptance):
    lam1_est, _ = lambda1_lower_bound(pi_op, pi_cfg.params())
    assert pi_cfg.lam >= 1.1 * lam1_est
    rho = pi_sweep.level_floor
    rows = []
    ok = math.isfinite(rho) and rho > 1e-6
    for rec in pi_sweep.records:
        if rec.m < 4 * pi_cfg.p:
            continue
        u, z = pi_sweep.u_fields[rec.m], pi_sweep.z_fields[rec.m]
        sep = np.linalg.norm(u.values - z.values) / np.linalg.norm(u.values)
        good = rec.u_level < 0 < rho - 1e-6 <= rec.z_level and sep > 1e-3 and rec.z_converged
        ok = ok and good
        rows.append(f"m={rec.m:g}:{rec.u_level:.4f}<0<{rho:.4f}<={rec.z_level:.4f}")
    acceptance(3, ok and rows, "; ".join(rows))
    assert ok and rows


def test_4_limit_convergence(pi_cfg, pi_sweep, acceptance):
    assert [r.m for r in pi_sweep.records] == [8.0, 16.0, 32.0, 64.0, 128.0]
    met = convergence_metrics(pi_sweep)
    lam = pi_cfg.lam
    in_K = []
    mult_ok = []
    for lim in (pi_sweep.u_limit, pi_sweep.z_limit):
        v = lim.solution.values
        in_K.append(bool(v.min() >= 0.0 and v.max() <= 1.0 and lim.converged))
        g = lim.multiplier
        mult_ok.append(bool(g.bounds_ok(lam) and g.complementarity_defect <= 1e-6 * lam))
    checks = {
        "dist_u decreasing": met["dist_u_decreasing"],
        "dist_z decreasing": met["dist_z_decreasing"],
        "final dist_u <= 5e-3": met["final_dist_u"] <= 5e-3,
        "final dist_z <= 5e-3": met["final_dist_z"] <= 5e-3,
        "limits in K": all(in_K),
        "multipliers": all(mult_ok),
    }
    failed = [k for k, v in checks.items() if not v]
    acceptance(4, not failed, f"final dist_u={met['final_dist_u']:.3e} dist_z={met['final_dist_z']:.3e}"
               + (f"; failing: {', '.join(failed)}" if failed else ""))
    assert not failed, failed


def test_5_multiplier_limit(toy_op, pi_sweep, acceptance):
    rows = []
    toy_ok = True
    for m in (10.0, 20.0, 40.0, 80.0, 160.0):
        params = ProblemParams(5.0, 4.0, m)
        u = minimize_jm(params, toy_op, initial_guess(params, toy_op, ScalarField.constant(toy_op.grid, 1.0)))
        v = u.solution.values[0]
        power = v ** (m - 1)
        # the one-node equation 2 v + v^{m-1} = 5 v^3
        assert power == pytest.approx(5 * v**3 - 2 * v, rel=1e-8)
        err = abs(power - 3.0)
        toy_ok = toy_ok and err <= 2.0 / m
        rows.append(f"m={m:g}:{err:.3f}/{2 / m:.3f}")
    met = convergence_metrics(pi_sweep)
    grid_ok = met["g_defect_decreasing"]
    defects = ", ".join(f"{r.g_approx_defect:.3g}" for r in pi_sweep.records)
    acceptance(5, toy_ok and grid_ok,
               f"toy |u^(m-1)-3| vs 2/m: {' '.join(rows)}; grid L1 defects {defects}")
    assert grid_ok
    assert toy_ok


def _directional_errors(params, op, rng, n_fields, lo, hi):
    worst = 0.0
    for _ in range(n_fields):
        x = rng.uniform(lo, hi, op.grid.n_interior)
        d = rng.standard_normal(op.grid.n_interior)
        d /= np.linalg.norm(d)
        for f, g in ((eval_jm, grad_jm), (eval_jinf, grad_jinf)):
            if f is eval_jm and params.is_limit:
                continue
            eps = 1e-5 * max(1.0, np.abs(x).max())
            fd = (f(params, op, x + eps * d) - f(params, op, x - eps * d)) / (2 * eps)
            exact = float(g(params, op, x).values @ d)
            worst = max(worst, abs(fd - exact) / abs(exact))
    return worst


def test_6_gradient_checks(acceptance):
    rng = np.random.default_rng(2024)
    rows = []
    ok = True
    for name in PRESETS:
        cfg = preset(name)
        op = cfg.build_operator()
        params = cfg.params()
        # stay where the penalty is moderate: |v| below lam^{1/(m-p)} keeps v^m comparable to v^p
        top = min(1.1, params.lam ** (1 / (params.m - params.p)))
        err = _directional_errors(params, op, rng, 100, -0.2, top)
        ok = ok and err <= 1e-5
        rows.append(f"{name}:{err:.1e}")
    # componentwise check on the one-node toy
    toy = preset("toy-1node")
    op, params = toy.build_operator(), toy.params()
    for v in np.linspace(-1.3, 1.3, 27):
        fd = (eval_jm(params, op, np.array([v + 1e-6])) - eval_jm(params, op, np.array([v - 1e-6]))) / 2e-6
        ok = ok and abs(fd - grad_jm(params, op, np.array([v])).values[0]) <= 1e-5 * max(1.0, abs(fd))
    acceptance(6, ok, "worst directional relative error " + " ".join(rows))
    assert ok


def test_7_radial_identities(acceptance):
    prof = shoot(4.0, 1)
    ok = abs(prof.U0 - 1.85407) <= 1e-4
    details = [f"U0={prof.U0:.6f}"]
    for N, p in ((1, 4.0), (2, 6.0), (3, 4.0)):
        pr = shoot(p, N)
        rel = abs(pr.energy - pr.lp_mass) / pr.lp_mass
        lam_rel = check_gz_conditions(p, N, 1.0, 1.0, prof=pr)["Lambda_U_rel_error"]
        ok = ok and rel <= 1e-8 and lam_rel <= 1e-6
        details.append(f"(N={N},p={p:g}) id={rel:.1e} Lambda={lam_rel:.1e}")
    acceptance(7, ok, "; ".join(details))
    assert ok


def test_8_sqrt_e_and_blowup(acceptance):
    vals = [infinity_limit_norm(p, 1.0, 2) for p in (10, 20, 40, 80)]
    diffs = np.diff(vals)
    monotone = bool(np.all(diffs < 0) or np.all(diffs > 0))
    near = abs(vals[-1] - 1.64872) <= 0.05
    blow = [infinity_limit_norm(6.0 - eps, 1.0, 3) for eps in (0.5, 0.2, 0.1)]
    increasing = blow[0] < blow[1] < blow[2]
    ok = monotone and near and increasing
    acceptance(8, ok, "N=2: " + ", ".join(f"{v:.5f}" for v in vals)
               + "; N=3: " + ", ".join(f"{v:.4f}" for v in blow))
    assert ok


def test_9_eigen_floor(pi_op, acceptance):
    estimate, floor = lambda1_lower_bound(pi_op, ProblemParams(3.0, 4.0))
    ok = abs(floor - 2.0) <= 2e-2 and floor <= estimate and abs(estimate - 8.0 / 3.0) <= 2e-2
    acceptance(9, ok, f"floor={floor:.6f} <= Lambda(phi1)={estimate:.6f}")
    assert ok


def test_10_determinism(tmp_path, capsys, acceptance):
    texts = {}
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["solve-min", "--preset", "interval-pi", "--seed", "7", "--out", str(out)]) == 0
        assert main(["sweep", "--preset", "interval-pi", "--out", str(out)]) == 0
        texts[run] = [(out / name).read_bytes() for name in
                      ("interval-pi-solve-min.json", "interval-pi-sweep.json",
                       "interval-pi-solve-min-u.csv", "interval-pi-sweep-records.csv")]
        manifest = json.loads((out / "interval-pi-sweep-manifest.json").read_text())
        assert manifest["exit_status"] == 0
    capsys.readouterr()
    same = texts["a"] == texts["b"]
    acceptance(10, same, "solve-min (seed 7) and sweep reports byte-identical across two runs")
    assert same
