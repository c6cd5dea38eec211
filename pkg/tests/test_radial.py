import math

import numpy as np
import pytest
from scipy.integrate import quad

from penalab import (ShootingError, ball_eigenfunction, check_gz_conditions, gz_condition_scan,
                     infinity_limit_norm, profile_residual, radial_Lambda, shoot, sphere_area)


def _u0_quadrature(p):
    """N = 1: energy conservation V'^2/2 + V^p/p = 1/p gives the first zero by quadrature."""
    r0 = quad(lambda v: 1.0 / math.sqrt(2.0 / p * (1.0 - v**p)), 0.0, 1.0, epsabs=0, epsrel=1e-13)[0]
    return r0 ** (2.0 / (p - 2))


@pytest.mark.parametrize("p", [3.0, 4.0, 7.5])
def test_interval_center_value_matches_quadrature(p):
    assert shoot(p, 1).U0 == pytest.approx(_u0_quadrature(p), rel=1e-9)


@pytest.mark.parametrize("N,p", [(1, 4.0), (2, 6.0), (3, 4.0), (2, 30.0), (3, 5.5)])
def test_energy_identity_and_residual(N, p):
    prof = shoot(p, N)
    assert abs(prof.energy - prof.lp_mass) <= 1e-9 * prof.lp_mass
    assert profile_residual(prof) <= 1e-8
    assert prof.U(1.0) == pytest.approx(0.0, abs=1e-8 * prof.U0)
    assert np.all(np.diff(prof.samples[:, 1]) <= 1e-12)  # radially decreasing


def test_center_normalization_does_not_matter():
    a, b = shoot(4.0, 3), shoot(4.0, 3, v0=7.0)
    assert b.U0 == pytest.approx(a.U0, rel=1e-9)
    assert b.energy == pytest.approx(a.energy, rel=1e-8)
    r = np.linspace(0, 1, 9)
    np.testing.assert_allclose(b.U(r), a.U(r), atol=1e-9 * a.U0)


def test_scaling_in_lambda_and_radius():
    prof = shoot(4.0, 2)
    # w = (lam R^2)^{-1/(p-2)} U(r/R), so doubling lam divides the sup by sqrt(2) when p = 4
    assert infinity_limit_norm(4.0, 2.0, 2, prof) * math.sqrt(2) == pytest.approx(prof.U0, rel=1e-14)
    assert profile_residual(prof, lam=3.0, R=2.5) <= 1e-8


def test_supercritical_rejected():
    with pytest.raises(ShootingError):
        shoot(6.0, 3)
    with pytest.raises(ShootingError):
        shoot(7.0, 3)


def test_two_dimensional_limit_and_three_dimensional_blowup():
    vals = [infinity_limit_norm(p, 1.0, 2) for p in (10, 20, 40, 80)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert abs(vals[-1] - math.sqrt(math.e)) < 0.02
    near = [infinity_limit_norm(6.0 - eps, 1.0, 3) for eps in (0.5, 0.2, 0.1)]
    assert near[0] < near[1] < near[2]


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("N,lam1", [(1, math.pi**2 / 4), (2, 5.783185962946784), (3, math.pi**2)])
def test_ball_eigenfunction(N, lam1):
    lam, phi = ball_eigenfunction(N)
    assert lam == pytest.approx(lam1, rel=1e-12)
    assert phi(0.0) == pytest.approx(1.0) and abs(phi(1.0)) < 1e-12
    # Rayleigh quotient of phi reproduces lambda_1
    assert radial_Lambda(phi, 2.0, N) == pytest.approx(lam, rel=1e-6)


def test_gz_conditions_for_interval():
    rep = check_gz_conditions(4.0, 1, 1.0, 1.0)
    assert rep["Lambda_U_rel_error"] <= 1e-6
    assert rep["condition_b_value"] == pytest.approx(_u0_quadrature(4.0), rel=1e-9)
    assert rep["condition_b"]
    # Lambda(U) = (p/2) U0^{p-2} > U0^{p-2}: the U interval is always empty
    assert not rep["intervals"]["U"]["nonempty"]
    # cos(pi r/2): (p/2) (pi^2/8) / (3/8) = 2 pi^2 / 3
    assert rep["intervals"]["phi1"]["Lambda"] == pytest.approx(2 * math.pi**2 / 3, rel=1e-7)


def test_gz_conditions_user_field_and_scan():
    rep = check_gz_conditions(4.0, 3, 1.0, 1.0, user_field=("tent", lambda r: 1.0 - np.asarray(r)))
    assert set(rep["intervals"]) == {"U", "phi1", "tent"}
    rows = gz_condition_scan([4.0, 5.0], [50.0, 100.0], 3)
    assert len(rows) == 4
    assert not any(r["ok_U"] for r in rows)
    # for N = 3 the phi1 interval is nonempty at p = 5 and contains lam R^2 = 100
    hit = [r for r in rows if r["p"] == 5.0 and r["lambda_R2"] == 100.0][0]
    assert hit["ok_phi1"] and hit["Lambda_phi1"] < 100.0 < hit["U0_pow"]
