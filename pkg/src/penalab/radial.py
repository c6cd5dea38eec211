"""Radial Lane-Emden profiles on balls, their scaling family and related checks.

The normalized problem ``V'' + (N-1)/r V' + V^{p-1} = 0``, ``V(0) = 1``,
``V'(0) = 0`` is integrated to its first zero ``r0``.  The unit-ball solution
of ``-Delta U = U^{p-1}`` is then ``U(r) = c V(r0 r)`` with ``c = r0^{2/(p-2)}``,
so ``U(0) = c``.  Gradient energy and L^p mass are integrated alongside the
profile.  For ``N = 1`` the "ball" is the interval ``(-1, 1)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.integrate import quad, solve_ivp
from scipy.special import gamma, j0, jn_zeros

from .exceptions import ShootingError
from .functional import sobolev_2star

__all__ = [
    "RadialProfile",
    "sphere_area",
    "shoot",
    "profile_residual",
    "scaled_residual",
    "check_gz_conditions",
    "infinity_limit_norm",
    "ball_eigenfunction",
    "radial_Lambda",
    "gz_condition_scan",
]

ODE_TOL = 1e-10
_R_START = 1e-3


def sphere_area(N):
    """Measure of the unit sphere in R^N (2 points for N = 1)."""
    return 2.0 * math.pi ** (N / 2.0) / gamma(N / 2.0)


@dataclass
class RadialProfile:
    p: float
    N: int
    r0: float
    U0: float
    samples: np.ndarray
    energy: float
    lp_mass: float
    V: object = field(default=None, repr=False)
    v0: float = 1.0

    def U(self, r):
        """Unit-ball profile at radii ``r`` in [0, 1]."""
        r = np.asarray(r, dtype=float)
        return self.U0 / self.v0 * self._V(self.r0 * r)

    def dU(self, r):
        r = np.asarray(r, dtype=float)
        return self.U0 / self.v0 * self.r0 * self._dV(self.r0 * r)

    def _V(self, s):
        s = np.asarray(s, dtype=float)
        small = s < _R_START / max(1.0, self.v0 ** ((self.p - 2) / 2.0))
        out = np.empty_like(s)
        out[small] = _series(s[small], self.N, self.p, self.v0)[0]
        if np.any(~small):
            out[~small] = self.V(np.log(s[~small]))[0]
        return out

    def _dV(self, s):
        s = np.asarray(s, dtype=float)
        small = s < _R_START / max(1.0, self.v0 ** ((self.p - 2) / 2.0))
        out = np.empty_like(s)
        out[small] = _series(s[small], self.N, self.p, self.v0)[1]
        if np.any(~small):
            out[~small] = self.V(np.log(s[~small]))[1] / s[~small]
        return out

    def to_dict(self):
        return {"p": self.p, "N": self.N, "r0": self.r0, "U0": self.U0,
                "energy": self.energy, "lp_mass": self.lp_mass,
                "identity_rel_error": abs(self.energy - self.lp_mass) / self.lp_mass}


def _series(r, N, p, v0=1.0):
    """Taylor start ``V = v0 (1 - s^2/(2N) + (p-1) s^4 / (8 N (N+2)))`` with ``s = v0^{(p-2)/2} r``."""
    b = v0 ** ((p - 2) / 2.0)
    s = b * r
    s2 = s * s
    v = 1.0 - s2 / (2 * N) + (p - 1) * s2 * s2 / (8.0 * N * (N + 2))
    dv = -s / N + (p - 1) * s2 * s / (2.0 * N * (N + 2))
    return v0 * v, v0 * b * dv


def shoot(p, N, ode_tol=ODE_TOL, n_samples=201, r_max=None, v0=1.0):
    """Shoot the normalized profile to its first zero and rescale to the unit ball.

    ``v0`` is the centre value of the normalized profile.  Any positive
    choice gives the same unit-ball solution, which makes it a cheap
    consistency check.  Raises :class:`ShootingError` if no zero is found
    before ``r_max`` (the profile of a critical or supercritical exponent
    never vanishes).
    """
    N = int(N)
    if N < 1:
        raise ValueError("dimension must be at least 1")
    if not p > 2:
        raise ValueError(f"need p > 2, got {p}")
    if p >= sobolev_2star(N):
        raise ShootingError(f"p = {p} is not below the critical exponent {sobolev_2star(N):g} for N = {N}")

    # integrate in t = log r with W = r V'; the first zero can lie at r ~ exp((p-2)/4)
    # for N = 2 and large p, far beyond any practical linear range
    def rhs(t, y):
        v, w = y[0], y[1]
        e2t = math.exp(2.0 * t)
        vp = abs(v) ** (p - 1) * math.copysign(1.0, v)
        return [w, -(N - 2) * w - e2t * vp, w * w * math.exp((N - 2) * t), abs(v) ** p * math.exp(N * t)]

    def hit_zero(t, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1

    if not v0 > 0:
        raise ValueError("v0 must be positive")
    b = v0 ** ((p - 2) / 2.0)
    r1 = min(_R_START, _R_START / b)
    t1 = math.log(r1)
    v1, dv1 = _series(np.array(r1), N, p, v0)
    # the integrands are O(r^{N+1}) and O(r^{N-1}) near 0; add the start pieces
    s1 = b * r1
    e1 = s1 ** (N + 2) / (N * N * (N + 2)) - (p - 1) * s1 ** (N + 4) / (N * N * (N + 2) * (N + 4))
    m1 = s1**N / N - p * s1 ** (N + 2) / (2.0 * N * (N + 2))
    e1 *= v0 * v0 * b ** (2 - N)
    m1 *= v0**p * b ** (-N)
    y0 = [float(v1), float(r1 * dv1), e1, m1]
    limits = [math.log(r_max)] if r_max is not None else [5.0, 40.0, 340.0]
    sol = None
    for lim in limits:
        with np.errstate(over="ignore"):
            sol = solve_ivp(rhs, (t1, lim), y0, method="DOP853", rtol=1e-13, atol=1e-15,
                            events=hit_zero, dense_output=True)
        if sol.status == -1:
            raise ShootingError(f"integration failed: {sol.message}")
        if sol.t_events[0].size:
            break
    if not sol.t_events[0].size:
        raise ShootingError(f"no zero of the profile before r = exp({limits[-1]:g}) (p = {p}, N = {N})")
    t0 = float(sol.t_events[0][0])
    # polish the event location by bisection on the dense output
    lo, hi = t0 - 1e-6, min(t0 + 1e-6, sol.t[-1])
    if sol.sol(lo)[0] > 0 and sol.sol(hi)[0] <= 0:
        while hi - lo > ode_tol * 1e-3:
            mid = 0.5 * (lo + hi)
            if sol.sol(mid)[0] > 0:
                lo = mid
            else:
                hi = mid
        t0 = 0.5 * (lo + hi)
    yend = sol.sol(t0)
    r0 = math.exp(t0)
    log_c = 2.0 * t0 / (p - 2)
    c = math.exp(log_c)
    area = sphere_area(N)
    # U(r) = c V(r0 r): int |U'|^2 r^{N-1} = c^2 r0^{2-N} int |V'|^2 s^{N-1} ds, same for U^p
    energy = area * math.exp(2 * log_c + (2 - N) * t0) * yend[2]
    lp_mass = area * math.exp(p * log_c - N * t0) * yend[3]
    prof = RadialProfile(p, N, r0, c * v0, None, energy, lp_mass, sol.sol, v0)
    rr = np.linspace(0.0, 1.0, n_samples)
    prof.samples = np.column_stack([rr, prof.U(rr)])
    return prof


def profile_residual(prof, lam=1.0, R=1.0, degree=30):
    """Max-norm residual of ``-Delta w = lam w^{p-1}`` for the scaled profile on B_R.

    ``w(r) = (1/(lam R^2))^{1/(p-2)} U(r/R)``.  The flux ``r^{N-1} w'`` is
    interpolated at Chebyshev points on geometric panels ``[R 2^{-j-1}, R 2^{-j}]``
    that reach well inside the core of the profile, and differentiated once.
    The residual is relative to the centre value ``lam w(0)^{p-1}``.
    """
    p, N = prof.p, prof.N
    k = (1.0 / (lam * R * R)) ** (1.0 / (p - 2))
    n_panels = min(400, 4 + int(math.ceil(math.log2(max(prof.r0, 1.0)))))
    nodes = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
    scale = lam * (k * prof.U0) ** (p - 1)
    worst = 0.0
    for j in range(n_panels):
        b = R * 2.0**-j
        a = 0.5 * b
        r = a + (b - a) * (nodes + 1) / 2
        w = k * prof.U(r / R)
        flux = r ** (N - 1) * k * prof.dU(r / R) / R
        coef = C.chebfit(nodes, flux, degree)
        lap = C.chebval(nodes, C.chebder(coef)) * (2 / (b - a)) / r ** (N - 1)
        react = lam * np.abs(w) ** (p - 1)
        worst = max(worst, float(np.max(np.abs(-lap - react))))
    return worst / scale


def scaled_residual(prof, lam, R):
    return profile_residual(prof, lam, R)


def ball_eigenfunction(N):
    """Principal Dirichlet eigenpair of the unit ball as ``(lambda1, phi(r))``, ``phi(0) = 1``."""
    if N == 1:
        return (math.pi / 2) ** 2, lambda r: np.cos(np.pi * np.asarray(r) / 2)
    if N == 2:
        j = float(jn_zeros(0, 1)[0])
        return j * j, lambda r: j0(j * np.asarray(r))
    if N == 3:
        return math.pi**2, lambda r: np.sinc(np.asarray(r))
    raise ValueError("ball eigenfunction is tabulated for N <= 3 only")


def radial_Lambda(phi, p, N, dphi=None, beta=1.0):
    """``p (beta/2) ||grad phi||^2 ||phi||_inf^{p-2} / ||phi||_p^p`` for a radial ``phi`` on the unit ball.

    Derivatives are taken by a central difference when ``dphi`` is omitted.
    """
    if dphi is None:
        def dphi(r, h=1e-6):
            r = np.asarray(r, dtype=float)
            lo = np.maximum(r - h, 0.0)
            hi = np.minimum(r + h, 1.0)
            return (phi(hi) - phi(lo)) / (hi - lo)
    opts = dict(limit=400, epsabs=0.0, epsrel=1e-12)
    grad = quad(lambda r: float(dphi(r)) ** 2 * r ** (N - 1), 0.0, 1.0, **opts)[0]
    mass = quad(lambda r: abs(float(phi(r))) ** p * r ** (N - 1), 0.0, 1.0, **opts)[0]
    rr = np.linspace(0.0, 1.0, 2001)
    sup = float(np.max(np.abs(phi(rr))))
    return p * 0.5 * beta * grad * sup ** (p - 2) / mass


def check_gz_conditions(p, N, lam, R, user_field=None, prof=None):
    """Evaluate the two sufficient conditions for a nontrivial mountain-pass multiplier on B_R.

    Returns a dict with condition (b) ``(1/(lam R^2))^{1/(p-2)} U(0) > 1``,
    the identity ``Lambda(U) = (p/2) U(0)^{p-2}``, and for each test field
    ``phi`` whether the interval ``(Lambda(phi), U(0)^{p-2})`` is nonempty and
    whether it contains ``lam R^2``.  ``user_field`` is an optional pair
    ``(name, phi)`` of a radial function on [0, 1].
    """
    prof = shoot(p, N) if prof is None else prof
    U0 = prof.U0
    cond_b_value = (1.0 / (lam * R * R)) ** (1.0 / (p - 2)) * U0
    Lambda_U = float(p * 0.5 * prof.energy * U0 ** (p - 2) / prof.lp_mass)
    Lambda_U_formula = p / 2 * U0 ** (p - 2)
    top = U0 ** (p - 2)
    lam1, phi1 = ball_eigenfunction(N) if N <= 3 else (None, None)
    fields = [("U", Lambda_U)]
    if phi1 is not None:
        fields.append(("phi1", radial_Lambda(phi1, p, N)))
    if user_field is not None:
        name, phi = user_field
        fields.append((name, radial_Lambda(phi, p, N)))
    intervals = {}
    for name, L in fields:
        intervals[name] = {
            "Lambda": L,
            "upper": top,
            "nonempty": bool(L < top),
            "contains_lambda_R2": bool(L < lam * R * R < top),
        }
    return {
        "p": p, "N": N, "lambda": lam, "R": R, "U0": U0,
        "condition_b_value": cond_b_value,
        "condition_b": bool(cond_b_value > 1.0),
        "Lambda_U": Lambda_U,
        "Lambda_U_formula": Lambda_U_formula,
        "Lambda_U_rel_error": abs(Lambda_U - Lambda_U_formula) / Lambda_U_formula,
        "intervals": intervals,
    }


def infinity_limit_norm(p, lam, N=2, prof=None):
    """``lam^{-1/(p-2)} U(0)``: sup norm of the solution of ``-Delta w = lam w^{p-1}`` on the unit ball."""
    prof = shoot(p, N) if prof is None else prof
    return lam ** (-1.0 / (p - 2)) * prof.U0


def gz_condition_scan(p_values, lamR2_values, N):
    """Grid search over ``(p, lam R^2)`` for the interval test with ``phi = phi1`` and ``phi = U``.

    Each row reports whether ``Lambda(phi) < lam R^2 < U(0)^{p-2}`` holds.
    The scan is a per-instance verdict, not a statement about existence.
    """
    rows = []
    for p in p_values:
        prof = shoot(p, N)
        rep = check_gz_conditions(p, N, 1.0, 1.0, prof=prof)
        for s in lamR2_values:
            row = {"p": p, "lambda_R2": s, "U0_pow": prof.U0 ** (p - 2)}
            for name, iv in rep["intervals"].items():
                row[f"Lambda_{name}"] = iv["Lambda"]
                row[f"ok_{name}"] = bool(iv["Lambda"] < s < iv["upper"])
            rows.append(row)
    return rows
