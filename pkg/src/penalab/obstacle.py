"""Variational inequality on K = {0 <= v <= 1} and its complementarity multiplier.

A solution ``u`` of the inequality satisfies ``A u - lam (u+)^{p-1} vol = -g vol``
with a multiplier ``g`` that vanishes where ``u < 1`` and lies in ``[0, lam]``
on the coincidence set ``{u = 1}``.

:func:`solve_vi` combines three pieces:

* projected SOR (:func:`psor`) for the linear obstacle problem
  ``min 1/2 v.Av - f.v`` over the box,
* the outer Picard map ``u -> psor(lam (u+)^{p-1} vol)``,
* an active-set Newton iteration that keeps the coincidence set fixed and
  solves the nonlinear equation on the free nodes.

The Picard map is a contraction near constrained minimizers but expands near
mountain-pass type solutions, so it cannot reach them on its own; the
active-set Newton step converges locally to either kind.  Which solution is
found depends on the initial field.
"""

import math
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ConvergenceError
from .functional import safe_pow
from .grid import ScalarField
from .operator import principal_eigenpair

__all__ = [
    "MultiplierReport",
    "VIReport",
    "psor",
    "picard_step",
    "solve_vi",
    "extract_multiplier",
    "probe_vi",
    "default_probes",
]

COIN_TOL = 1e-6
G_TRIV_TOL = 1e-4
BOX_TOL = 1e-8


@numba.njit(cache=True)
def _psor_sweeps(indptr, indices, data, diag, b, lo, hi, x, omega, n_sweeps):
    n = x.size
    change = 0.0
    for _ in range(n_sweeps):
        change = 0.0
        for i in range(n):
            s = b[i]
            for k in range(indptr[i], indptr[i + 1]):
                j = indices[k]
                if j != i:
                    s -= data[k] * x[j]
            xn = (1.0 - omega) * x[i] + omega * s / diag[i]
            if xn < lo:
                xn = lo
            elif xn > hi:
                xn = hi
            d = abs(xn - x[i])
            if d > change:
                change = d
            x[i] = xn
    return change


def _box_residual(A, b, x, lo, hi):
    r = A @ x - b
    r[(x <= lo) & (r > 0)] = 0.0
    r[(x >= hi) & (r < 0)] = 0.0
    return float(np.linalg.norm(r))


def psor(A, b, lo=0.0, hi=1.0, x0=None, omega=1.5, tol=1e-13, max_sweeps=500000, check_every=20):
    """Projected SOR for ``min 1/2 x.Ax - b.x`` subject to ``lo <= x <= hi``.

    Stops when the projected residual is at most ``tol * max(||b||, tiny)``,
    or when it has stopped improving at a level below ``1e-9 ||b||`` (the
    roundoff floor of ``A x`` can sit above very small targets).  If the
    residual grows between checks the relaxation factor drops to 1
    (projected Gauss-Seidel, which is monotone for M-matrices).

    Returns ``(x, sweeps, residual)``.
    """
    A = A.tocsr()
    diag = A.diagonal()
    x = np.clip(np.zeros(A.shape[0]) if x0 is None else np.array(x0, dtype=float), lo, hi)
    scale = max(float(np.linalg.norm(b)), 1e-300)
    res = _box_residual(A, b, x, lo, hi)
    best, stall = res, 0
    sweeps = 0
    while res > tol * scale:
        if sweeps >= max_sweeps or stall >= 50:
            if res <= 1e-9 * scale:
                break
            raise ConvergenceError(
                f"projected SOR stagnated at relative residual {res / scale:.3e}",
                residual=res / scale,
                iterations=sweeps,
            )
        _psor_sweeps(A.indptr, A.indices, A.data, diag, b, lo, hi, x, omega, check_every)
        sweeps += check_every
        new = _box_residual(A, b, x, lo, hi)
        if new > res and omega != 1.0:
            omega = 1.0
        res = new
        if res < 0.999 * best:
            best, stall = res, 0
        else:
            stall += 1
    return x, sweeps, res


@dataclass(frozen=True)
class MultiplierReport:
    g: ScalarField
    g_min: float
    g_max: float
    complementarity_defect: float
    coincidence_measure: float
    g_nontrivial: bool

    def to_dict(self):
        return {
            "g_min": self.g_min,
            "g_max": self.g_max,
            "complementarity_defect": self.complementarity_defect,
            "coincidence_measure": self.coincidence_measure,
            "g_nontrivial": self.g_nontrivial,
            "g_l1": float(np.abs(self.g.values).sum() * self.g.grid.cell_volume),
        }

    def bounds_ok(self, lam, box_tol=BOX_TOL):
        return self.g_min >= -box_tol and self.g_max <= lam * (1 + box_tol)


@dataclass
class VIReport:
    solution: ScalarField
    multiplier: MultiplierReport
    vi_defect: float
    iterations: int
    converged: bool
    fixed_point_gap: float = math.nan
    kkt_residual: float = math.nan
    message: str = ""

    def to_dict(self):
        return {
            "vi_defect": self.vi_defect,
            "iterations": self.iterations,
            "converged": self.converged,
            "fixed_point_gap": self.fixed_point_gap,
            "kkt_residual": self.kkt_residual,
            "linf": float(np.abs(self.solution.values).max(initial=0.0)),
            "multiplier": self.multiplier.to_dict(),
            "message": self.message,
        }


def _reaction(params, x, vol):
    return params.lam * safe_pow(np.maximum(x, 0.0), params.p - 1) * vol


def extract_multiplier(params, op, u, coin_tol=COIN_TOL, g_triv_tol=G_TRIV_TOL):
    """Nodal multiplier ``g = (lam (u+)^{p-1} vol - A u) / vol`` and its diagnostics.

    Raw values are reported; nothing is clipped before the defects are measured.
    """
    x = u.values
    vol = op.vol
    g = (_reaction(params, x, vol) - op.matrix @ x) / vol
    gf = ScalarField(op.grid, g)
    comp = float(np.abs(g * (1.0 - x)).max(initial=0.0))
    coin = float(np.count_nonzero(x >= 1.0 - coin_tol)) * vol
    l1 = float(np.abs(g).sum()) * vol
    return MultiplierReport(
        gf,
        float(g.min(initial=0.0)),
        float(g.max(initial=0.0)),
        comp,
        coin,
        bool(l1 > g_triv_tol * op.grid.measure),
    )


def default_probes(op, n_random=20, seed=0):
    """Zero, one, the clipped principal eigenfunction and random fields in K."""
    grid = op.grid
    rng = np.random.default_rng(seed)
    _, phi = principal_eigenpair(op)
    probes = [ScalarField.zeros(grid), ScalarField.constant(grid, 1.0),
              ScalarField(grid, np.clip(phi.values, 0.0, 1.0))]
    probes += [ScalarField(grid, rng.random(grid.n_interior)) for _ in range(n_random)]
    return probes


def probe_vi(params, op, u, probes=None):
    """Smallest value of ``(v-u).A u - lam sum (u+)^{p-1} (v-u) vol`` over the probes."""
    if probes is None:
        probes = default_probes(op)
    x = u.values
    Au = op.matrix @ x
    r = _reaction(params, x, op.vol)
    worst = math.inf
    for v in probes:
        if v.min() < 0 or v.max() > 1:
            raise ValueError("probe field is outside K")
        w = v.values - x
        worst = min(worst, float(w @ Au) - float(r @ w))
    return worst


def picard_step(params, op, u, omega=1.5, inner_tol=1e-13):
    """One application of the Picard map: the obstacle problem with frozen right-hand side."""
    b = _reaction(params, u, op.vol)
    x, sweeps, _ = psor(op.matrix, b, 0.0, 1.0, x0=u, omega=omega, tol=inner_tol)
    return x, sweeps


def _kkt_residual(params, op, x):
    """Volume-weighted projected residual of the inequality on the box."""
    r = op.matrix @ x - _reaction(params, x, op.vol)
    r[(x <= 0) & (r > 0)] = 0.0
    r[(x >= 1) & (r < 0)] = 0.0
    return float(np.linalg.norm(r))


def _active_set_newton(params, op, x0, tol, max_outer=60, max_inner=40):
    """Active-set Newton for the inequality, starting from ``x0`` in K.

    The coincidence sets ``{x = 1, g > 0}`` and ``{x = 0, g < 0}`` are frozen,
    Newton solves the equation on the remaining nodes, and the sets are
    updated from the overshoot and the multiplier sign until they repeat.
    """
    A, vol = op.matrix.tocsr(), op.vol
    lam, p = params.lam, params.p
    x = np.clip(x0, 0.0, 1.0)

    def g_of(y):
        return (_reaction(params, y, vol) - A @ y) / vol

    g = g_of(x)
    upper = (x >= 1.0) & (g > 0)
    lower = (x <= 0.0) & (g < 0)
    seen = set()
    for _ in range(max_outer):
        free = ~(upper | lower)
        y = x.copy()
        y[upper] = 1.0
        y[lower] = 0.0
        fidx = np.flatnonzero(free)
        if fidx.size:
            Aff = A[fidx][:, fidx].tocsc()

            def F(z):
                return (A @ z - _reaction(params, z, vol))[fidx]

            r = F(y)
            rn = float(np.linalg.norm(r))
            for _ in range(max_inner):
                # Newton converges quadratically, so aim well below tol: the
                # verification Picard step amplifies what is left near saddles
                if rn <= 1e-4 * tol:
                    break
                curv = lam * (p - 1) * safe_pow(np.maximum(y[fidx], 0.0), p - 2) * vol
                J = (Aff - sp.diags(curv)).tocsc()
                try:
                    d = spla.splu(J).solve(-r)
                except RuntimeError:
                    return x, False
                t = 1.0
                while t > 1e-10:
                    z = y.copy()
                    z[fidx] += t * d
                    rz = F(z)
                    rzn = float(np.linalg.norm(rz))
                    if rzn < (1 - 1e-4 * t) * rn:
                        break
                    t *= 0.5
                else:
                    break
                y, r, rn = z, rz, rzn
        g = g_of(y)
        new_upper = (y > 1.0) | (upper & (g > 0))
        new_lower = (y < 0.0) | (lower & (g < 0))
        x = np.clip(y, 0.0, 1.0)
        key = (new_upper.tobytes(), new_lower.tobytes())
        if np.array_equal(new_upper, upper) and np.array_equal(new_lower, lower):
            return x, _kkt_residual(params, op, x) <= tol
        if key in seen:  # cycling between active sets
            return x, _kkt_residual(params, op, x) <= tol
        seen.add(key)
        upper, lower = new_upper, new_lower
    return x, _kkt_residual(params, op, x) <= tol


def solve_vi(params, op, init, max_outer=200, omega=1.5, tol_fp=None, probes=None):
    """Solve the variational inequality on K starting from ``init``.

    The active-set Newton iteration is tried first from the projected initial
    field.  If it fails, Picard iterations run while they contract and the
    Newton iteration restarts from the last contracting iterate.  The result
    is then checked with one Picard step: ``fixed_point_gap`` is the sup-norm
    change it produces and must be at most ``tol_fp`` for convergence.
    """
    tol_fp = params.tol_fp if tol_fp is None else tol_fp
    tol = params.tol_resid
    lim = params.limit()
    grid = op.grid
    x0 = np.clip(np.asarray(init.values, dtype=float), 0.0, 1.0)
    picard_iters = 0
    message = ""

    x, ok = _active_set_newton(lim, op, x0, tol)
    if not ok:
        y = x0
        last = math.inf
        for _ in range(max_outer):
            z, _ = picard_step(lim, op, y, omega)
            picard_iters += 1
            delta = float(np.abs(z - y).max(initial=0.0))
            if delta > last:  # the Picard map expands here: stop before it drifts away
                break
            y, last = z, delta
            if delta <= tol_fp:
                break
        else:
            message = "Picard iteration limit reached"
        x, ok = _active_set_newton(lim, op, y, tol)

    # verification: one more application of the Picard map
    z, _ = picard_step(lim, op, x, omega)
    picard_iters += 1
    gap = float(np.abs(z - x).max(initial=0.0))
    sol = ScalarField(grid, x)
    mult = extract_multiplier(lim, op, sol)
    defect = probe_vi(lim, op, sol, probes)
    kkt = _kkt_residual(lim, op, x)
    converged = bool(ok and gap <= tol_fp and defect >= -params.tol_vi)
    if not message:
        message = "converged" if converged else "not converged"
    return VIReport(sol, mult, defect, picard_iters, converged, gap, kkt, message)
