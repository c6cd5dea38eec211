"""Global minimizer of J_m and the constrained minimizer of J_inf over K = {0 <= v <= 1}.

``minimize_jm`` runs projected Sobolev-gradient descent with an Armijo search
and switches to damped Newton once the Hessian gives a descent direction.
``minimize_jinf_on_K`` is a two-metric projected Newton method for the box.
Both return a :class:`SolveReport` whose ``level`` is re-evaluated at the
returned field.
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .exceptions import ConvergenceError, PenalabWarning
from .functional import energy, gradient, hessian, scaling_constants
from .grid import ScalarField

__all__ = [
    "SolveReport",
    "initial_guess",
    "minimize_jm",
    "minimize_jinf_on_K",
    "multistart_min",
    "random_start",
]

ARMIJO_C = 1e-4
BACKTRACK = 0.5
MIN_STEP = 1e-14


@dataclass
class SolveReport:
    solution: ScalarField
    level: float
    residual_norm: float
    iterations: int
    converged: bool
    negativity_certificate: float
    history: list = field(default_factory=list)
    message: str = ""

    def to_dict(self, include_history=True):
        d = {
            "level": self.level,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "negativity_certificate": self.negativity_certificate,
            "linf": float(np.abs(self.solution.values).max(initial=0.0)),
            "message": self.message,
        }
        if include_history:
            d["history"] = [{"level": lv, "residual": r} for lv, r in self.history]
        return d


def initial_guess(params, op, psi0):
    """The ray point ``T_m psi0``; warns when ``Lambda(psi0) >= lam``."""
    rep = scaling_constants(params, op, psi0)
    if rep.Lambda_psi >= params.lam:
        warnings.warn(
            f"lambda = {params.lam:g} does not exceed Lambda(psi0) = {rep.Lambda_psi:.6g}; "
            "a negative level is not guaranteed",
            PenalabWarning,
            stacklevel=2,
        )
    return psi0 * rep.T_m


def _newton_direction(H, g):
    try:
        d = spla.splu(H).solve(-g)
    except RuntimeError:  # exactly singular
        return None
    if not np.all(np.isfinite(d)):
        return None
    return d


def _full_newton_step(f, resid, x, fx, d, lo, hi, res):
    """Accept the full step if it halves the residual without raising the energy
    beyond roundoff.  Close to a solution the Armijo test compares energy
    differences far below machine precision, so it cannot be trusted there.
    """
    y = np.clip(x + d, lo, hi)
    fy = f(y)
    if fy <= fx + 1e-13 * max(1.0, abs(fx)) and resid(y) <= 0.5 * res:
        return y, fy, 1.0
    return None


def _projected_search(f, x, fx, g, d, lo, hi, t0=1.0):
    """Armijo search along the projection arc ``P(x + t d)``; returns (x, fx, t) or None."""
    t = t0
    while t >= MIN_STEP:
        y = np.clip(x + t * d, lo, hi)
        if np.array_equal(y, x):
            return None
        fy = f(y)
        if fy <= fx + ARMIJO_C * float(g @ (y - x)) and fy <= fx:
            return y, fy, t
        t *= BACKTRACK
    return None


def minimize_jm(params, op, init, max_iter=2000, tol_resid=None):
    """Minimize J_m from ``init`` over nonnegative fields.

    The residual reported is the 2-norm of the volume-weighted gradient, so a
    converged solution solves the discrete Euler-Lagrange equation to
    ``tol_resid`` (absolute).
    """
    if params.is_limit:
        raise ValueError("minimize_jm needs finite m")
    tol = params.tol_resid if tol_resid is None else tol_resid
    grid = op.grid
    lu = op.lu()

    def f(y):
        return energy(params, op, y)

    def resid(y):
        gy = gradient(params, op, y).values
        return float(np.linalg.norm(np.where((y <= 0) & (gy > 0), 0.0, gy)))

    x = np.maximum(np.asarray(init.values, dtype=float), 0.0)
    f_init = f(np.asarray(init.values))
    fx = f(x)
    history = []
    converged = False
    message = ""
    it = 0
    for it in range(1, max_iter + 1):
        g = gradient(params, op, x).values
        # only components that can move matter: at x = 0 a positive gradient is blocked
        res = resid(x)
        history.append((fx, res))
        if res <= tol:
            converged = True
            break
        step = None
        if res < 1e-2 * max(1.0, history[0][1]) or it > 20:
            d = _newton_direction(hessian(params, op, x), g)
            if d is not None and float(g @ d) < -1e-14 * np.linalg.norm(g) * np.linalg.norm(d):
                step = _full_newton_step(f, resid, x, fx, d, 0.0, np.inf, res)
                if step is None:
                    step = _projected_search(f, x, fx, g, d, 0.0, np.inf)
        if step is None:
            d = -lu.solve(g)  # Sobolev gradient: resolution independent step length
            step = _projected_search(f, x, fx, g, d, 0.0, np.inf)
        if step is None:
            message = "line search failed"
            break
        x_new, f_new, _ = step
        if np.array_equal(x_new, x):
            message = "stagnated"
            break
        x, fx = x_new, f_new
    else:
        message = "iteration limit reached"

    sol = ScalarField(grid, x)
    level = f(x)
    res = resid(x)
    converged = converged or res <= tol
    delta = max(-f_init, 1e-12)
    return SolveReport(sol, level, res, it, converged, level + delta, history,
                       message or ("converged" if converged else ""))


def _kkt_residual(x, g, lo=0.0, hi=1.0):
    """Volume-weighted projected gradient: g on free nodes, blocked parts removed."""
    r = g.copy()
    r[(x <= lo) & (g > 0)] = 0.0
    r[(x >= hi) & (g < 0)] = 0.0
    return r


def minimize_jinf_on_K(params, op, init, max_iter=500, tol_resid=None):
    """Minimize J_inf over K by projected Newton with an Armijo arc search.

    Nodes sitting on a bound with the gradient pushing outward form the
    binding set; the Newton system is solved on the remaining nodes and the
    binding nodes take a scaled gradient step, which keeps the direction a
    descent direction.  Convergence is declared when the projected residual
    ``||vol (u - P(u - g/vol))||`` is at most ``tol_resid``.
    """
    tol = params.tol_resid if tol_resid is None else tol_resid
    lim = params.limit()
    grid, vol = op.grid, op.vol

    def f(y):
        return energy(lim, op, y)

    def resid(y):
        gy = gradient(lim, op, y).values
        return float(np.linalg.norm(vol * (y - np.clip(y - gy / vol, 0.0, 1.0))))

    x = np.clip(np.asarray(init.values, dtype=float), 0.0, 1.0)
    fx = f(x)
    history = []
    converged = False
    message = ""
    it = 0
    diag = op.matrix.diagonal()
    for it in range(1, max_iter + 1):
        g = gradient(lim, op, x).values
        res = resid(x)
        history.append((fx, res))
        if res <= tol:
            converged = True
            break
        # binding set with an epsilon margin, as in Bertsekas' two-metric method
        eps = min(1e-3, res / vol)
        binding = ((x <= eps) & (g > 0)) | ((x >= 1 - eps) & (g < 0))
        free = ~binding
        d = np.zeros_like(x)
        d[binding] = -g[binding] / diag[binding]
        step = None
        if free.any():
            H = hessian(lim, op, x)[free][:, free].tocsc()
            df = _newton_direction(H, g[free])
            if df is not None:
                d[free] = df
                if float(g @ d) < 0:
                    step = _full_newton_step(f, resid, x, fx, d, 0.0, 1.0, res)
                    if step is None:
                        step = _projected_search(f, x, fx, g, d, 0.0, 1.0)
        if step is None:
            d = -g / diag
            step = _projected_search(f, x, fx, g, d, 0.0, 1.0, t0=1.0)
        if step is None:
            message = "line search failed"
            break
        x_new, fx, _ = step
        if np.array_equal(x_new, x):
            message = "stagnated"
            break
        x = x_new
    else:
        message = "iteration limit reached"

    res = resid(x)
    converged = converged or res <= tol
    level = f(x)
    delta = max(-f(np.clip(init.values, 0.0, 1.0)), 1e-12)
    return SolveReport(ScalarField(grid, x), level, res, it, converged, level + delta, history,
                       message or ("converged" if converged else ""))


def random_start(params, grid, rng):
    """Smooth-ish random nonnegative start below the sup bound."""
    top = params.lam ** (1.0 / (params.m - params.p)) if not params.is_limit else 1.0
    coords = grid.coords()
    bump = np.ones(grid.n_interior)
    for c, (lo, hi) in zip(coords, grid.extents):
        k = rng.integers(1, 4)
        bump *= np.abs(np.sin(k * np.pi * (c - lo) / (hi - lo)))
    noise = rng.uniform(0.5, 1.0, grid.n_interior)
    return ScalarField(grid, top * rng.uniform(0.3, 1.2) * bump * noise)


def multistart_min(params, op, psi0, n_random=5, seed=0, jobs=1):
    """Run :func:`minimize_jm` from the ray start and ``n_random`` random starts.

    Returns ``(best, reports)`` where ``best`` has the lowest level among the
    converged runs (or among all runs if none converged).  Results do not
    depend on ``jobs``.
    """
    rng = np.random.default_rng(seed)
    starts = [initial_guess(params, op, psi0)]
    starts += [random_start(params, op.grid, rng) for _ in range(n_random)]

    def run(s):
        try:
            return minimize_jm(params, op, s)
        except ConvergenceError as exc:  # pragma: no cover - defensive
            return SolveReport(s, energy(params, op, s), math.inf, 0, False, math.inf, [], str(exc))

    op.lu()  # factor once before any worker touches the cache
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run, starts))
    else:
        reports = [run(s) for s in starts]
    pool_ = [r for r in reports if r.converged] or reports
    best = min(pool_, key=lambda r: r.level)
    return best, reports
