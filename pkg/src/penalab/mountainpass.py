"""Mountain-pass critical points of J_m and the associated geometry constants.

The solver is a path-deformation method: a polygonal path from 0 to a
negative-level endpoint is stored as ``n_path`` fields; each sweep moves the
highest path point one projected Sobolev-gradient step downhill and then
re-spaces the path by arc length.  The step is projected twice: onto the
complement of the path tangent (energy inner product), so the point slides
off the ridge sideways instead of along the path towards 0, and onto the
nonnegative cone.  Once the path maximum is close to a
critical point, Newton's method on the Euler-Lagrange equation finishes the
job (Newton does not care about the Morse index, so it converges to the
saddle from a good enough guess).

The embedding constant ``C_p = sup ||v||_p / ||grad v||_2`` enters the
geometry only as a diagnostic.  It is estimated by a normalized nonlinear
inverse power iteration, whose fixed points are the critical points of the
quotient; started from the principal eigenfunction it climbs to the
ground-state value.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .functional import energy, gradient, hessian, scaling_constants
from .grid import ScalarField, h1_seminorm_sq, lp_norm
from .operator import laplacian, principal_eigenpair

__all__ = [
    "GeometryReport",
    "MPReport",
    "embedding_constant",
    "mp_geometry",
    "mp_endpoint",
    "mountain_pass",
    "newton_polish",
    "mp_limit_floor",
]


@dataclass(frozen=True)
class GeometryReport:
    r_lambda: float
    rho_m_lambda: float
    sobolev_S: float
    R_threshold: float
    endpoint_norm: float
    geometry_ok: bool

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class MPReport:
    solution: ScalarField
    level: float
    path: list
    residual_norm: float
    iterations: int
    converged: bool
    level_floor: float
    path_max_level: float = math.nan
    history: list = field(default_factory=list)
    message: str = ""

    def to_dict(self, include_history=True):
        d = {
            "level": self.level,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "level_floor": self.level_floor,
            "path_max_level": self.path_max_level,
            "n_path": len(self.path),
            "linf": float(np.abs(self.solution.values).max(initial=0.0)),
            "message": self.message,
        }
        if include_history:
            d["history"] = [
                {"iteration": i, "max_level": lv, "residual": r} for i, lv, r in self.history
            ]
        return d


def embedding_constant(grid, p, tol=1e-13, max_iter=5000):
    """Estimate ``C_p = max ||v||_p / ||grad v||_2`` on the grid (Dirichlet Laplacian)."""
    key = (_grid_key(grid), float(p), tol)
    if key in _EMBED_CACHE:
        return _EMBED_CACHE[key]
    lap = laplacian(grid)
    _, phi = principal_eigenpair(lap)
    lu = lap.lu()
    A, vol = lap.matrix, lap.vol
    v = phi.values.copy()
    q_old = 0.0
    for _ in range(max_iter):
        v /= math.sqrt(float(v @ (A @ v)))
        q = float(np.sum(v**p) * vol) ** (1.0 / p)
        if abs(q - q_old) <= tol * q:
            break
        q_old = q
        v = lu.solve(v ** (p - 1) * vol)
    _EMBED_CACHE[key] = q
    return q


_EMBED_CACHE = {}


def _grid_key(grid):
    return (grid.domain_kind, grid.n, tuple(map(tuple, grid.extents)), grid.n_interior)


def _xm_norm(v, m):
    """``||grad v||_2 + ||v||_m`` on raw arrays through a field."""
    return math.sqrt(h1_seminorm_sq(v)) + lp_norm(v, m)


def mp_geometry(params, op, psi0):
    """Geometry constants of the mountain-pass argument for ``params`` and ``psi0``."""
    if params.is_limit:
        raise ValueError("mp_geometry needs finite m")
    params.check_subcritical(op.grid.dim)
    p, m, lam = params.p, params.m, params.lam
    C = embedding_constant(op.grid, p)
    Cp = C**p  # stands in for S^{p/2} |Omega|^{1 - p/2*}
    r = min(1.0, (p / (4.0 * lam * Cp)) ** (1.0 / (p - 2)))
    log_rho = m * math.log(r) - math.log(m) - (m - 1) * math.log(2.0)
    rho = math.exp(log_rho)
    sigma = Cp / p
    sup = lp_norm(psi0, math.inf)
    dn = math.sqrt(h1_seminorm_sq(psi0))
    R = op.alpha / (4.0 * sigma) * (sup / dn) ** (p - 2)
    T = scaling_constants(params, op, psi0).T_m
    end_norm = _xm_norm(psi0 * T, m)
    return GeometryReport(r, rho, C, R, end_norm, bool(end_norm > r))


def mp_limit_floor(params, op):
    """Lower bound ``rho_inf`` for the limit mountain-pass level.

    ``J_inf(u) >= (alpha/2) r^2 - (lam/p) C_p^p r^p`` with ``r = ||grad u||_2``;
    the maximum over ``r`` is ``alpha r*^2 (p-2)/(2p)`` at
    ``r*^{p-2} = alpha / (lam C_p^p)``.
    """
    params.check_subcritical(op.grid.dim)
    p, lam, alpha = params.p, params.lam, op.alpha
    Cp = embedding_constant(op.grid, p) ** p
    r2 = (alpha / (lam * Cp)) ** (2.0 / (p - 2))
    return alpha * r2 * (p - 2) / (2.0 * p)


def mp_endpoint(params, op, psi0, fallback=None, grow=1.2, max_grow=10):
    """A negative-level endpoint: ``T_m psi0``, enlarged by ``grow`` while needed.

    When enlarging does not help (for instance when ``lam`` is below
    ``Lambda(psi0)``) the ``fallback`` field, typically the minimizer, is
    returned if its level is negative.
    """
    e = psi0 * scaling_constants(params, op, psi0).T_m
    for _ in range(max_grow):
        if energy(params, op, e) < 0:
            return e
        e = e * grow
    if fallback is not None and energy(params, op, fallback) < 0:
        return fallback
    raise ValueError("no endpoint with negative energy found along the ray")


def newton_polish(params, op, init, tol_resid=None, max_iter=60):
    """Newton's method on the Euler-Lagrange equation with a residual line search.

    Returns ``(field, residual, iterations, converged)``.  Iterates are kept
    nonnegative.
    """
    tol = params.tol_resid if tol_resid is None else tol_resid
    x = np.maximum(np.asarray(init.values, dtype=float), 0.0)

    def resid(y):
        return float(np.linalg.norm(gradient(params, op, y).values))

    res = resid(x)
    it = 0
    for it in range(1, max_iter + 1):
        if res <= tol:
            return ScalarField(op.grid, x), res, it - 1, True
        g = gradient(params, op, x).values
        try:
            d = spla.splu(hessian(params, op, x)).solve(-g)
        except RuntimeError:
            break
        if not np.all(np.isfinite(d)):
            break
        t = 1.0
        while t > 1e-10:
            y = np.maximum(x + t * d, 0.0)
            ry = resid(y)
            if ry < (1 - 1e-4 * t) * res:
                break
            t *= 0.5
        else:
            break
        x, res = y, ry
    return ScalarField(op.grid, x), res, it, res <= tol


def _respace(path, m):
    """Re-space the path points uniformly in X_m arc length (linear interpolation)."""
    n = len(path)
    seg = np.array([_xm_norm(path[i + 1] - path[i], m) for i in range(n - 1)])
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return path
    targets = np.linspace(0.0, s[-1], n)
    out = [path[0]]
    for t in targets[1:-1]:
        j = min(int(np.searchsorted(s, t, side="right")) - 1, n - 2)
        w = (t - s[j]) / seg[j] if seg[j] > 0 else 0.0
        out.append(path[j] * (1 - w) + path[j + 1] * w)
    out.append(path[-1])
    return out


def mountain_pass(params, op, endpoint, n_path=24, max_iter=2000, switch_tol=1e-3,
                  tol_resid=None, level_floor=None, init_saddle=None, exclude=None):
    """Mountain-pass point of J_m between 0 and ``endpoint``.

    Parameters
    ----------
    endpoint : ScalarField
        Must have negative energy.
    switch_tol : float
        The deformation loop hands over to Newton once the Sobolev gradient
        norm at the path maximum, relative to the first one, drops below this.
    init_saddle : ScalarField, optional
        Warm start (e.g. the saddle at a nearby ``m``); Newton is tried from it
        first and the path deformation only runs if that fails.
    exclude : list of ScalarField, optional
        Critical points the result must differ from (relative L2 distance
        above 1e-3), typically ``[0, u_m]``.
    """
    if n_path < 8:
        raise ValueError("n_path must be at least 8")
    tol = params.tol_resid if tol_resid is None else tol_resid
    if energy(params, op, endpoint) >= 0:
        raise ValueError("endpoint must have negative energy")
    if level_floor is None:
        try:
            level_floor = mp_limit_floor(params.limit(), op)
        except ValueError:
            level_floor = math.nan
    grid = op.grid
    lu = op.lu()
    A = op.matrix
    m = params.m

    def acceptable(z, res):
        zmax = np.abs(z.values).max(initial=0.0)
        if zmax <= 1e-8 or res > tol:
            return False
        for w in exclude or []:
            ref = max(lp_norm(w, 2), lp_norm(z, 2))
            if lp_norm(z - w, 2) <= 1e-3 * ref:
                return False
        return energy(params, op, z) >= 0

    history = []
    zero = ScalarField.zeros(grid)
    path = [endpoint * (k / (n_path - 1)) for k in range(n_path)]
    if init_saddle is not None:
        z, res, nit, ok = newton_polish(params, op, init_saddle, tol)
        if ok and acceptable(z, res):
            lvl = energy(params, op, z)
            return MPReport(z, lvl, [zero, z, endpoint], res, nit, True, level_floor, lvl,
                            history, "converged from warm start")

    levels = [energy(params, op, v) for v in path]
    g0 = None
    it = 0
    message = "iteration limit reached"
    z = None
    for it in range(1, max_iter + 1):
        k = int(np.argmax(levels[1:-1])) + 1
        x = path[k].values
        g = gradient(params, op, x).values
        s = lu.solve(g)  # Sobolev gradient
        tau = path[k + 1].values - path[k - 1].values
        tnorm2 = float(tau @ (A @ tau))
        if tnorm2 > 0:
            s = s - float(s @ (A @ tau)) / tnorm2 * tau
        d = -s
        gnorm = math.sqrt(max(float(s @ (A @ s)), 0.0))
        if g0 is None:
            g0 = math.sqrt(max(float(g @ lu.solve(g)), 0.0))
        history.append((it, levels[k], float(np.linalg.norm(g))))
        if levels[k] <= 0:
            message = "path maximum collapsed to zero level: no mountain geometry"
            break
        if gnorm <= switch_tol * max(g0, 1e-300):
            z, res, nit, ok = newton_polish(params, op, path[k], tol)
            if ok and acceptable(z, res):
                message = "converged"
                break
            z = None
            switch_tol *= 0.1  # Newton basin not reached yet: keep deforming
        # one projected Armijo step at the maximizer
        fx = levels[k]
        t = 1.0
        while t > 1e-14:
            y = np.maximum(x + t * d, 0.0)
            fy = energy(params, op, y)
            if fy <= fx + 1e-4 * float(g @ (y - x)):
                break
            t *= 0.5
        new_path = list(path)
        new_path[k] = ScalarField(grid, y)
        new_levels = list(levels)
        new_levels[k] = fy
        spaced = _respace(new_path, m)
        spaced_levels = [energy(params, op, v) for v in spaced]
        # keep the re-spaced path only if it does not raise the path maximum
        if max(spaced_levels[1:-1]) <= max(new_levels[1:-1]):
            path, levels = spaced, spaced_levels
        else:
            path, levels = new_path, new_levels

    path_max = float(max(levels))
    if z is None:
        k = int(np.argmax(levels[1:-1])) + 1
        z = path[k]
        res = float(np.linalg.norm(gradient(params, op, z).values))
        converged = False
    else:
        converged = True
    lvl = energy(params, op, z)
    return MPReport(z, lvl, path, res, it, converged, level_floor, path_max, history, message)
