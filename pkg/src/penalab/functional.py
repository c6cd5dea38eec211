"""Energies J_m and J_inf, their residuals, ray scaling constants and a priori bounds.

For a parameter set ``(lam, p, m)`` and the assembled operator ``op`` the
discrete energies are

    J_m(v)   = 1/2 v.Av + (1/m) sum |v|^m vol - (lam/p) sum (v+)^p vol
    J_inf(v) = 1/2 v.Av                        - (lam/p) sum (v+)^p vol

and their gradients are the volume-weighted residuals used everywhere else in
the package.  All powers go through :func:`safe_pow` so that exponents in the
thousands stay finite.
"""

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .exceptions import PenalabWarning, SaturationWarning
from .grid import ScalarField, h1_seminorm_sq, lp_norm
from .operator import laplacian, principal_eigenpair

__all__ = [
    "ProblemParams",
    "ScalingReport",
    "AprioriReport",
    "safe_pow",
    "eval_jm",
    "grad_jm",
    "hess_jm",
    "eval_jinf",
    "grad_jinf",
    "hess_jinf",
    "energy",
    "gradient",
    "hessian",
    "scaling_constants",
    "lambda1_lower_bound",
    "check_apriori",
    "coercivity_floor",
    "sobolev_2star",
]

SAT_CAP = 1e300
_LOG_CAP = math.log(SAT_CAP)
M_CAP = 4096.0


def sobolev_2star(dim):
    """Critical exponent ``2N/(N-2)``; infinite for N <= 2."""
    return math.inf if dim <= 2 else 2.0 * dim / (dim - 2.0)


@dataclass(frozen=True)
class ProblemParams:
    """Problem data ``(lam, p, m)`` plus solver tolerances.

    ``m = inf`` selects the limit energy J_inf.  ``lam`` stands for lambda.
    """

    lam: float
    p: float
    m: float = math.inf
    tol_resid: float = 1e-9
    tol_fp: float = 1e-10
    tol_vi: float = 1e-8
    lin_tol: float = 1e-10
    ode_tol: float = 1e-10
    tol_apriori: float = 0.02
    tol_level: float = 1e-8

    def __post_init__(self):
        for name in ("lam", "p", "m"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or math.isnan(v):
                raise ValueError(f"{name} must be a real number, got {v!r}")
        if not self.lam > 0:
            raise ValueError(f"need lambda > 0, got {self.lam}")
        if not (self.p > 2 and math.isfinite(self.p)):
            raise ValueError(f"need finite p > 2, got p = {self.p}")
        if not self.m > self.p:
            raise ValueError(f"need m > p, got m = {self.m}, p = {self.p}")
        for name in ("tol_resid", "tol_fp", "tol_vi", "lin_tol", "ode_tol", "tol_apriori", "tol_level"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be positive")

    @property
    def is_limit(self):
        return math.isinf(self.m)

    def with_m(self, m):
        d = asdict(self)
        d["m"] = float(m)
        return ProblemParams(**d)

    def limit(self):
        return self.with_m(math.inf)

    def sobolev_2star(self, dim):
        return sobolev_2star(dim)

    def check_subcritical(self, dim):
        s = sobolev_2star(dim)
        if self.p > s:
            raise ValueError(f"p = {self.p} exceeds the critical exponent 2* = {s:g} for N = {dim}")


def safe_pow(u, q, return_flag=False):
    """``u**q`` for ``u >= 0`` computed as ``exp(q ln u)`` and capped at 1e300.

    Works on scalars and arrays.  With ``return_flag=True`` also returns
    whether any entry hit the cap.

    >>> float(safe_pow(1.2, 5000))
    1e+300
    """
    a = np.asarray(u, dtype=float)
    if np.any(a < 0):
        raise ValueError("safe_pow expects nonnegative input")
    out = np.zeros_like(a)
    pos = a > 0
    logv = q * np.log(a[pos])
    sat = bool(np.any(logv > _LOG_CAP))
    out[pos] = np.exp(np.minimum(logv, _LOG_CAP))
    if np.ndim(u) == 0:
        out = out[()]
    return (out, sat) if return_flag else out


def _vals(v):
    return v.values if isinstance(v, ScalarField) else np.asarray(v, dtype=float)


def _warn_sat(sat, where):
    if sat:
        warnings.warn(f"{where}: power saturated at {SAT_CAP:g}", SaturationWarning, stacklevel=3)


def _reaction_sum(params, x, vol):
    pp, sat = safe_pow(np.maximum(x, 0.0), params.p, True)
    _warn_sat(sat, "reaction term")
    return params.lam / params.p * float(pp.sum()) * vol


def eval_jm(params, op, v):
    """Value of the penalized energy J_m at ``v``.

    Past ``m = 4096`` the penalty is replaced by the indicator of
    ``{|v| <= 1}`` (zero or +inf), with a warning.
    """
    if params.is_limit:
        raise ValueError("eval_jm needs finite m; use eval_jinf for the limit energy")
    x = _vals(v)
    vol = op.vol
    quad = 0.5 * op.energy(x)
    if params.m > M_CAP:
        warnings.warn(f"m = {params.m:g} above {M_CAP:g}: penalty replaced by an indicator",
                      PenalabWarning, stacklevel=2)
        pen = 0.0 if np.abs(x).max(initial=0.0) <= 1.0 else math.inf
    else:
        pm, sat = safe_pow(np.abs(x), params.m, True)
        _warn_sat(sat, "penalty term")
        pen = float(pm.sum()) * vol / params.m
    return quad + pen - _reaction_sum(params, x, vol)


def eval_jinf(params, op, v):
    x = _vals(v)
    return 0.5 * op.energy(x) - _reaction_sum(params, x, op.vol)


def _reaction_grad(params, x, vol):
    r, sat = safe_pow(np.maximum(x, 0.0), params.p - 1, True)
    _warn_sat(sat, "reaction term")
    return params.lam * r * vol


def grad_jm(params, op, v):
    """Volume-weighted residual ``A v + |v|^{m-2} v vol - lam (v+)^{p-1} vol``."""
    if params.is_limit:
        raise ValueError("grad_jm needs finite m; use grad_jinf for the limit energy")
    x = _vals(v)
    pm, sat = safe_pow(np.abs(x), params.m - 1, True)
    _warn_sat(sat, "penalty term")
    g = op.matrix @ x + np.sign(x) * pm * op.vol - _reaction_grad(params, x, op.vol)
    return ScalarField(op.grid, g)


def grad_jinf(params, op, v):
    x = _vals(v)
    return ScalarField(op.grid, op.matrix @ x - _reaction_grad(params, x, op.vol))


def _reaction_curv(params, x, vol):
    if params.p >= 3:
        c = safe_pow(np.maximum(x, 0.0), params.p - 2)
    else:
        # (v+)^{p-2} is singular in its derivative at 0 for p < 3 but still bounded
        c = np.where(x > 0, safe_pow(np.maximum(x, 0.0), params.p - 2), 0.0)
    return params.lam * (params.p - 1) * c * vol


def hess_jm(params, op, v):
    """Sparse Jacobian of :func:`grad_jm`."""
    x = _vals(v)
    pen = (params.m - 1) * safe_pow(np.abs(x), params.m - 2) * op.vol
    return (op.matrix + sp.diags(pen - _reaction_curv(params, x, op.vol))).tocsc()


def hess_jinf(params, op, v):
    x = _vals(v)
    return (op.matrix - sp.diags(_reaction_curv(params, x, op.vol))).tocsc()


def energy(params, op, v):
    """J_m or J_inf depending on ``params.m``."""
    return eval_jinf(params, op, v) if params.is_limit else eval_jm(params, op, v)


def gradient(params, op, v):
    return grad_jinf(params, op, v) if params.is_limit else grad_jm(params, op, v)


def hessian(params, op, v):
    return hess_jinf(params, op, v) if params.is_limit else hess_jm(params, op, v)


@dataclass(frozen=True)
class ScalingReport:
    a: float
    b_m: float
    T_m: float
    lambda_m_psi: float
    Lambda_psi: float
    T_inf: float
    J_m_at_Tm_psi: float
    J_inf_at_Tinf_psi: float

    def to_dict(self):
        return asdict(self)


def _log_lq_power(f, q):
    """``ln(sum |f|^q vol)`` without overflow or underflow."""
    a = np.abs(f.values)
    a = a[a > 0]
    return float(logsumexp(q * np.log(a))) + math.log(f.grid.cell_volume)


def scaling_constants(params, op, psi):
    """Constants of the ray ``t -> J_m(t psi)``.

    ``g_m(t) = a t^{2-p} + b_m t^{m-p}`` bounds ``J_m(t psi) / (t^p ||psi||_p^p) + lam/p``
    from above, so ``J_m(T_m psi) < 0`` as soon as ``lam > p g_m(T_m)``.  The
    bound is an identity when ``M = beta Id``.
    """
    if not np.any(psi.values != 0):
        raise ValueError("scaling constants need a nonzero field")
    p, beta = params.p, op.beta
    h1 = h1_seminorm_sq(psi)
    lp_p = lp_norm(psi, p) ** p
    sup = lp_norm(psi, math.inf)
    a = 0.5 * beta * h1 / lp_p
    Lambda = p * a * sup ** (p - 2)
    T_inf = 1.0 / sup
    J_inf = eval_jinf(params, op, psi * T_inf)
    if params.is_limit:
        return ScalingReport(a, 0.0, T_inf, Lambda, Lambda, T_inf, J_inf, J_inf)
    m = params.m
    log_b = _log_lq_power(psi, m) - math.log(m) - math.log(lp_p)
    log_T = (math.log((p - 2) / (m - p)) + math.log(a) - log_b) / (m - 2)
    T = math.exp(log_T)
    lam_m = p * (a * math.exp(-(p - 2) * log_T) + math.exp(log_b + (m - p) * log_T))
    b = math.exp(log_b) if log_b > -745 else 0.0
    J_m = eval_jm(params, op, psi * T)
    return ScalingReport(a, b, T, lam_m, Lambda, T_inf, J_m, J_inf)


def lambda1_lower_bound(op, params):
    """Return ``(Lambda(phi1), p beta lambda1 / 2)``.

    ``phi1`` is the principal eigenfunction of ``op``; ``lambda1`` is the
    principal Dirichlet eigenvalue of the Laplacian on the same grid.  The
    first value is an upper estimate of the infimum of Lambda, the second a
    lower bound for it.
    """
    _, phi1 = principal_eigenpair(op)
    lam1_dir, _ = principal_eigenpair(laplacian(op.grid))
    estimate = scaling_constants(params.limit(), op, phi1).Lambda_psi
    floor = params.p * 0.5 * op.beta * lam1_dir
    if floor > estimate * (1 + 1e-12):
        raise AssertionError(f"floor {floor} exceeds the estimate {estimate}")
    return estimate, floor


@dataclass(frozen=True)
class AprioriReport:
    linf_bound: float
    linf_actual: float
    lm_bound: float
    lm_actual: float
    energy_bound: float
    energy_actual: float
    all_pass: bool

    def to_dict(self):
        return asdict(self)


def check_apriori(params, w, alpha, tol_apriori=None):
    """Compare a candidate solution with the sup, L^m and energy bounds."""
    tol = params.tol_apriori if tol_apriori is None else tol_apriori
    lam, p, m = params.lam, params.p, params.m
    measure = w.grid.measure
    linf_bound = lam ** (1.0 / (m - p))
    lm_bound = lam ** (m / (m - p)) * measure
    linf = lp_norm(w, math.inf)
    lm = float(safe_pow(np.abs(w.values), m).sum()) * w.grid.cell_volume
    en = alpha * h1_seminorm_sq(w) + lm
    ok = linf <= linf_bound * (1 + tol) and lm <= lm_bound * (1 + tol) and en <= lm_bound * (1 + tol)
    return AprioriReport(linf_bound, linf, lm_bound, lm, lm_bound, en, bool(ok))


def coercivity_floor(params, op, v):
    """Lower bound for J_m(v) used to show coercivity.

    ``(alpha/2)||v||^2 + ||v||_m^m/(2m) - (m-p)/(p m) |Omega| lam^{m/(m-p)} 2^{p/(m-p)}``

    The constant is the maximum over ``s`` of
    ``(lam/p) |Omega|^{1-p/m} s^p - s^m/(2m)``.  With ``p^2`` in place of
    ``p`` in the denominator the bound fails, e.g. on the one-node toy at v = 1.2.
    """
    lam, p, m = params.lam, params.p, params.m
    x = _vals(v)
    f = ScalarField(op.grid, x)
    lm = float(safe_pow(np.abs(x), m).sum()) * op.vol
    const = (m - p) / (p * m) * op.grid.measure * lam ** (m / (m - p)) * 2.0 ** (p / (m - p))
    return 0.5 * op.alpha * h1_seminorm_sq(f) + lm / (2 * m) - const
