"""Sweeps in m: convergence of u_m and z_m to solutions of the inequality on K.

For each exponent the sweep computes the minimizer u_m and the mountain-pass
point z_m, checks the a priori bounds, and afterwards measures both against
the obstacle-problem limits obtained from the last u_m and z_m.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import PenalabError
from .functional import check_apriori, energy, safe_pow
from .grid import lp_norm, project_box
from .minimize import initial_guess, minimize_jm
from .mountainpass import mp_endpoint, mp_limit_floor, mountain_pass
from .obstacle import COIN_TOL, solve_vi
from .operator import principal_eigenpair

__all__ = [
    "AsymptoticsRecord",
    "SweepResult",
    "default_m_list",
    "sweep_m",
    "convergence_metrics",
    "gz_triviality_experiment",
]


@dataclass
class AsymptoticsRecord:
    m: float
    u_level: float
    z_level: float
    linf_u: float
    linf_z: float
    dist_u_to_limit: float = math.nan
    dist_z_to_limit: float = math.nan
    g_approx_defect: float = math.nan
    apriori_pass: bool = False
    coincidence_measure_m: float = math.nan
    u_converged: bool = False
    z_converged: bool = False
    dist_u_linf: float = math.nan
    dist_z_linf: float = math.nan
    z_coincidence_m: float = math.nan

    def to_dict(self):
        return asdict(self)


@dataclass
class SweepResult:
    params: object
    records: list
    u_fields: dict
    z_fields: dict
    u_limit: object = None
    z_limit: object = None
    failures: list = field(default_factory=list)
    level_floor: float = math.nan
    cold_start_level_gap: float = math.nan

    def to_dict(self):
        return {
            "lambda": self.params.lam,
            "p": self.params.p,
            "records": [r.to_dict() for r in self.records],
            "u_limit": None if self.u_limit is None else self.u_limit.to_dict(),
            "z_limit": None if self.z_limit is None else self.z_limit.to_dict(),
            "failures": [{"m": m, "error": msg} for m, msg in self.failures],
            "level_floor": self.level_floor,
            "cold_start_level_gap": self.cold_start_level_gap,
        }


def default_m_list(p, cap=4096.0):
    """Geometric grid ``2p, 4p, ..., 32p`` capped at ``cap``."""
    return [min(k * p, cap) for k in (2, 4, 8, 16, 32)]


def _solve_one(params, op, psi0, u_prev, z_prev, n_path, floor):
    ray = initial_guess(params, op, psi0)
    u = None
    if u_prev is not None:
        # the previous minimizer may sit above the new sup bound, where the
        # penalty is huge; clip it first
        top = params.lam ** (1.0 / (params.m - params.p))
        u = minimize_jm(params, op, project_box(u_prev, 0.0, top))
        if not (u.converged and u.level <= energy(params, op, ray)):
            u = None
    if u is None:
        u = minimize_jm(params, op, ray)
    end = mp_endpoint(params, op, psi0, fallback=u.solution)
    z = mountain_pass(params, op, end, n_path=n_path, level_floor=floor,
                      init_saddle=z_prev, exclude=[u.solution])
    return u, z


def sweep_m(base_params, op, m_list, warm_start=True, psi0=None, n_path=24, jobs=1,
            cold_check=True):
    """Run minimizer and mountain-pass solver over ascending ``m`` values.

    Returns a :class:`SweepResult`.  Failures at individual exponents are
    recorded in ``failures`` and skipped.
    """
    m_list = [float(m) for m in m_list]
    if any(b <= a for a, b in zip(m_list, m_list[1:])):
        raise ValueError("m_list must be strictly ascending")
    if any(m <= base_params.p for m in m_list):
        raise ValueError("every m must exceed p")
    if psi0 is None:
        _, psi0 = principal_eigenpair(op)
    try:
        floor = mp_limit_floor(base_params.limit(), op)
    except ValueError:
        floor = math.nan
    op.lu()

    results = {}
    failures = []
    if warm_start:
        u_prev = z_prev = None
        for m in m_list:
            try:
                u, z = _solve_one(base_params.with_m(m), op, psi0, u_prev, z_prev, n_path, floor)
            except (PenalabError, ValueError, ArithmeticError) as exc:
                failures.append((m, str(exc)))
                continue
            results[m] = (u, z)
            if u.converged:
                u_prev = u.solution
            if z.converged:
                z_prev = z.solution
    else:
        def task(m):
            try:
                return m, _solve_one(base_params.with_m(m), op, psi0, None, None, n_path, floor), None
            except (PenalabError, ValueError, ArithmeticError) as exc:
                return m, None, str(exc)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                outs = list(pool.map(task, m_list))
        else:
            outs = [task(m) for m in m_list]
        for m, res, err in outs:
            if err is None:
                results[m] = res
            else:
                failures.append((m, err))

    records = []
    u_fields, z_fields = {}, {}
    for m in m_list:
        if m not in results:
            continue
        u, z = results[m]
        params = base_params.with_m(m)
        u_fields[m], z_fields[m] = u.solution, z.solution
        ok = check_apriori(params, u.solution, op.alpha).all_pass
        if z.converged:
            ok = ok and check_apriori(params, z.solution, op.alpha).all_pass
        records.append(AsymptoticsRecord(
            m=m,
            u_level=u.level,
            z_level=z.level,
            linf_u=lp_norm(u.solution, math.inf),
            linf_z=lp_norm(z.solution, math.inf),
            apriori_pass=bool(ok),
            coincidence_measure_m=float(np.count_nonzero(u.solution.values >= 1 - COIN_TOL)) * op.vol,
            z_coincidence_m=float(np.count_nonzero(z.solution.values >= 1 - COIN_TOL)) * op.vol,
            u_converged=u.converged,
            z_converged=z.converged,
        ))

    out = SweepResult(base_params, records, u_fields, z_fields, failures=failures, level_floor=floor)
    if not records:
        return out

    m_last = records[-1].m
    lim = base_params.limit()
    out.u_limit = solve_vi(lim, op, u_fields[m_last])
    out.z_limit = solve_vi(lim, op, z_fields[m_last])
    g_u = out.u_limit.multiplier.g.values
    for rec in records:
        u, z = u_fields[rec.m], z_fields[rec.m]
        du, dz = u - out.u_limit.solution, z - out.z_limit.solution
        rec.dist_u_to_limit = lp_norm(du, 2)
        rec.dist_z_to_limit = lp_norm(dz, 2)
        rec.dist_u_linf = lp_norm(du, math.inf)
        rec.dist_z_linf = lp_norm(dz, math.inf)
        power = safe_pow(np.maximum(u.values, 0.0), rec.m - 1)
        rec.g_approx_defect = float(np.abs(power - g_u).sum()) * op.vol

    if cold_check and warm_start:
        # guard against branch hopping: a cold start at the last m must agree
        params = base_params.with_m(m_last)
        cold = minimize_jm(params, op, initial_guess(params, op, psi0))
        out.cold_start_level_gap = abs(cold.level - records[-1].u_level)
    return out


RESOLUTION_FLOOR = 1e-10


def _monotone_decreasing(vals, floor=RESOLUTION_FLOOR):
    """Strictly decreasing, except that values below ``floor`` count as zero.

    Distances under the floor are at the level of the solver tolerances, so
    their mutual order carries no information.
    """
    v = [0.0 if x < floor else x for x in vals]
    return bool(all(b < a or a == b == 0.0 for a, b in zip(v, v[1:])))


def _slope(ms, vals):
    pts = [(math.log(m), math.log(v)) for m, v in zip(ms, vals) if v > 0 and math.isfinite(v)]
    if len(pts) < 2:
        return math.nan
    x, y = np.array(pts).T
    return float(np.polyfit(x, y, 1)[0])


def convergence_metrics(sweep):
    """Rates, monotonicity flags and final complementarity defects of a sweep."""
    records = sweep.records if isinstance(sweep, SweepResult) else list(sweep)
    if len(records) < 3:
        raise ValueError(f"need at least 3 records, got {len(records)}")
    ms = [r.m for r in records]
    du = [r.dist_u_to_limit for r in records]
    dz = [r.dist_z_to_limit for r in records]
    summary = {
        "m": ms,
        "rate_u": _slope(ms, du),
        "rate_z": _slope(ms, dz),
        "dist_u_decreasing": _monotone_decreasing(du),
        "dist_z_decreasing": _monotone_decreasing(dz),
        "linf_u_decreasing": _monotone_decreasing([r.linf_u for r in records]),
        "g_defect_decreasing": _monotone_decreasing([r.g_approx_defect for r in records]),
        "apriori_all_pass": all(r.apriori_pass for r in records),
        "final_dist_u": du[-1],
        "final_dist_z": dz[-1],
    }
    summary["needs_review"] = not (summary["dist_u_decreasing"] and summary["dist_z_decreasing"])
    if isinstance(sweep, SweepResult):
        for name, lim in (("u", sweep.u_limit), ("z", sweep.z_limit)):
            if lim is not None:
                summary[f"complementarity_defect_{name}"] = lim.multiplier.complementarity_defect
                summary[f"coincidence_measure_{name}"] = lim.multiplier.coincidence_measure
                summary[f"g_{name}_nontrivial"] = lim.multiplier.g_nontrivial
    return summary


def gz_triviality_experiment(base_params, op, m_list, psi0=None, n_path=24):
    """Track the coincidence set of the mountain-pass branch as m grows.

    The verdict is numerical evidence on one grid, not a proof either way.
    """
    sweep = sweep_m(base_params, op, m_list, warm_start=True, psi0=psi0, n_path=n_path,
                    cold_check=False)
    report = {
        "lambda": base_params.lam,
        "p": base_params.p,
        "m": [r.m for r in sweep.records],
        "linf_z": [r.linf_z for r in sweep.records],
        "z_coincidence_m": [r.z_coincidence_m for r in sweep.records],
        "failures": [{"m": m, "error": e} for m, e in sweep.failures],
        "evidence_only": True,
    }
    if sweep.z_limit is not None:
        mult = sweep.z_limit.multiplier
        report.update({
            "z_limit_converged": sweep.z_limit.converged,
            "z_limit_coincidence_measure": mult.coincidence_measure,
            "g_z_l1": float(np.abs(mult.g.values).sum()) * op.vol,
            "g_z_nontrivial": mult.g_nontrivial,
            "complementarity_defect": mult.complementarity_defect,
            "verdict": "nontrivial" if mult.g_nontrivial else "trivial",
        })
    else:
        report["verdict"] = "undetermined"
    return report
