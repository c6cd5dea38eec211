"""Command line entry point ``penalab``.

Every subcommand writes a JSON report, one or more CSV files and a run
manifest into the output directory (``--out``, else ``$PENALAB_OUT``, else the
config's ``output_dir``).  The report itself is printed to stdout.  Exit
status: 0 when the computation converged, 2 when it finished without
converging, 1 on any error.
"""

import argparse
import csv
import datetime as _dt
import json
import math
import os
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import convergence_metrics, sweep_m
from .config import PRESETS, PSI_SHAPES, load_config, preset
from .exceptions import PenalabError
from .functional import check_apriori, lambda1_lower_bound, scaling_constants
from .grid import ScalarField, read_field_csv, write_field_csv
from .minimize import initial_guess, minimize_jinf_on_K, minimize_jm, multistart_min
from .mountainpass import (embedding_constant, mp_endpoint, mp_geometry, mp_limit_floor,
                           mountain_pass)
from .obstacle import solve_vi
from .operator import principal_eigenpair
from . import radial

__all__ = ["main", "build_parser", "to_json"]

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


# ----------------------------------------------------------------------
# serialization
def _clean(obj):
    """Plain JSON types; non-finite floats become ``null``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def to_json(obj):
    """Serialize with round-trip float precision (``repr``, at most 17 significant digits)."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row])


class _Run:
    """Collects artifacts of one invocation and writes the manifest at the end."""

    def __init__(self, args, command, cfg=None):
        self.command = command
        self.cfg = cfg
        self.args = args
        self.t0 = time.perf_counter()
        self.started = _dt.datetime.now(_dt.timezone.utc).isoformat()
        out = args.out or os.environ.get("PENALAB_OUT") or (cfg.output_dir if cfg else "penalab-out")
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.stem = f"{cfg.name}-{command}" if cfg else command
        self.files = []

    def path(self, suffix):
        p = self.out / f"{self.stem}{suffix}"
        self.files.append(p.name)
        return p

    def report(self, payload):
        text = to_json(payload)
        self.path(".json").write_text(text + "\n")
        print(text)

    def finish(self, status):
        import numba
        import scipy

        manifest = {
            "command": self.command,
            "argv": list(self.args.argv),
            "config": self.cfg.to_dict() if self.cfg else None,
            "exit_status": status,
            "files": self.files,
            "started_utc": self.started,
            "wall_time_s": time.perf_counter() - self.t0,
            "versions": {
                "penalab": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "numba": numba.__version__,
            },
        }
        (self.out / f"{self.stem}-manifest.json").write_text(to_json(manifest) + "\n")
        return status


def _load(args):
    if args.config and args.preset:
        raise PenalabError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        raise PenalabError("a --config file or a --preset name is required")
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        cfg.jobs = args.jobs
    return cfg


def _params_dict(params):
    return {"lambda": params.lam, "p": params.p, "m": params.m}


def _status(ok):
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


# ----------------------------------------------------------------------
# subcommands
def cmd_solve_min(args):
    cfg = _load(args)
    run = _Run(args, "solve-min", cfg)
    params = cfg.params(args.m)
    op = cfg.build_operator()
    psi0 = cfg.build_psi0(op)
    best, reports = multistart_min(params, op, psi0, n_random=cfg.n_random, seed=cfg.seed, jobs=cfg.jobs)
    write_field_csv(best.solution, run.path("-u.csv"))
    run.report({
        "command": "solve-min",
        "config_name": cfg.name,
        "params": _params_dict(params),
        "scaling": scaling_constants(params, op, psi0).to_dict(),
        "apriori": check_apriori(params, best.solution, op.alpha).to_dict(),
        "report": best.to_dict(),
        "starts": [{"level": r.level, "residual_norm": r.residual_norm, "converged": r.converged}
                   for r in reports],
        "converged": best.converged,
    })
    return run.finish(_status(best.converged))


def cmd_solve_mp(args):
    cfg = _load(args)
    run = _Run(args, "solve-mp", cfg)
    params = cfg.params(args.m)
    op = cfg.build_operator()
    psi0 = cfg.build_psi0(op)
    n_path = args.n_path or cfg.n_path
    u = minimize_jm(params, op, initial_guess(params, op, psi0))
    try:
        floor = mp_limit_floor(params.limit(), op)
    except ValueError:
        floor = math.nan
    end = mp_endpoint(params, op, psi0, fallback=u.solution)
    z = mountain_pass(params, op, end, n_path=n_path, level_floor=floor, exclude=[u.solution])
    write_field_csv(z.solution, run.path("-z.csv"))
    _write_rows(run.path("-path.csv"), ["iteration", "max_level", "residual"], z.history)
    run.report({
        "command": "solve-mp",
        "config_name": cfg.name,
        "params": _params_dict(params),
        "geometry": mp_geometry(params, op, psi0).to_dict(),
        "limit_level_floor": floor,
        "minimizer_level": u.level,
        "report": z.to_dict(include_history=False),
        "apriori": check_apriori(params, z.solution, op.alpha).to_dict(),
        "converged": z.converged,
    })
    return run.finish(_status(z.converged))


def cmd_obstacle(args):
    cfg = _load(args)
    run = _Run(args, "obstacle", cfg)
    params = cfg.params(math.inf)
    op = cfg.build_operator()
    init = args.init
    if init == "zero":
        start = ScalarField.zeros(op.grid)
    elif init == "min":
        start = minimize_jinf_on_K(params, op, cfg.build_psi0(op)).solution
    else:
        path = Path(init)
        if not path.exists():
            raise PenalabError(f"initial field file {init!r} not found")
        start = read_field_csv(op.grid, path)
    rep = solve_vi(params, op, start)
    write_field_csv(rep.solution, run.path("-u.csv"))
    write_field_csv(rep.multiplier.g, run.path("-g.csv"))
    run.report({
        "command": "obstacle",
        "config_name": cfg.name,
        "params": _params_dict(params),
        "init": init if init in ("zero", "min") else "file",
        "report": rep.to_dict(),
        "converged": rep.converged,
    })
    return run.finish(_status(rep.converged))


def cmd_sweep(args):
    cfg = _load(args)
    run = _Run(args, "sweep", cfg)
    m_list = args.m_list or cfg.m_list
    if not m_list:
        raise PenalabError("no m values: pass --m-list or set m_list in the config")
    base = cfg.params(max(m_list))
    op = cfg.build_operator()
    psi0 = cfg.build_psi0(op)
    sw = sweep_m(base, op, m_list, warm_start=not args.cold, psi0=psi0,
                 n_path=args.n_path or cfg.n_path, jobs=cfg.jobs)
    fields = list(sw.records[0].to_dict()) if sw.records else ["m"]
    _write_rows(run.path("-records.csv"), fields, [[r.to_dict()[k] for k in fields] for r in sw.records])
    summary = convergence_metrics(sw) if len(sw.records) >= 3 else {}
    ok = (not sw.failures and all(r.u_converged and r.z_converged for r in sw.records)
          and sw.u_limit is not None and sw.u_limit.converged and sw.z_limit.converged)
    run.report({
        "command": "sweep",
        "config_name": cfg.name,
        "params": {"lambda": base.lam, "p": base.p, "m_list": list(m_list)},
        "summary": summary,
        "sweep": sw.to_dict(),
        "converged": bool(ok),
    })
    return run.finish(_status(ok))


def cmd_radial(args):
    run = _Run(args, "radial")
    lam, R = args.lam, args.R
    payload = {"command": "radial", "lambda": lam, "R": R, "dim": args.dim}
    if args.p is not None:
        prof = radial.shoot(args.p, args.dim)
        _write_rows(run.path("-profile.csv"), ["r", "U"], prof.samples.tolist())
        payload["profile"] = prof.to_dict()
        payload["profile_residual"] = radial.profile_residual(prof, lam, R)
        payload["conditions"] = radial.check_gz_conditions(args.p, args.dim, lam, R, prof=prof)
        payload["infinity_limit_norm"] = radial.infinity_limit_norm(args.p, lam, args.dim, prof=prof)
    if args.sweep:
        rows = []
        for p in args.sweep:
            prof = radial.shoot(p, args.dim)
            rows.append({"p": p, "r0": prof.r0, "U0": prof.U0,
                         "infinity_limit_norm": radial.infinity_limit_norm(p, lam, args.dim, prof=prof)})
        payload["sweep"] = rows
        _write_rows(run.path("-sweep.csv"), ["p", "r0", "U0", "infinity_limit_norm"],
                    [[r["p"], r["r0"], r["U0"], r["infinity_limit_norm"]] for r in rows])
        if args.scan:
            payload["scan"] = radial.gz_condition_scan(args.sweep, args.scan, args.dim)
    if "profile" not in payload and "sweep" not in payload:
        raise PenalabError("radial needs --p or --sweep")
    run.report(payload)
    return run.finish(EXIT_OK)


def cmd_eigen(args):
    cfg = _load(args)
    run = _Run(args, "eigen", cfg)
    op = cfg.build_operator()
    lam1, phi1 = principal_eigenpair(op)
    write_field_csv(phi1, run.path("-phi1.csv"))
    estimate, floor = lambda1_lower_bound(op, cfg.params())
    run.report({
        "command": "eigen",
        "config_name": cfg.name,
        "grid": op.grid.describe(),
        "lambda1": lam1,
        "alpha": op.alpha,
        "beta": op.beta,
        "Lambda_phi1": estimate,
        "Lambda_floor": floor,
        "converged": True,
    })
    return run.finish(EXIT_OK)


def cmd_constants(args):
    cfg = _load(args)
    if args.psi:
        cfg.psi0 = args.psi
    run = _Run(args, "constants", cfg)
    params = cfg.params(args.m)
    op = cfg.build_operator()
    psi0 = cfg.build_psi0(op)
    payload = {
        "command": "constants",
        "config_name": cfg.name,
        "params": _params_dict(params),
        "psi0": cfg.psi0,
        "scaling": scaling_constants(params, op, psi0).to_dict(),
    }
    estimate, floor = lambda1_lower_bound(op, params)
    payload["Lambda_phi1"] = estimate
    payload["Lambda_floor"] = floor
    payload["embedding_constant"] = embedding_constant(op.grid, params.p)
    if not params.is_limit:
        payload["geometry"] = mp_geometry(params, op, psi0).to_dict()
    payload["converged"] = True
    run.report(payload)
    return run.finish(EXIT_OK)


# ----------------------------------------------------------------------
class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1; status 2 is reserved for non-convergence."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser():
    ap = _Parser(prog="penalab", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"penalab {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--out", help="output directory (overrides $PENALAB_OUT)")
    common.add_argument("--jobs", type=int, default=None, help="worker threads (default 1)")
    cfgp = _Parser(add_help=False)
    cfgp.add_argument("--config", help="JSON experiment file")
    cfgp.add_argument("--preset", choices=PRESETS, help="shipped experiment")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve-min", parents=[common, cfgp], help="multistart minimizer of J_m")
    s.add_argument("--m", type=float)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_solve_min)

    s = sub.add_parser("solve-mp", parents=[common, cfgp], help="mountain-pass critical point of J_m")
    s.add_argument("--m", type=float)
    s.add_argument("--n-path", type=int, dest="n_path")
    s.set_defaults(func=cmd_solve_mp)

    s = sub.add_parser("obstacle", parents=[common, cfgp], help="variational inequality on K")
    s.add_argument("--init", default="min", help="field CSV, 'min' or 'zero' (default 'min')")
    s.set_defaults(func=cmd_obstacle)

    s = sub.add_parser("sweep", parents=[common, cfgp], help="u_m and z_m over increasing m")
    s.add_argument("--m-list", type=_floats, dest="m_list")
    s.add_argument("--n-path", type=int, dest="n_path")
    s.add_argument("--cold", action="store_true", help="solve every m from the ray start")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("radial", parents=[common], help="radial profiles on balls")
    s.add_argument("--p", type=float)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--lambda", type=float, default=1.0, dest="lam")
    s.add_argument("--R", type=float, default=1.0)
    s.add_argument("--sweep", type=_floats, help="comma-separated p values")
    s.add_argument("--scan", type=_floats, help="lambda*R^2 values for the interval test grid")
    s.set_defaults(func=cmd_radial)

    s = sub.add_parser("eigen", parents=[common, cfgp], help="principal eigenpair of the operator")
    s.set_defaults(func=cmd_eigen)

    s = sub.add_parser("constants", parents=[common, cfgp], help="scaling and geometry constants")
    s.add_argument("--m", type=float)
    s.add_argument("--psi", choices=PSI_SHAPES)
    s.set_defaults(func=cmd_constants)
    return ap


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (PenalabError, ValueError, OSError, ArithmeticError) as exc:
        print(f"penalab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
