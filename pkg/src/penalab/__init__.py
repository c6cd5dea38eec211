"""Penalized semilinear elliptic problems with growing powers and their obstacle limits."""

__version__ = "0.1.0"

from .exceptions import (ConfigError, ConvergenceError, EigenSolverError, GridMismatchError,
                         LinearSolveError, PenalabError, PenalabWarning, SaturationWarning,
                         ShootingError)
from .grid import (Grid, ScalarField, build_grid, h1_seminorm_sq, integrate, lp_norm, project_box,
                   read_field_csv, write_field_csv)
from .operator import (CoeffField, DivFormOperator, apply, assemble, laplacian,
                       principal_eigenpair, solve_linear)
from .functional import (ProblemParams, check_apriori, energy, eval_jinf, eval_jm, grad_jinf,
                         grad_jm, gradient, hess_jinf, hess_jm, hessian, lambda1_lower_bound,
                         safe_pow, scaling_constants)
from .minimize import (SolveReport, initial_guess, minimize_jinf_on_K, minimize_jm,
                       multistart_min)
from .mountainpass import (MPReport, embedding_constant, mp_endpoint, mp_geometry,
                           mp_limit_floor, mountain_pass, newton_polish)
from .obstacle import (MultiplierReport, VIReport, extract_multiplier, picard_step, probe_vi, psor,
                       solve_vi)
from .asymptotics import (AsymptoticsRecord, SweepResult, convergence_metrics,
                          default_m_list, gz_triviality_experiment, sweep_m)
from .radial import (RadialProfile, ball_eigenfunction, check_gz_conditions, gz_condition_scan,
                     infinity_limit_norm, profile_residual, radial_Lambda, shoot, sphere_area)
from .config import ExperimentConfig, load_config, parse_config, preset

__all__ = [name for name in dir() if not name.startswith("_")]
