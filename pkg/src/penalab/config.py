"""Experiment configuration files and the shipped presets.

A config is a JSON object.  Example::

    {
      "name": "interval-pi",
      "domain": {"kind": "interval", "extents": [0, "pi"], "n": 401},
      "coeff": {"kind": "identity"},
      "lambda": 3, "p": 4, "m_list": [8, 16, 32, 64, 128],
      "psi0": "phi1",
      "tolerances": {"tol_resid": 1e-9},
      "seed": 0
    }

Extents may be numbers or the strings ``"pi"``, ``"2*pi"``, ``"pi/2"``.
``psi0`` is ``"phi1"`` (principal eigenfunction), one of the named shapes
``"sin"``, ``"tent"``, ``"ones"``, or ``{"file": "field.csv"}``.
"""

import copy
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .functional import ProblemParams
from .grid import ScalarField, build_grid, read_field_csv
from .operator import CoeffField, assemble, principal_eigenpair

__all__ = [
    "ExperimentConfig",
    "PRESETS",
    "TOLERANCE_KEYS",
    "load_config",
    "parse_config",
    "preset",
]

PRESETS = ("toy-1node", "interval-pi", "square", "disk", "gz-hunt")
TOLERANCE_KEYS = ("tol_resid", "tol_fp", "tol_vi", "lin_tol", "ode_tol", "tol_apriori")
PSI_SHAPES = ("phi1", "sin", "tent", "ones")
COEFF_KINDS = ("identity", "scalar", "aniso", "bump")
_TOP_KEYS = {"name", "domain", "coeff", "lambda", "p", "m", "m_list", "psi0", "tolerances",
             "seed", "output_dir", "n_path", "n_random", "jobs"}
_PI_RE = re.compile(r"^\s*(?:([0-9.eE+-]+)\s*\*\s*)?pi\s*(?:/\s*([0-9.eE+-]+))?\s*$")


def _number(value, where):
    """A float from a JSON number or a multiple of pi written as a string."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        mt = _PI_RE.match(value)
        if mt:
            num = float(mt.group(1)) if mt.group(1) else 1.0
            den = float(mt.group(2)) if mt.group(2) else 1.0
            return num * math.pi / den
    raise ConfigError(f"{where}: expected a number or a multiple of 'pi', got {value!r}")


@dataclass
class ExperimentConfig:
    """Parsed experiment description.  ``to_dict`` gives back an equivalent JSON object."""

    name: str
    domain: dict
    coeff: dict
    lam: float
    p: float
    m: float = None
    m_list: list = None
    psi0: object = "phi1"
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "penalab-out"
    n_path: int = 24
    n_random: int = 5
    jobs: int = 1
    base_dir: str = "."

    # ------------------------------------------------------------------
    def to_dict(self):
        d = {
            "name": self.name,
            "domain": copy.deepcopy(self.domain),
            "coeff": copy.deepcopy(self.coeff),
            "lambda": self.lam,
            "p": self.p,
            "psi0": copy.deepcopy(self.psi0),
            "tolerances": dict(self.tolerances),
            "seed": self.seed,
            "output_dir": self.output_dir,
            "n_path": self.n_path,
            "n_random": self.n_random,
            "jobs": self.jobs,
        }
        if self.m is not None:
            d["m"] = self.m
        if self.m_list is not None:
            d["m_list"] = list(self.m_list)
        return d

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2)

    # ------------------------------------------------------------------
    def params(self, m=None):
        """:class:`ProblemParams` for exponent ``m`` (default: ``m``, else the first of ``m_list``)."""
        if m is None:
            m = self.m if self.m is not None else (self.m_list[0] if self.m_list else math.inf)
        return ProblemParams(self.lam, self.p, float(m), **self.tolerances)

    def build_grid(self):
        d = self.domain
        kind = d["kind"]
        if kind == "interval":
            return build_grid("interval", d["n"], extents=tuple(_number(v, "domain.extents") for v in d["extents"]))
        if kind == "rectangle":
            ext = tuple(tuple(_number(v, "domain.extents") for v in e) for e in d["extents"])
            return build_grid("rectangle", d["n"], extents=ext)
        return build_grid("disk", d["n"], center=tuple(d.get("center", (0.0, 0.0))),
                          radius=_number(d.get("radius", 1.0), "domain.radius"))

    def build_coeff(self, grid=None):
        c = self.coeff
        kind = c.get("kind", "identity")
        if kind == "identity":
            return CoeffField.identity()
        if kind == "scalar":
            return CoeffField.constant(c["value"])
        if kind == "aniso":
            a1, a2 = c["a"]
            return CoeffField.aniso(a1, a2)
        x0 = c.get("x0")
        if x0 is None:
            grid = grid or self.build_grid()
            x0 = [0.5 * (lo + hi) for lo, hi in grid.extents]
        return CoeffField.bump(x0)

    def build_operator(self):
        grid = self.build_grid()
        return assemble(grid, self.build_coeff(grid))

    def build_psi0(self, op):
        """The reference field ``psi0``, scaled to sup norm 1."""
        grid = op.grid
        spec = self.psi0
        if isinstance(spec, dict):
            path = Path(spec["file"])
            if not path.is_absolute():
                path = Path(self.base_dir) / path
            if not path.exists():
                raise ConfigError(f"psi0: field file {str(path)!r} not found")
            psi = read_field_csv(grid, path)
        elif spec == "phi1":
            _, psi = principal_eigenpair(op)
        elif spec == "ones":
            psi = ScalarField.constant(grid, 1.0)
        else:
            vals = np.ones(grid.n_interior)
            if grid.domain_kind == "disk":
                r = np.hypot(*(c - c0 for c, c0 in zip(grid.coords(), grid.center))) / grid.radius
                vals = np.cos(0.5 * np.pi * r) if spec == "sin" else 1.0 - r
            else:
                for c, (lo, hi) in zip(grid.coords(), grid.extents):
                    s = (c - lo) / (hi - lo)
                    vals = vals * (np.sin(np.pi * s) if spec == "sin" else 1.0 - np.abs(2 * s - 1))
            psi = ScalarField(grid, np.maximum(vals, 0.0))
        sup = float(np.abs(psi.values).max(initial=0.0))
        if not sup > 0:
            raise ConfigError("psi0 is identically zero on the grid")
        return psi / sup


# ----------------------------------------------------------------------
def _fail(where, msg, lineno=None):
    loc = f"line {lineno}: " if lineno else ""
    raise ConfigError(f"{loc}{where}: {msg}")


def _line_of(text, key):
    if text is None:
        return None
    mt = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, mt.start()) + 1 if mt else None


def _validate(d, text=None):
    if not isinstance(d, dict):
        _fail("config", "top level must be a JSON object")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        key = sorted(unknown)[0]
        _fail(key, f"unknown field (allowed: {', '.join(sorted(_TOP_KEYS))})", _line_of(text, key))
    for key in ("domain", "lambda", "p"):
        if key not in d:
            _fail(key, "required field missing")

    dom = d["domain"]
    ln = _line_of(text, "domain")
    if not isinstance(dom, dict) or dom.get("kind") not in ("interval", "rectangle", "disk"):
        _fail("domain.kind", "must be 'interval', 'rectangle' or 'disk'", ln)
    n = dom.get("n")
    ns = n if isinstance(n, list) else [n]
    if not all(isinstance(k, int) and not isinstance(k, bool) and k >= 3 for k in ns):
        _fail("domain.n", f"node counts must be integers >= 3, got {n!r}", _line_of(text, "n") or ln)
    if dom["kind"] == "interval":
        ext = dom.get("extents", [0, 1])
        if not (isinstance(ext, list) and len(ext) == 2):
            _fail("domain.extents", "an interval needs [lo, hi]", ln)
        lo, hi = (_number(v, "domain.extents") for v in ext)
        if not hi > lo:
            _fail("domain.extents", f"need lo < hi, got {ext!r}", ln)
        dom.setdefault("extents", ext)
    elif dom["kind"] == "rectangle":
        ext = dom.get("extents", [[0, 1], [0, 1]])
        if not (isinstance(ext, list) and len(ext) == 2 and all(isinstance(e, list) and len(e) == 2 for e in ext)):
            _fail("domain.extents", "a rectangle needs [[x0, x1], [y0, y1]]", ln)
        for e in ext:
            if not _number(e[1], "domain.extents") > _number(e[0], "domain.extents"):
                _fail("domain.extents", f"need lo < hi, got {e!r}", ln)
        dom.setdefault("extents", ext)
    else:
        if not _number(dom.get("radius", 1.0), "domain.radius") > 0:
            _fail("domain.radius", "must be positive", ln)

    coeff = d.setdefault("coeff", {"kind": "identity"})
    ln = _line_of(text, "coeff")
    if not isinstance(coeff, dict) or coeff.get("kind", "identity") not in COEFF_KINDS:
        _fail("coeff.kind", f"must be one of {COEFF_KINDS}", ln)
    kind = coeff.get("kind", "identity")
    if kind == "scalar" and not (isinstance(coeff.get("value"), (int, float)) and coeff["value"] > 0):
        _fail("coeff.value", "a scalar coefficient needs a positive 'value'", ln)
    if kind == "aniso":
        a = coeff.get("a")
        if not (isinstance(a, list) and len(a) == 2 and all(isinstance(v, (int, float)) and v > 0 for v in a)):
            _fail("coeff.a", "an anisotropic coefficient needs two positive entries 'a'", ln)

    psi = d.setdefault("psi0", "phi1")
    if not (psi in PSI_SHAPES or (isinstance(psi, dict) and set(psi) == {"file"})):
        _fail("psi0", f"must be one of {PSI_SHAPES} or {{\"file\": path}}", _line_of(text, "psi0"))

    tol = d.setdefault("tolerances", {})
    if not isinstance(tol, dict):
        _fail("tolerances", "must be an object", _line_of(text, "tolerances"))
    for key, val in tol.items():
        if key not in TOLERANCE_KEYS:
            _fail(f"tolerances.{key}", f"unknown tolerance (allowed: {', '.join(TOLERANCE_KEYS)})",
                  _line_of(text, key))
        if not (isinstance(val, (int, float)) and not isinstance(val, bool) and val > 0):
            _fail(f"tolerances.{key}", f"must be positive, got {val!r}", _line_of(text, key))

    for key in ("seed", "n_path", "n_random", "jobs"):
        if key in d and not (isinstance(d[key], int) and not isinstance(d[key], bool) and d[key] >= 0):
            _fail(key, f"must be a nonnegative integer, got {d[key]!r}", _line_of(text, key))
    if "m_list" in d:
        ml = d["m_list"]
        if not (isinstance(ml, list) and ml and all(isinstance(v, (int, float)) for v in ml)):
            _fail("m_list", "must be a nonempty list of numbers", _line_of(text, "m_list"))

    # the numeric constraints live in ProblemParams; re-raise with a location
    ms = [d["m"]] if "m" in d else (d.get("m_list") or [math.inf])
    for m in ms:
        try:
            ProblemParams(d["lambda"], d["p"], float(m), **tol)
        except (TypeError, ValueError) as exc:
            msg = str(exc)
            key = "lambda" if "lambda" in msg or msg.startswith("lam") else ("m" if "m >" in msg else "p")
            if key == "m" and "m" not in d:
                key = "m_list"
            _fail(key, msg, _line_of(text, key))


def parse_config(text, base_dir="."):
    """Parse JSON config text; errors carry the line and the offending field."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(d, text=text, base_dir=base_dir)


def config_from_dict(d, text=None, base_dir="."):
    d = copy.deepcopy(d)
    _validate(d, text)
    return ExperimentConfig(
        name=d.get("name", "custom"),
        domain=d["domain"],
        coeff=d["coeff"],
        lam=float(d["lambda"]),
        p=float(d["p"]),
        m=None if "m" not in d else float(d["m"]),
        m_list=None if "m_list" not in d else [float(v) for v in d["m_list"]],
        psi0=d["psi0"],
        tolerances={k: float(v) for k, v in d["tolerances"].items()},
        seed=int(d.get("seed", 0)),
        output_dir=d.get("output_dir", "penalab-out"),
        n_path=int(d.get("n_path", 24)),
        n_random=int(d.get("n_random", 5)),
        jobs=int(d.get("jobs", 1)),
        base_dir=str(base_dir),
    )


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {str(path)!r} not found")
    return parse_config(path.read_text(), base_dir=path.parent)


def preset(name):
    """Return the shipped configuration ``name``."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    text = resources.files("penalab").joinpath("presets", f"{name}.json").read_text()
    return parse_config(text)
