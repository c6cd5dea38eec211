"""Structured grids on intervals, rectangles and disks, and nodal fields on them.

Unknowns live on the interior nodes only; every node outside the domain (the
Dirichlet boundary, or the part of the bounding square outside a disk) carries
an implied zero.  Quadrature is nodal: each interior node is weighted by one
full cell volume ``prod(h)``.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import GridMismatchError

__all__ = [
    "Grid",
    "ScalarField",
    "build_grid",
    "lp_norm",
    "h1_seminorm_sq",
    "project_box",
    "integrate",
    "write_field_csv",
    "read_field_csv",
]

DOMAIN_KINDS = ("interval", "rectangle", "disk")


@dataclass(frozen=True, eq=False)
class Grid:
    dim: int
    extents: tuple
    n: tuple
    h: tuple
    interior_mask: np.ndarray
    domain_kind: str
    measure: float
    center: tuple = None
    radius: float = None
    interior_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.interior_mask.flags.writeable = False
        idx = np.flatnonzero(self.interior_mask.ravel())
        idx.flags.writeable = False
        object.__setattr__(self, "interior_index", idx)

    @property
    def cell_volume(self):
        return float(np.prod(self.h))

    @property
    def n_interior(self):
        return int(self.interior_index.size)

    @property
    def shape(self):
        return tuple(self.n)

    def axes(self):
        """Node coordinates along each axis."""
        return tuple(
            np.linspace(lo, hi, k) for (lo, hi), k in zip(self.extents, self.n)
        )

    def node_coords(self):
        """Full-grid coordinate arrays, ``ij`` indexing."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def coords(self):
        """Coordinates of the interior nodes, one flat array per axis."""
        return tuple(c.ravel()[self.interior_index] for c in self.node_coords())

    def scatter(self, values):
        """Embed interior values into a full-grid array with zeros elsewhere."""
        full = np.zeros(self.n)
        full.ravel()[self.interior_index] = values
        return full

    def same_as(self, other):
        if self is other:
            return True
        return (
            self.domain_kind == other.domain_kind
            and self.n == other.n
            and np.allclose(self.extents, other.extents)
            and np.array_equal(self.interior_mask, other.interior_mask)
        )

    def describe(self):
        d = {
            "kind": self.domain_kind,
            "n": list(self.n),
            "extents": [list(e) for e in self.extents],
            "h": list(self.h),
            "measure": self.measure,
            "n_interior": self.n_interior,
        }
        if self.domain_kind == "disk":
            d["center"] = list(self.center)
            d["radius"] = self.radius
        return d


def _as_tuple(n, dim):
    if np.isscalar(n):
        return (int(n),) * dim
    n = tuple(int(k) for k in n)
    if len(n) != dim:
        raise ValueError(f"expected {dim} node counts, got {len(n)}")
    return n


def build_grid(domain_kind, n, *, extents=None, center=(0.0, 0.0), radius=1.0):
    """Build a structured grid.

    Parameters
    ----------
    domain_kind : {'interval', 'rectangle', 'disk'}
    n : int or tuple of int
        Nodes per axis, boundary nodes included; at least 3.
    extents : tuple, optional
        ``(lo, hi)`` for an interval (default ``(0, 1)``), ``((x0, x1), (y0, y1))``
        for a rectangle (default unit square).  Ignored for disks, whose
        bounding square is derived from ``center`` and ``radius``.

    Examples
    --------
    >>> g = build_grid("interval", 3, extents=(0.0, 2.0))
    >>> g.h, g.n_interior
    ((1.0,), 1)
    """
    if domain_kind not in DOMAIN_KINDS:
        raise ValueError(f"unknown domain kind {domain_kind!r}; expected one of {DOMAIN_KINDS}")

    if domain_kind == "interval":
        dim = 1
        ext = ((0.0, 1.0),) if extents is None else (tuple(map(float, np.ravel(extents))),)
    elif domain_kind == "rectangle":
        dim = 2
        ext = ((0.0, 1.0), (0.0, 1.0)) if extents is None else tuple(
            tuple(map(float, e)) for e in extents
        )
    else:
        dim = 2
        radius = float(radius)
        if not radius > 0:
            raise ValueError(f"disk radius must be positive, got {radius}")
        cx, cy = map(float, center)
        ext = ((cx - radius, cx + radius), (cy - radius, cy + radius))

    n = _as_tuple(n, dim)
    if len(ext) != dim or any(len(e) != 2 for e in ext):
        raise ValueError(f"bad extents {extents!r} for a {domain_kind}")
    if min(n) < 3:
        raise ValueError(f"need at least 3 nodes per axis, got {n}")
    for lo, hi in ext:
        if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
            raise ValueError(f"degenerate extent ({lo}, {hi})")

    h = tuple((hi - lo) / (k - 1) for (lo, hi), k in zip(ext, n))

    mask = np.zeros(n, dtype=bool)
    if domain_kind == "disk":
        x, y = np.meshgrid(*(np.linspace(lo, hi, k) for (lo, hi), k in zip(ext, n)), indexing="ij")
        mask = (x - cx) ** 2 + (y - cy) ** 2 < radius**2
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = False
        measure = float(mask.sum()) * float(np.prod(h))
    else:
        mask[(slice(1, -1),) * dim] = True
        measure = float(np.prod([hi - lo for lo, hi in ext]))
    if not mask.any():
        raise ValueError("grid has no interior nodes")

    return Grid(
        dim=dim,
        extents=ext,
        n=n,
        h=h,
        interior_mask=mask,
        domain_kind=domain_kind,
        measure=measure,
        center=(cx, cy) if domain_kind == "disk" else None,
        radius=radius if domain_kind == "disk" else None,
    )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values of a function on the interior nodes of a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)  # private copy
        if v.shape != (self.grid.n_interior,):
            raise ValueError(
                f"field has shape {v.shape}, grid has {self.grid.n_interior} interior nodes"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n_interior))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.n_interior, float(c)))

    @classmethod
    def from_function(cls, grid, func):
        """Sample ``func(x)`` (1D) or ``func(x, y)`` (2D) at the interior nodes."""
        vals = np.broadcast_to(func(*grid.coords()), (grid.n_interior,))
        return cls(grid, vals)

    def full(self):
        return self.grid.scatter(self.values)

    def max(self):
        return float(self.values.max())

    def min(self):
        return float(self.values.min())

    def _check(self, other):
        if not self.grid.same_as(other.grid):
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            return ScalarField(self.grid, self.values + other.values)
        return ScalarField(self.grid, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            return ScalarField(self.grid, self.values - other.values)
        return ScalarField(self.grid, self.values - float(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, float(other) - self.values)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            return ScalarField(self.grid, self.values * other.values)
        return ScalarField(self.grid, self.values * float(other))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return ScalarField(self.grid, self.values / float(c))

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def __repr__(self):
        return (
            f"ScalarField({self.grid.domain_kind}, n={self.grid.n}, "
            f"min={self.min():.6g}, max={self.max():.6g})"
        )


def integrate(f):
    return float(f.values.sum() * f.grid.cell_volume)


def lp_norm(f, q):
    """Discrete L^q norm; ``q = inf`` is the nodal maximum of ``|f|``."""
    q = float(q)
    if not q >= 1:
        raise ValueError(f"need q >= 1, got {q}")
    a = np.abs(f.values)
    top = float(a.max()) if a.size else 0.0
    if top == 0.0:
        return 0.0
    if math.isinf(q):
        return top
    # factor out the max so large q cannot overflow
    s = float(np.sum((a / top) ** q)) * f.grid.cell_volume
    return top * s ** (1.0 / q)


def h1_seminorm_sq(f):
    """Sum over all grid edges of ``(difference / h)**2`` times the cell volume.

    Edges to nodes outside the domain see a zero neighbour.
    """
    full = f.full()
    g = f.grid
    total = 0.0
    for axis in range(g.dim):
        d = np.diff(full, axis=axis) / g.h[axis]
        total += float(np.sum(d * d))
    return total * g.cell_volume


def project_box(f, lo, hi):
    lo, hi = float(lo), float(hi)
    if lo > hi:
        raise ValueError(f"empty box [{lo}, {hi}]")
    return ScalarField(f.grid, np.clip(f.values, lo, hi))


def write_field_csv(f, path):
    """Write every grid node (row-major) as ``x[,y],value`` with 17 significant digits."""
    g = f.grid
    cols = [c.ravel() for c in g.node_coords()] + [f.full().ravel()]
    header = ["x", "y"][: g.dim] + ["value"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([f"{v:.17g}" for v in row])


def read_field_csv(grid, path):
    """Read a field written by :func:`write_field_csv` back onto ``grid``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    expected = ["x", "y"][: grid.dim] + ["value"]
    if [c.strip() for c in header] != expected:
        raise ValueError(f"{path}: header {header} does not match {expected}")
    data = np.array(body, dtype=float)
    if data.shape != (int(np.prod(grid.n)), grid.dim + 1):
        raise GridMismatchError(f"{path}: {data.shape[0]} rows for a grid of {grid.n} nodes")
    for axis, c in enumerate(grid.node_coords()):
        scale = max(1.0, float(np.abs(c).max()))
        if not np.allclose(data[:, axis], c.ravel(), rtol=0, atol=1e-9 * scale):
            raise GridMismatchError(f"{path}: node coordinates do not match the grid")
    return ScalarField(grid, data[:, -1][grid.interior_index])
