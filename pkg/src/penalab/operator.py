"""Divergence-form operator ``L v = -div(M(x) grad v)`` on a structured grid.

The stiffness matrix is assembled cell by cell from the energy

    sum_cells  vol * [ m11 (a1^2 + a2^2)/2 + m22 (b1^2 + b2^2)/2
                       + m12 (a1 + a2)(b1 + b2)/2 ]

where ``a1, a2`` are the two x-differences and ``b1, b2`` the two
y-differences of a cell.  Each edge is shared by two cells, so the edge
coefficient is the arithmetic mean of the two cell samples.  For M = Id this
reproduces the 5-point stencil and ``v @ A @ v == h1_seminorm_sq(v)``; for any
M with ellipticity constant alpha one has ``v @ A @ v >= alpha * h1_seminorm_sq(v)``.
The matrix is volume weighted (``u @ A @ v ~ int M grad u . grad v``) and the
mass matrix is lumped, ``vol * I``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import EigenSolverError, GridMismatchError, LinearSolveError
from .grid import ScalarField

__all__ = [
    "CoeffField",
    "DivFormOperator",
    "assemble",
    "apply",
    "solve_linear",
    "principal_eigenpair",
    "laplacian",
]


@dataclass(frozen=True)
class CoeffField:
    """Symmetric coefficient matrix field with ellipticity bounds.

    ``func`` maps point coordinates to the coefficient: a scalar ``a(x)`` for
    ``kind='scalar'`` (M = a Id), or a tuple ``(m11, m22, m12)`` for
    ``kind='matrix'`` (only ``m11`` is used in 1D).
    """

    kind: str = "identity"
    alpha: float = 1.0
    beta: float = 1.0
    func: object = None
    name: str = "identity"

    def __post_init__(self):
        if self.kind not in ("identity", "scalar", "matrix"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if not (self.alpha > 0 and self.beta >= self.alpha):
            raise ValueError(f"need 0 < alpha <= beta, got alpha={self.alpha}, beta={self.beta}")
        if self.kind != "identity" and self.func is None:
            raise ValueError(f"coefficient kind {self.kind!r} needs a function")

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def constant(cls, c):
        c = float(c)
        return cls("scalar", c, c, lambda *x: np.full(np.shape(x[0]), c), f"{c:g}*identity")

    @classmethod
    def aniso(cls, a1, a2):
        a1, a2 = float(a1), float(a2)

        def func(*x):
            z = np.zeros(np.shape(x[0]))
            return (z + a1, z + a2, z)

        return cls("matrix", min(a1, a2), max(a1, a2), func, f"aniso({a1:g},{a2:g})")

    @classmethod
    def bump(cls, x0):
        """``1 + exp(-|x - x0|^2) / 2``; bounds alpha = 1, beta = 1.5."""
        x0 = tuple(float(c) for c in np.ravel(x0))

        def func(*x):
            r2 = sum((xi - ci) ** 2 for xi, ci in zip(x, x0))
            return 1.0 + 0.5 * np.exp(-r2)

        return cls("scalar", 1.0, 1.5, func, "bump")

    def sample(self, points, dim):
        """Return ``(m11, m22, m12)`` arrays at the given points (``m22, m12`` zero in 1D)."""
        npts = np.shape(points[0])
        if self.kind == "identity":
            one = np.ones(npts)
            m11, m22, m12 = one, one, np.zeros(npts)
        elif self.kind == "scalar":
            a = np.broadcast_to(np.asarray(self.func(*points), float), npts)
            m11, m22, m12 = a, a, np.zeros(npts)
        else:
            out = self.func(*points)
            if dim == 1 and np.ndim(out) <= 1 and not isinstance(out, tuple):
                out = (out, 0.0, 0.0)
            m11, m22, m12 = (np.broadcast_to(np.asarray(c, float), npts) for c in out)
        if dim == 1:
            return m11, np.zeros(npts), np.zeros(npts)
        return m11, m22, m12

    def scaled(self, c):
        """The field ``c * M`` with bounds scaled accordingly."""
        c = float(c)
        base = self

        if self.kind == "identity":
            return CoeffField.constant(c)
        if self.kind == "scalar":
            return CoeffField("scalar", c * self.alpha, c * self.beta,
                              lambda *x: c * np.asarray(base.func(*x)), f"{c:g}*{self.name}")

        def func(*x):
            return tuple(c * np.asarray(v) for v in base.func(*x))

        return CoeffField("matrix", c * self.alpha, c * self.beta, func, f"{c:g}*{self.name}")


@dataclass(frozen=True, eq=False)
class DivFormOperator:
    grid: object
    coeff: CoeffField
    matrix: sp.csr_matrix
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def vol(self):
        return self.grid.cell_volume

    @property
    def alpha(self):
        return self.coeff.alpha

    @property
    def beta(self):
        return self.coeff.beta

    def lu(self):
        """Cached sparse LU factorization of the stiffness matrix."""
        if "lu" not in self._cache:
            self._cache["lu"] = spla.splu(self.matrix.tocsc())
        return self._cache["lu"]

    def energy(self, u, v=None):
        """``u . A v`` on raw value arrays."""
        v = u if v is None else v
        return float(u @ (self.matrix @ v))


def _cell_centres(grid):
    return [0.5 * (a[:-1] + a[1:]) for a in grid.axes()]


def _difference(grid, axis, offset):
    """Sparse map from interior values to one family of cell differences.

    In 2D, ``offset`` selects the lower (0) or upper (1) edge of each cell in
    the direction transverse to ``axis``.
    """
    n = grid.n
    full = int(np.prod(n))
    idx = np.arange(full).reshape(n)
    if grid.dim == 1:
        lo, hi = idx[:-1], idx[1:]
    else:
        cells = (slice(0, n[0] - 1), slice(0, n[1] - 1))
        if axis == 0:
            lo = idx[:-1, offset : n[1] - 1 + offset]
            hi = idx[1:, offset : n[1] - 1 + offset]
        else:
            lo = idx[offset : n[0] - 1 + offset, :-1]
            hi = idx[offset : n[0] - 1 + offset, 1:]
        del cells
    lo, hi = lo.ravel(), hi.ravel()
    ncell = lo.size
    rows = np.concatenate([np.arange(ncell), np.arange(ncell)])
    cols = np.concatenate([hi, lo])
    vals = np.concatenate([np.ones(ncell), -np.ones(ncell)]) / grid.h[axis]
    D = sp.csr_matrix((vals, (rows, cols)), shape=(ncell, full))
    return D[:, grid.interior_index]


def assemble(grid, coeff=None):
    """Assemble the stiffness matrix of ``-div(M grad .)`` over the interior nodes."""
    coeff = CoeffField.identity() if coeff is None else coeff
    centres = np.meshgrid(*_cell_centres(grid), indexing="ij")
    m11, m22, m12 = (c.ravel() for c in coeff.sample(centres, grid.dim))

    if grid.dim == 1:
        lam_min = lam_max = m11
    else:
        half_tr = 0.5 * (m11 + m22)
        disc = np.sqrt((0.5 * (m11 - m22)) ** 2 + m12**2)
        lam_min, lam_max = half_tr - disc, half_tr + disc
    if not np.all(np.isfinite(lam_min)) or lam_min.min() <= 0:
        raise ValueError("coefficient sample is not positive definite")
    tol = 1e-12
    if lam_min.min() < coeff.alpha * (1 - tol) or lam_max.max() > coeff.beta * (1 + tol):
        raise ValueError(
            f"coefficient samples span [{lam_min.min():.6g}, {lam_max.max():.6g}], "
            f"outside the declared bounds [{coeff.alpha:g}, {coeff.beta:g}]"
        )

    vol = grid.cell_volume
    if grid.dim == 1:
        D = _difference(grid, 0, 0)
        A = D.T @ sp.diags(vol * m11) @ D
    else:
        Da1, Da2 = _difference(grid, 0, 0), _difference(grid, 0, 1)
        Db1, Db2 = _difference(grid, 1, 0), _difference(grid, 1, 1)
        W11 = sp.diags(vol * m11 / 2)
        W22 = sp.diags(vol * m22 / 2)
        A = Da1.T @ W11 @ Da1 + Da2.T @ W11 @ Da2 + Db1.T @ W22 @ Db1 + Db2.T @ W22 @ Db2
        if np.any(m12 != 0):
            Sa, Sb = Da1 + Da2, Db1 + Db2
            W12 = sp.diags(vol * m12 / 4)
            cross = Sa.T @ W12 @ Sb
            A = A + cross + cross.T
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.eliminate_zeros()
    return DivFormOperator(grid, coeff, A)


def laplacian(grid):
    return assemble(grid, CoeffField.identity())


def _values(op, f):
    if isinstance(f, ScalarField):
        if not op.grid.same_as(f.grid):
            raise GridMismatchError("field and operator live on different grids")
        return f.values
    return np.asarray(f, dtype=float)


def apply(op, f):
    """``A f``: the volume-weighted action of L on a field."""
    return ScalarField(op.grid, op.matrix @ _values(op, f))


def solve_linear(op, rhs, lin_tol=1e-10, maxiter=None, precondition=False):
    """Solve ``A x = rhs`` by conjugate gradients.

    Raises :class:`LinearSolveError` (carrying the achieved relative residual)
    when the iteration limit is hit first.
    """
    b = _values(op, rhs)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return ScalarField.zeros(op.grid)
    A = op.matrix
    maxiter = 10 * A.shape[0] + 100 if maxiter is None else maxiter
    M = sp.diags(1.0 / A.diagonal()) if precondition else None
    # a slightly tighter internal target absorbs the recurrence/true-residual gap
    x, info = spla.cg(A, b, rtol=0.5 * lin_tol, atol=0.0, maxiter=maxiter, M=M)
    rel = float(np.linalg.norm(A @ x - b)) / bnorm
    if rel > lin_tol:
        raise LinearSolveError(
            f"conjugate gradients stopped at relative residual {rel:.3e} "
            f"(target {lin_tol:.1e}, info={info})",
            residual=rel,
            iterations=maxiter,
        )
    return ScalarField(op.grid, x)


def principal_eigenpair(op, tol=1e-10, max_iter=500):
    """Smallest eigenpair of ``A phi = lambda1 * vol * phi`` by inverse iteration.

    Returns ``(lambda1, phi1)`` with ``phi1 >= 0`` and ``max(phi1) == 1``.
    """
    key = ("eig", tol)
    if key in op._cache:
        return op._cache[key]
    A, vol = op.matrix, op.vol
    lu = op.lu()
    x = np.ones(A.shape[0])
    lam = math.nan
    res = math.inf
    for it in range(1, max_iter + 1):
        x = lu.solve(x)
        x /= np.abs(x).max()
        Ax = A @ x
        lam = float(x @ Ax) / (vol * float(x @ x))
        res = float(np.linalg.norm(Ax - lam * vol * x)) / (vol * float(np.linalg.norm(x)))
        if res <= tol:
            break
    else:
        raise EigenSolverError(
            f"inverse iteration did not converge in {max_iter} steps (residual {res:.3e})",
            residual=res,
            iterations=max_iter,
        )
    if x.sum() < 0:
        x = -x
    x = np.maximum(x, 0.0)
    x /= x.max()
    out = (lam, ScalarField(op.grid, x))
    op._cache[key] = out
    return out
