"""Cell-centered discretization of an origami and exact-skew shift operators.

Each square carries an m x m grid of cell centers at ((i+1/2)/m, (j+1/2)/m),
so no degree of freedom sits on a cone point.  The horizontal and vertical
derivative operators are central differences built from the right/up cell
shift permutations; skew-symmetry is exact by construction.  The grid inner
product carries the uniform cell mass 1/m^2, which makes the mass matrix a
scalar multiple of the identity and every adjoint a plain conjugate
transpose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, EvenGridSize
from .origami import Origami

RIGHT, LEFT, UP, DOWN = "right", "left", "up", "down"


@dataclass(frozen=True)
class GridSpec:
    """Cells per square side; m must be odd to exclude the checkerboard
    null modes of the central-difference stencil."""

    m: int

    def __post_init__(self):
        if self.m < 1 or self.m % 2 == 0:
            raise EvenGridSize(f"grid size m must be odd and positive, got {self.m}")

    @property
    def h_step(self):
        return 1.0 / self.m


class Grid:
    """Origami + GridSpec with the global degree-of-freedom numbering.

    Global index of cell (s, i, j) is ``s*m*m + j*m + i``; ``i`` is the
    column (x direction), ``j`` the row (y direction).
    """

    def __init__(self, origami: Origami, m: int):
        self.origami = origami
        self.spec = GridSpec(m)
        self.m = m
        self.h = 1.0 / m
        self.n_dofs = origami.n_squares * m * m
        n, mm = origami.n_squares, m * m
        s = np.repeat(np.arange(n), mm)
        j = np.tile(np.repeat(np.arange(m), m), n)
        i = np.tile(np.arange(m), n * m)
        self._cells = (s, i, j)
        pr = np.asarray(origami.perm_right)
        pu = np.asarray(origami.perm_up)
        pri = np.asarray(origami.perm_right_inv)
        pui = np.asarray(origami.perm_up_inv)
        interior = i < m - 1
        self._right = np.where(interior, self.index(s, i + 1, j), self.index(pr[s], 0, j))
        interior = i > 0
        self._left = np.where(interior, self.index(s, i - 1, j), self.index(pri[s], m - 1, j))
        interior = j < m - 1
        self._up = np.where(interior, self.index(s, i, j + 1), self.index(pu[s], i, 0))
        interior = j > 0
        self._down = np.where(interior, self.index(s, i, j - 1), self.index(pui[s], i, m - 1))

    def index(self, s, i, j):
        return (np.asarray(s) * self.m + np.asarray(j)) * self.m + np.asarray(i)

    def cell(self, idx):
        """Inverse of :meth:`index`: global index -> (s, i, j)."""
        i = idx % self.m
        j = (idx // self.m) % self.m
        s = idx // (self.m * self.m)
        return int(s), int(i), int(j)

    def cell_center(self, s, i, j):
        """Coordinates of the cell center within its square."""
        return ((i + 0.5) * self.h, (j + 0.5) * self.h)

    def neighbor_index(self, idx, direction):
        return int(
            {RIGHT: self._right, LEFT: self._left, UP: self._up, DOWN: self._down}[direction][idx]
        )

    # -- fields ------------------------------------------------------------

    def zeros(self):
        return np.zeros(self.n_dofs, dtype=complex)

    def ones(self):
        return np.ones(self.n_dofs, dtype=complex)

    def sample(self, fn):
        """Field from a callable fn(s, x, y) evaluated at cell centers."""
        s, i, j = self._cells
        x = (i + 0.5) * self.h
        y = (j + 0.5) * self.h
        vec = np.fromiter(
            (fn(int(ss), float(xx), float(yy)) for ss, xx, yy in zip(s, x, y)),
            dtype=complex,
            count=self.n_dofs,
        )
        return vec

    def random_field(self, rng, real=False):
        v = rng.standard_normal(self.n_dofs)
        if not real:
            v = v + 1j * rng.standard_normal(self.n_dofs)
        return v

    def inner(self, u, v):
        """Grid inner product <u, v> = (1/m^2) sum u * conj(v)."""
        return complex(np.vdot(v, u)) * self.h * self.h

    def norm(self, u):
        return float(np.linalg.norm(u)) * self.h

    def mean(self, u):
        """Average against the area form, i.e. <u, 1>/area."""
        return complex(np.sum(u)) * self.h * self.h / self.origami.area


def neighbor(o: Origami, g: GridSpec, cell, direction):
    """Neighbor of cell=(s, i, j) in one of 'right', 'left', 'up', 'down'.

    Interior moves shift i or j; boundary crossings apply the gluing
    permutations with the coordinate wrapping to the opposite side.
    """
    s, i, j = cell
    m = g.m
    if direction == RIGHT:
        return (s, i + 1, j) if i < m - 1 else (o.perm_right[s], 0, j)
    if direction == LEFT:
        return (s, i - 1, j) if i > 0 else (o.perm_right_inv[s], m - 1, j)
    if direction == UP:
        return (s, i, j + 1) if j < m - 1 else (o.perm_up[s], i, 0)
    if direction == DOWN:
        return (s, i, j - 1) if j > 0 else (o.perm_up_inv[s], i, m - 1)
    raise ValueError(f"unknown direction {direction!r}")


def _as_grid(o, g=None):
    if isinstance(o, Grid):
        return o
    m = g.m if isinstance(g, GridSpec) else int(g)
    return Grid(o, m)


def _shift_matrix(grid: Grid, targets):
    n = grid.n_dofs
    return sp.csr_matrix(
        (np.ones(n), (np.arange(n), targets)),
        shape=(n, n),
    )


def assert_skew(mat, tol=0.0, what="operator"):
    defect = abs(mat + mat.T)
    worst = defect.max() if defect.nnz else 0.0
    if worst > tol:
        raise AssemblyError(f"{what} is not skew-symmetric (max defect {worst})")


def assert_hermitian(mat, tol=1e-12, what="operator"):
    defect = abs(mat - mat.getH())
    worst = defect.max() if defect.nnz else 0.0
    if worst > tol:
        raise AssemblyError(f"{what} is not hermitian (max defect {worst})")


def assemble_S(o, g=None) -> sp.csr_matrix:
    """Horizontal central-difference operator (R - R^{-1}) * m/2.

    Exactly skew-symmetric; annihilates constants exactly.  Accepts either a
    :class:`Grid` or an (origami, grid spec) pair.
    """
    grid = _as_grid(o, g)
    R = _shift_matrix(grid, grid._right)
    S = ((R - R.T) * (grid.m / 2.0)).tocsr()
    assert_skew(S, 0.0, "S")
    return S


def assemble_T(o, g=None) -> sp.csr_matrix:
    """Vertical central-difference operator (U - U^{-1}) * m/2."""
    grid = _as_grid(o, g)
    U = _shift_matrix(grid, grid._up)
    T = ((U - U.T) * (grid.m / 2.0)).tocsr()
    assert_skew(T, 0.0, "T")
    return T


def assemble_Q(S, T) -> sp.csr_matrix:
    """Dirichlet form matrix S^H S + T^H T (hermitian positive semidefinite)."""
    Q = (S.getH() @ S + T.getH() @ T).tocsr()
    if np.iscomplexobj(Q.data) and np.abs(Q.data.imag).max(initial=0.0) == 0.0:
        Q = sp.csr_matrix((Q.data.real, Q.indices, Q.indptr), shape=Q.shape)
    assert_hermitian(Q, 1e-9 * max(abs(Q).max(), 1.0), "Q")
    return Q


def commutator_report(S, T, o, g=None):
    """Norm and support of [S, T] = ST - TS.

    Returns a dict with the max row-sum norm, the support cells (s, i, j),
    and whether the support lies within the predicted corner neighborhoods of
    squares with non-commuting gluings (stencil distance <= 2).
    """
    grid = _as_grid(o, g)
    o = grid.origami
    C = (S @ T - T @ S).tocsr()
    C.eliminate_zeros()
    absC = abs(C)
    norm = float(absC.sum(axis=1).max()) if C.nnz else 0.0
    rows = np.unique(C.nonzero()[0])
    support = [grid.cell(int(r)) for r in rows]

    r, u = o.perm_right, o.perm_up
    bad_squares = set()
    for s in range(o.n_squares):
        for a, b in ((r, u), (r, o.perm_up_inv), (o.perm_right_inv, u),
                     (o.perm_right_inv, o.perm_up_inv)):
            if a[b[s]] != b[a[s]]:
                bad_squares.update((s, a[s], b[s], a[b[s]], b[a[s]]))
    m = grid.m
    within = all(
        s in bad_squares and min(i, m - 1 - i) <= 2 and min(j, m - 1 - j) <= 2
        for (s, i, j) in support
    )
    return {
        "norm": norm,
        "support": support,
        "within_predicted": within,
        "matrix": C,
    }


def export_coo(mat, path):
    """Write a sparse operator as 'row col re im' text lines (row-major)."""
    coo = mat.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# rows {mat.shape[0]} cols {mat.shape[1]} nnz {coo.nnz}\n")
        data = coo.data.astype(complex)
        for r, c, v in zip(coo.row[order], coo.col[order], data[order]):
            fh.write(f"{r} {c} {float(v.real)!r} {float(v.imag)!r}\n")


def import_coo(path):
    rows, cols, vals = [], [], []
    shape = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                parts = line.split()
                shape = (int(parts[2]), int(parts[4]))
                continue
            if not line:
                continue
            r, c, re_, im_ = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(re_) + 1j * float(im_))
    return sp.csr_matrix((vals, (rows, cols)), shape=shape)


def q_kernel_guard(Q, n_check=3, seed=0):
    """Dimension of the numerical kernel of Q (should be 1 on a connected
    surface); returns (dim, smallest eigenvalues).  Used to warn about
    spurious null modes surviving the odd-m rule."""
    from .ranktools import lowest_hermitian_eigs

    k = min(n_check + 1, Q.shape[0] - 2)
    vals, _ = lowest_hermitian_eigs(Q, k, seed=seed)
    scale = abs(Q).max()
    dim = int(np.sum(vals < 1e-10 * max(scale, 1.0)))
    return dim, vals
