"""Twisted Cauchy-Riemann operators and their kernels.

The two operators (S + i*sigma) + iT and (S + i*sigma) - iT are exact
conjugate-transposes of each other up to sign ((D+)^H = -D-, a consequence
of the shift permutations transposing to their inverses), so adjoint null
spaces, deficiency dimensions and the conjugation symmetry
d+(sigma) = d-(-sigma) all hold at the matrix level without discretization
slack.  The isometry between the twisted form and the squared norm of D+- u
holds exactly only where the commutator [S, T] vanishes; elsewhere the
defect is measured, reported, and never hidden.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import UnsupportedSize
from .grid import Grid
from .ranktools import NullspaceInfo, lowest_hermitian_eigs, nullspace, orthonormal_columns
from .spectral import EigenBasis

DEFICIENCY_SIZE_LIMIT = 20000


@dataclass(frozen=True)
class TwistParams:
    """Twist frequency and direction; sigma_theta is always derived."""

    sigma: float
    theta: float

    @property
    def sigma_theta(self):
        return self.sigma * np.cos(self.theta)


def cauchy_riemann(S, T, sigma, sign):
    """Twisted Cauchy-Riemann operator (S + i*sigma*I) + sign * i*T."""
    if sign not in (+1, -1, "+", "-"):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    s = 1.0 if sign in (+1, "+") else -1.0
    n = S.shape[0]
    op = S.astype(complex) + (s * 1j) * T.astype(complex)
    if sigma != 0.0:
        op = op + (1j * sigma) * sp.identity(n, dtype=complex, format="csr")
    return op.tocsr()


def q_form_twisted(u, sigma, S, T, grid: Grid):
    """Twisted Dirichlet form value |(S + i*sigma)u|^2 + |Tu|^2."""
    su = S @ u + 1j * sigma * u
    return grid.norm(su) ** 2 + grid.norm(T @ u) ** 2


def q_form_twisted_matrix(sigma, S, T):
    """Hermitian matrix of the twisted form: (S+i sigma)^H (S+i sigma) + T^H T."""
    n = S.shape[0]
    B = S.astype(complex) + (1j * sigma) * sp.identity(n, dtype=complex, format="csr")
    return (B.getH() @ B + T.getH() @ T).tocsr()


@dataclass
class KernelInfo:
    """Joint numerical kernel of (S + i*sigma) and T."""

    basis: np.ndarray  # euclid-orthonormal columns
    dim: int
    form_eigenvalues: np.ndarray  # smallest eigenvalues of the twisted form
    threshold: float


def kernel_K(sigma, S, T, tol=1e-8, seed=0, max_dim=32):
    """Orthonormal basis of {u : |(S+i sigma)u|^2 + |Tu|^2 <= tol^2 |u|^2}.

    Candidates come from the lowest eigenpairs of the twisted form matrix
    (the sum of the two nonnegative forms, numerically stabler than
    intersecting two separate null spaces); membership is then decided by
    direct evaluation of the form on each candidate, which is immune to the
    round-off floor of the assembled matrix eigenvalues.
    """
    M = q_form_twisted_matrix(sigma, S, T)
    n = M.shape[0]
    k = min(8, n - 2)
    thr = tol * tol
    while True:
        vals, vecs = lowest_hermitian_eigs(M, k, seed=seed)
        ray = np.array(
            [
                (np.linalg.norm(S @ v + 1j * sigma * v) ** 2 + np.linalg.norm(T @ v) ** 2)
                / np.linalg.norm(v) ** 2
                for v in vecs.T
            ]
        )
        if (ray > thr).any() or k >= min(max_dim, n - 2):
            break
        k = min(2 * k, max_dim, n - 2)
    mask = ray <= thr
    basis = orthonormal_columns(vecs[:, mask])
    return KernelInfo(basis, int(mask.sum()), ray, thr)


@dataclass
class DeficiencyData:
    """Null spaces of the conjugate transposes of the twisted CR operators.

    basis_plus spans ker((D^-)^H) (the +-side deficiency space), basis_minus
    spans ker((D^+)^H).  Conjugating the matrices gives the exact symmetry
    d_plus(sigma) == d_minus(-sigma).
    """

    sigma: float
    basis_plus: np.ndarray
    basis_minus: np.ndarray
    d_plus: int
    d_minus: int
    rank_tol: float
    info_plus: NullspaceInfo
    info_minus: NullspaceInfo


def deficiency_spaces(sigma, S, T, rank_tol=1e-8, seed=0, size_limit=DEFICIENCY_SIZE_LIMIT,
                      strict_gap=False):
    """Numerical deficiency spaces at twist sigma via singular-value
    thresholding at rank_tol relative to the largest singular value.

    Restricted to problems of size <= size_limit (rank revelation beyond that
    is out of the desk-scale scope).  Set strict_gap to raise RankAmbiguous
    when singular values cluster at the threshold.
    """
    n = S.shape[0]
    if n > size_limit:
        raise UnsupportedSize(
            f"deficiency space computation supports up to {size_limit} dofs, got {n}"
        )
    dminus = cauchy_riemann(S, T, sigma, "-")
    dplus = cauchy_riemann(S, T, sigma, "+")
    info_plus = nullspace(dminus.getH(), rank_tol=rank_tol, seed=seed)
    info_minus = nullspace(dplus.getH(), rank_tol=rank_tol, seed=seed)
    if strict_gap:
        info_plus.check_gap()
        info_minus.check_gap()
    return DeficiencyData(
        sigma=sigma,
        basis_plus=info_plus.basis,
        basis_minus=info_minus.basis,
        d_plus=info_plus.dim,
        d_minus=info_minus.dim,
        rank_tol=rank_tol,
        info_plus=info_plus,
        info_minus=info_minus,
    )


def isometry_residual(u, sigma, sign, S, T, grid: Grid):
    """| |D^sign u|^2 - Q_sigma(u,u) |; vanishes to round-off when [S,T]u = 0."""
    op = cauchy_riemann(S, T, sigma, sign)
    return abs(grid.norm(op @ u) ** 2 - q_form_twisted(u, sigma, S, T, grid))


def form_comparison_scan(sigma, S, T, grid: Grid, basis: EigenBasis, kernel_tol=1e-8, seed=0):
    """Extreme generalized Rayleigh quotients Q_sigma(u,u)/Q_0(u,u) over the
    zero-average resolved subspace orthogonal to the joint kernel at sigma.

    Returns empirical two-sided form-comparison constants.
    """
    V = basis.vectors[:, 1:]  # drop the constant mode: zero-average part
    ker = kernel_K(sigma, S, T, tol=kernel_tol, seed=seed)
    if ker.dim:
        V = V - ker.basis @ (ker.basis.conj().T @ V)
    V = orthonormal_columns(V)
    M_sigma = q_form_twisted_matrix(sigma, S, T)
    M_zero = q_form_twisted_matrix(0.0, S, T)
    A = V.conj().T @ (M_sigma @ V)
    B = V.conj().T @ (M_zero @ V)
    A = 0.5 * (A + A.conj().T)
    B = 0.5 * (B + B.conj().T)
    vals = la.eigh(A, B, eigvals_only=True)
    return {"c_lower": float(vals[0]), "c_upper": float(vals[-1]), "dim": V.shape[1],
            "kernel_dim": ker.dim}
