"""Shared numerical-rank and lowest-eigenpair machinery.

All iterative paths are seeded so repeated runs are bit-identical.  Numerical
kernels are defined by singular-value thresholding at rank_tol times the
largest singular value; every report carries the singular values bracketing
the threshold so the spectral gap is visible instead of hidden.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoConvergence, RankAmbiguous

DENSE_CUTOFF = 700


def _start_vector(n, seed, iscomplex):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    if iscomplex:
        v = v + 1j * rng.standard_normal(n)
    return v


def lowest_hermitian_eigs(A, k, seed=0, maxiter=None, dense_cutoff=DENSE_CUTOFF):
    """k lowest eigenpairs of a hermitian (real-symmetric or complex-hermitian)
    sparse matrix, sorted ascending, eigenvectors euclid-orthonormal.

    Uses shift-invert Lanczos on A + I (positive definite for PSD A up to
    round-off); falls back to a dense solve for small problems.
    """
    n = A.shape[0]
    if k >= n - 1 or n <= dense_cutoff:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        vals, vecs = la.eigh(dense)
        return vals[:k].copy(), vecs[:, :k].copy()
    iscomplex = np.iscomplexobj(A.data if sp.issparse(A) else A)
    v0 = _start_vector(n, seed, iscomplex)
    scale = float(abs(A).max()) if sp.issparse(A) else float(np.abs(A).max())
    shift = max(1e-3 * scale, 1.0)
    try:
        vals, vecs = spla.eigsh(A, k=k, sigma=-shift, which="LM", v0=v0, maxiter=maxiter)
    except spla.ArpackNoConvergence as exc:
        raise NoConvergence(f"eigensolver budget exhausted: {exc}") from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def largest_singular_value(A, seed=0):
    """2-norm of A (largest singular value)."""
    n = min(A.shape)
    if n <= DENSE_CUTOFF:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        return float(la.svdvals(dense)[0])
    M = (A.getH() @ A).tocsr()
    iscomplex = np.iscomplexobj(M.data)
    v0 = _start_vector(M.shape[0], seed, iscomplex)
    vals = spla.eigsh(M, k=1, which="LA", v0=v0, return_eigenvectors=False)
    return float(np.sqrt(max(vals[0], 0.0)))


@dataclass
class NullspaceInfo:
    """Numerical null space of a square operator.

    basis: euclid-orthonormal columns spanning the numerical kernel
    svals_below: singular values counted as zero (ascending)
    sval_above: smallest singular value above the threshold (None if the
       search block was exhausted before finding one)
    """

    basis: np.ndarray
    dim: int
    threshold: float
    smax: float
    svals_below: np.ndarray
    sval_above: float | None

    @property
    def gap(self):
        """Ratio first-kept-above / last-dropped-below (inf when clean)."""
        below = self.svals_below[-1] if self.dim else 0.0
        if self.sval_above is None:
            return np.inf
        if below == 0.0:
            return np.inf
        return self.sval_above / below

    def check_gap(self, factor=10.0):
        if self.sval_above is not None and self.dim:
            below = self.svals_below[-1]
            if self.sval_above < factor * below:
                raise RankAmbiguous(
                    f"singular values {below:.3e} and {self.sval_above:.3e} cluster at "
                    f"threshold {self.threshold:.3e}",
                    below=below,
                    above=self.sval_above,
                )
        return self


def nullspace(A, rank_tol=1e-8, max_dim=128, seed=0, dense_cutoff=DENSE_CUTOFF):
    """Numerical null space of the (square) operator A.

    Singular values below rank_tol * smax count as zero.  The sparse path
    finds the smallest eigenpairs of A^H A in growing blocks until a value
    above the threshold appears, so the reported dimension is never an
    artifact of a too-small search block (unless max_dim is hit, which is
    reported via sval_above=None).
    """
    n = A.shape[0]
    if n <= dense_cutoff:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        _, svals, vh = la.svd(dense)
        smax = float(svals[0]) if svals.size else 0.0
        threshold = rank_tol * smax
        mask = svals <= threshold
        dim = int(mask.sum())
        basis = vh[n - dim :].conj().T.copy() if dim else np.zeros((n, 0), dtype=dense.dtype)
        below = np.sort(svals[mask])
        above = float(svals[~mask][-1]) if dim < n else None
        return NullspaceInfo(basis, dim, threshold, smax, below, above)

    smax = largest_singular_value(A, seed=seed)
    threshold = rank_tol * smax
    M = (A.getH() @ A).tocsr()
    k = 8
    while True:
        k = min(k, n - 2)
        vals, vecs = _lowest_psd_block(M, k, seed)
        svals = np.sqrt(np.clip(vals, 0.0, None))
        above_mask = svals > threshold
        if above_mask.any() or k >= min(max_dim, n - 2):
            break
        k = min(2 * k, max_dim, n - 2)
    mask = svals <= threshold
    dim = int(mask.sum())
    basis = vecs[:, mask]
    if dim:
        basis = la.qr(basis, mode="economic")[0]
    above = float(svals[above_mask].min()) if above_mask.any() else None
    return NullspaceInfo(basis, dim, threshold, smax, np.sort(svals[mask]), above)


def _lowest_psd_block(M, k, seed):
    """Smallest eigenpairs of a PSD matrix via shift-invert at a tiny
    negative shift (keeps M + eps*I positive definite)."""
    n = M.shape[0]
    iscomplex = np.iscomplexobj(M.data)
    v0 = _start_vector(n, seed, iscomplex)
    scale = float(abs(M).max())
    eps = max(1e-12 * scale, 1e-300)
    try:
        vals, vecs = spla.eigsh(M, k=k, sigma=-eps, which="LM", v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise NoConvergence(f"nullspace eigensolver did not converge: {exc}") from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def orthonormal_columns(X):
    """Euclid-orthonormal basis for the column span of X."""
    if X.shape[1] == 0:
        return X
    return la.qr(X, mode="economic")[0]
