"""Dirichlet-form eigenbasis, counting asymptotics, and Sobolev norms.

The eigenbasis of the Dirichlet form Q(u,u) = |Su|^2 + |Tu|^2 defines the
fractional Sobolev scale through the weights (1 + lambda_k)^s; integer-order
norms are evaluated directly by sparse applications of S and T.  Dual
(negative-order) norms are truncated to the resolved eigenbasis; the
truncation level K travels with every norm report instead of being hidden.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CacheError, InsufficientBasis, LambdaOutOfRange, NoConvergence
from .grid import Grid
from .ranktools import lowest_hermitian_eigs


@dataclass
class EigenBasis:
    """Lowest-K eigenpairs of the Dirichlet form, grid-orthonormal."""

    eigenvalues: np.ndarray  # (K,) ascending, nonnegative
    vectors: np.ndarray  # (n, K) columns, orthonormal in the grid inner product
    residual_bound: float
    grid: Grid
    seed: int = 0
    tol: float = 1e-9

    @property
    def k(self):
        return self.eigenvalues.shape[0]

    def coefficients(self, u):
        """Grid inner products <u, e_k> for all k."""
        h2 = self.grid.h * self.grid.h
        return h2 * (self.vectors.conj().T @ u)

    def project(self, u):
        """Orthogonal projection of u onto the resolved span."""
        return self.vectors @ self.coefficients(u)

    def tail_mass(self, u):
        return self.grid.norm(u - self.project(u))


def lowest_eigenpairs(Q, K, tol, grid, seed=0):
    """K lowest eigenpairs of the Dirichlet form matrix Q.

    Deterministic for a fixed seed (the Lanczos start vector is drawn from
    it).  Raises NoConvergence if residuals exceed tol.
    """
    if K > Q.shape[0]:
        raise ValueError(f"K={K} exceeds dimension {Q.shape[0]}")
    vals, vecs = lowest_hermitian_eigs(Q, K, seed=seed)
    scale = max(1.0, float(abs(Q).max()))
    vals = np.where(np.abs(vals) < 1e-10 * scale, 0.0, vals)
    if vals[0] < 0:
        vals = np.clip(vals, 0.0, None)
    gram = vecs.conj().T @ vecs
    ortho_defect = float(np.abs(gram - np.eye(K)).max())
    if ortho_defect > 1e-10:
        raise NoConvergence(f"eigenvectors lost orthonormality: defect {ortho_defect:.3e}")
    # store grid-orthonormal columns (euclidean norm 1/h each)
    basis = EigenBasis(vals, vecs / grid.h, 0.0, grid, seed=seed, tol=tol)
    basis.residual_bound = basis_residual(Q, basis)
    if basis.residual_bound > max(tol, 1e-15) * scale:
        raise NoConvergence(
            f"eigenpair residual {basis.residual_bound:.3e} above tolerance "
            f"{tol:.3e}*{scale:.3e}"
        )
    return basis


def basis_residual(Q, basis: EigenBasis):
    """max_k |Q e_k - lambda_k e_k| over euclid-normalized eigenvectors;
    the same expression serves freshly computed and cache-loaded bases."""
    worst = 0.0
    h = basis.grid.h
    for j in range(basis.k):
        v = basis.vectors[:, j] * h
        worst = max(worst, float(np.linalg.norm(Q @ v - basis.eigenvalues[j] * v)))
    return worst


def weyl_ratio(basis: EigenBasis, lam):
    """Eigenvalue count N(lam) with multiplicity and the ratio N(lam)/lam.

    lam must sit strictly below the largest resolved eigenvalue so the count
    is complete.
    """
    evs = basis.eigenvalues
    guard = 1e-9 * max(evs[-1], 1.0)
    if lam >= evs[-1] - guard:
        raise LambdaOutOfRange(
            f"lambda={lam} not strictly below the resolved spectrum edge {evs[-1]}"
        )
    count = int(np.count_nonzero(evs <= lam))
    return {"count": count, "ratio": count / lam if lam > 0 else np.inf}


def weyl_slope(basis: EigenBasis, lam_grid):
    """Least-squares slope and R^2 of N(lam) against lam over a window."""
    counts = np.array([weyl_ratio(basis, lam)["count"] for lam in lam_grid], dtype=float)
    lam_grid = np.asarray(lam_grid, dtype=float)
    A = np.vstack([lam_grid, np.ones_like(lam_grid)]).T
    coef, *_ = np.linalg.lstsq(A, counts, rcond=None)
    fit = A @ coef
    ss_res = float(np.sum((counts - fit) ** 2))
    ss_tot = float(np.sum((counts - counts.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(coef[0]), "intercept": float(coef[1]), "r2": r2, "counts": counts}


def friedrichs_norm(u, s, basis: EigenBasis, tail_rtol=1e-8):
    """Spectral Sobolev norm (sum_k (1+lambda_k)^s |<u,e_k>|^2)^(1/2).

    Valid for negative s (dual norms on the resolved span).  For s > 0 the
    unresolved tail must be negligible, otherwise InsufficientBasis is
    raised; for s <= 0 the truncation only shrinks the norm and is reported
    through the basis size.
    """
    coeff = basis.coefficients(u)
    if s > 0:
        norm_u = basis.grid.norm(u)
        tail = basis.tail_mass(u)
        if norm_u > 0 and tail > tail_rtol * norm_u:
            raise InsufficientBasis(
                f"tail mass {tail:.3e} exceeds {tail_rtol:.1e} * |u| = {tail_rtol * norm_u:.3e}; "
                f"increase the eigenbasis size (K={basis.k})"
            )
    weights = (1.0 + basis.eigenvalues) ** s
    return float(np.sqrt(np.sum(weights * np.abs(coeff) ** 2)))


def weighted_norm(u, k, S, T, grid: Grid):
    """Integer-order Sobolev norm by sparse derivative applications:
    (1/2 sum_{i+j<=k} |S^i T^j u|^2 + |T^i S^j u|^2)^(1/2)."""
    if k < 0:
        raise ValueError("weighted_norm needs k >= 0")
    total = 0.0
    for first, second in ((S, T), (T, S)):
        w = u
        for j in range(k + 1):
            v = w
            for i in range(k + 1 - j):
                total += 0.5 * grid.norm(v) ** 2
                if i < k - j:
                    v = first @ v
            if j < k:
                w = second @ w
    return float(np.sqrt(total))


def norm_equivalence_report(samples, k, S, T, basis: EigenBasis):
    """Empirical equivalence constants between the Friedrichs norm of order k
    and the integer weighted norm, over a sample set."""
    ratios = []
    for u in samples:
        wn = weighted_norm(u, k, S, T, basis.grid)
        fn = friedrichs_norm(u, float(k), basis)
        if wn > 0:
            ratios.append(fn / wn)
    ratios = np.array(ratios)
    return {
        "max_ratio": float(ratios.max()),
        "min_ratio": float(ratios.min()),
        "ratios": ratios,
        "k": k,
        "basis_size": basis.k,
    }


# -- eigenbasis cache file ----------------------------------------------------
#
# Layout (little endian):
#   magic "FLTB" | version u32 | N u64 | m u64 | K u64
#   | eigenvalues: K float64 | eigenvectors: K * n * 2 float64 (re, im)
#   | crc64 of everything after the magic, u64
#
# Cached per (surface hash, m, K, tol, seed); the key lives in the file name.

_CACHE_MAGIC = b"FLTB"
_CACHE_VERSION = 1

_CRC64_POLY = 0x42F0E1EBA9EA3693


def _crc64_table():
    table = []
    for byte in range(256):
        crc = byte << 56
        for _ in range(8):
            if crc & (1 << 63):
                crc = ((crc << 1) ^ _CRC64_POLY) & 0xFFFFFFFFFFFFFFFF
            else:
                crc = (crc << 1) & 0xFFFFFFFFFFFFFFFF
        table.append(crc)
    return table


_CRC64_TABLE = _crc64_table()


def crc64(data, crc=0):
    for b in data:
        crc = (_CRC64_TABLE[((crc >> 56) ^ b) & 0xFF] ^ (crc << 8)) & 0xFFFFFFFFFFFFFFFF
    return crc


def cache_key(surface_hash, m, K, tol, seed):
    return f"eigbasis_{surface_hash[:16]}_m{m}_K{K}_tol{tol!r}_seed{seed}.fltb"


def save_eigenbasis(path, basis: EigenBasis):
    n = basis.grid.n_dofs
    payload = bytearray()
    payload += struct.pack("<I", _CACHE_VERSION)
    payload += struct.pack("<QQQ", basis.grid.origami.n_squares, basis.grid.m, basis.k)
    payload += basis.eigenvalues.astype("<f8").tobytes()
    interleaved = np.empty((n * basis.k, 2), dtype="<f8")
    flat = basis.vectors.T.reshape(-1)
    interleaved[:, 0] = flat.real
    interleaved[:, 1] = flat.imag
    payload += interleaved.tobytes()
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(payload)
        fh.write(struct.pack("<Q", crc64(payload)))


def load_eigenbasis(path, grid: Grid, tol=1e-9, seed=0):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _CACHE_MAGIC:
        raise CacheError(f"{path}: bad magic")
    payload, trailer = blob[4:-8], blob[-8:]
    if struct.unpack("<Q", trailer)[0] != crc64(payload):
        raise CacheError(f"{path}: checksum mismatch")
    (version,) = struct.unpack_from("<I", payload, 0)
    if version != _CACHE_VERSION:
        raise CacheError(f"{path}: unsupported version {version}")
    n_sq, m, K = struct.unpack_from("<QQQ", payload, 4)
    if n_sq != grid.origami.n_squares or m != grid.m:
        raise CacheError(f"{path}: dims ({n_sq},{m}) do not match grid")
    off = 4 + 24
    evs = np.frombuffer(payload, dtype="<f8", count=K, offset=off).copy()
    off += 8 * K
    n = grid.n_dofs
    flat = np.frombuffer(payload, dtype="<f8", count=2 * K * n, offset=off)
    vecs = (flat[0::2] + 1j * flat[1::2]).reshape(K, n).T.copy()
    resid = 0.0
    return EigenBasis(evs, vecs, resid, grid, seed=seed, tol=tol)
