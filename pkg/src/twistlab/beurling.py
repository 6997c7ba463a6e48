"""Partial isometry between the twisted CR ranges, its unitary extension,
resolvent machinery, and the Cauchy-integral / maximal-function analytics.

Two backends realize the unitary extension.  The dense backend (feasible up
to a configurable size) assembles D+ pinv(D-) plus the finite-rank
deficiency block and takes the unitary polar factor, which is exact to
machine precision on every surface; on surfaces with commuting gluings the
polar correction is the identity up to round-off.  The matrix-free backend
applies the same map through projections and inner least-squares solves; on
non-commuting surfaces it inherits the commutator defect of the raw partial
isometry, which is measured by probing and reported, never hidden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .errors import (
    BoundaryDivergence,
    DimensionMismatch,
    LsqNoConvergence,
    NoConvergence,
)
from .twisted import DeficiencyData, cauchy_riemann, deficiency_spaces

DENSE_LIMIT = 2400


def _lsqr_solve(A, b, tol, iter_lim=None):
    n = A.shape[0]
    iter_lim = iter_lim or 40 * n
    sol = spla.lsqr(A, b, atol=tol, btol=tol, iter_lim=iter_lim)
    x, istop, itn = sol[0], sol[1], sol[2]
    if istop not in (0, 1, 2, 4, 5):
        raise LsqNoConvergence(f"lsqr stopped with istop={istop} after {itn} iterations")
    return x


def random_unitary(d, seed):
    """Haar-ish unitary d x d factor; seed 0 is the identity matching."""
    if seed == 0 or d == 0:
        return np.eye(d, dtype=complex)
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    Q, R = la.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


@dataclass
class UnitaryExtension:
    """Unitary extension of the twisted partial isometry by a finite-rank
    isometry between the deficiency bases."""

    sigma: float
    j_matrix: np.ndarray
    deficiency: DeficiencyData
    backend: str  # "dense-polar" | "matrix-free"
    unitarity_defect: float
    raw_defect: float
    dense: np.ndarray | None = None
    _dplus: object = None
    _dminus: object = None
    lsq_tol: float = 1e-12
    _phases: np.ndarray | None = field(default=None, repr=False)
    _schur_z: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self):
        return self.deficiency.basis_plus.shape[0]

    def apply(self, u):
        if self.dense is not None:
            return self.dense @ u
        B_p, B_m = self.deficiency.basis_plus, self.deficiency.basis_minus
        c = B_p.conj().T @ u
        w = u - B_p @ c
        v = _lsqr_solve(self._dminus, w, self.lsq_tol)
        return self._dplus @ v + B_m @ (self.j_matrix @ c)

    def apply_inverse(self, u):
        if self.dense is not None:
            return self.dense.conj().T @ u
        B_p, B_m = self.deficiency.basis_plus, self.deficiency.basis_minus
        c = B_m.conj().T @ u
        w = u - B_m @ c
        v = _lsqr_solve(self._dplus, w, self.lsq_tol)
        return self._dminus @ v + B_p @ (self.j_matrix.conj().T @ c)

    def eigenphases(self):
        """Eigenphase decomposition U = Z diag(exp(i phi)) Z^H (dense only)."""
        if self.dense is None:
            raise NoConvergence("eigenphase decomposition requires the dense backend")
        if self._phases is None:
            Tm, Z = la.schur(self.dense, output="complex")
            self._phases = np.angle(np.diag(Tm))
            self._schur_z = Z
        return self._phases, self._schur_z


def apply_partial_isometry(w, sigma, S, T, tol=1e-12, def_data=None, rank_tol=1e-8, seed=0):
    """Raw partial isometry: project w onto Ran(D-), solve D- v = pi(w) by
    minimal-norm least squares, return D+ v.

    Norm preservation is exact (up to the solver tolerance) wherever the
    commutator [S, T] pairing vanishes; the unitary extension's dense backend
    removes the residual defect on non-commuting surfaces.
    """
    if def_data is None:
        def_data = deficiency_spaces(sigma, S, T, rank_tol=rank_tol, seed=seed)
    B_p = def_data.basis_plus
    pw = w - B_p @ (B_p.conj().T @ w)
    dminus = cauchy_riemann(S, T, sigma, "-")
    dplus = cauchy_riemann(S, T, sigma, "+")
    v = _lsqr_solve(dminus, pw, tol)
    return dplus @ v


def extend_unitary(S, T, sigma, j_seed=0, def_data=None, rank_tol=1e-8,
                   dense_limit=DENSE_LIMIT, lsq_tol=1e-12, seed=0, probes=20):
    """Build the unitary extension U of the twisted partial isometry.

    j_seed selects the finite-rank isometry between the fixed orthonormal
    deficiency bases (seed 0: identity matching).  Problems with dimension
    <= dense_limit get the dense polar-factor backend (exactly unitary);
    larger ones get the matrix-free backend with a measured defect.
    """
    n = S.shape[0]
    if def_data is None:
        def_data = deficiency_spaces(sigma, S, T, rank_tol=rank_tol, seed=seed)
    if def_data.d_plus != def_data.d_minus:
        raise DimensionMismatch(
            f"deficiency dimensions differ: d+={def_data.d_plus}, d-={def_data.d_minus}"
        )
    d = def_data.d_plus
    J = random_unitary(d, j_seed)
    dplus = cauchy_riemann(S, T, sigma, "+")
    dminus = cauchy_riemann(S, T, sigma, "-")

    if n <= dense_limit:
        Dm = dminus.toarray()
        P, svals, Vh = la.svd(Dm)
        cutoff = rank_tol * svals[0]
        inv = np.where(svals > cutoff, 1.0 / np.where(svals > cutoff, svals, 1.0), 0.0)
        pinv = (Vh.conj().T * inv) @ P.conj().T
        T0 = dplus @ pinv
        if d:
            T0 = T0 + def_data.basis_minus @ (J @ def_data.basis_plus.conj().T)
        Uu, s0, Vh0 = la.svd(T0)
        raw_defect = float(np.abs(s0 - 1.0).max())
        W = Uu @ Vh0
        ext = UnitaryExtension(
            sigma=sigma, j_matrix=J, deficiency=def_data, backend="dense-polar",
            unitarity_defect=0.0, raw_defect=raw_defect, dense=W, lsq_tol=lsq_tol,
        )
    else:
        ext = UnitaryExtension(
            sigma=sigma, j_matrix=J, deficiency=def_data, backend="matrix-free",
            unitarity_defect=0.0, raw_defect=0.0, _dplus=dplus, _dminus=dminus,
            lsq_tol=lsq_tol,
        )
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for _ in range(probes):
        u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        worst = max(worst, abs(np.linalg.norm(ext.apply(u)) / np.linalg.norm(u) - 1.0))
    ext.unitarity_defect = worst
    if ext.backend == "matrix-free":
        ext.raw_defect = worst
    return ext


def resolvent_apply(U: UnitaryExtension, z, u, tol=1e-10, max_iter=20000):
    """Apply the resolvent (U - z I)^{-1} to u.

    The dense backend solves directly; the matrix-free backend sums the
    geometric resolvent series, whose length is proportional to
    1/dist(z, unit circle).  Near-spectrum failures surface as
    NoConvergence.
    """
    az = abs(z)
    if az == 1.0:
        raise ValueError("resolvent is defined off the unit circle only")
    if U.dense is not None:
        n = U.dense.shape[0]
        return la.solve(U.dense - z * np.eye(n, dtype=complex), u)
    q = az if az < 1.0 else 1.0 / az
    if q > 0:
        needed = int(math.ceil(math.log(max(tol, 1e-300)) / math.log(q))) + 2
    else:
        needed = 1
    if needed > max_iter:
        raise NoConvergence(
            f"resolvent series needs ~{needed} terms at |z|={az:.6f} "
            f"(cap {max_iter}); z is too close to the spectrum"
        )
    norm_u = np.linalg.norm(u)
    if az < 1.0:
        # (U - z)^{-1} = sum_k z^k U^{-(k+1)}
        term = U.apply_inverse(u)
        acc = term.copy()
        for _ in range(needed):
            term = z * U.apply_inverse(term)
            acc += term
            if np.linalg.norm(term) <= tol * norm_u:
                return acc
    else:
        # (U - z)^{-1} = -sum_k U^k / z^{k+1}
        term = -u / z
        acc = term.copy()
        for _ in range(needed):
            term = U.apply(term) / z
            acc += term
            if np.linalg.norm(term) <= tol * norm_u:
                return acc
    raise NoConvergence(f"resolvent series did not reach tol={tol} within {needed} terms")


def resolvent_boundary_value(U: UnitaryExtension, theta_boundary, rho_schedule, u, tol=1e-10,
                             extrapolate=True):
    """Radial boundary values R(-rho e^{i theta_b}) u along a schedule.

    Returns (value, trace) where trace lists (rho, increment norm); raises
    BoundaryDivergence when the increments fail to decrease (the boundary
    point is resonant for this datum).
    """
    point = -np.exp(1j * theta_boundary)
    prev = None
    trace = []
    values = []
    for rho in rho_schedule:
        w = resolvent_apply(U, rho * point, u, tol=tol)
        if prev is not None:
            trace.append((float(rho), float(np.linalg.norm(w - prev))))
        values.append(w)
        prev = w
    incs = [t[1] for t in trace]
    if len(incs) >= 2 and incs[-1] > incs[-2] * 1.5:
        raise BoundaryDivergence(
            f"resolvent boundary values diverge along the schedule: increments {incs[-2:]} "
            f"at theta_b={theta_boundary}"
        )
    w = values[-1]
    if extrapolate and len(values) >= 2:
        # error is ~linear in (1 - rho) for a geometric schedule, so one
        # Richardson step cancels the leading term
        r1, r2 = rho_schedule[-2], rho_schedule[-1]
        f = (1.0 - r2) / ((1.0 - r1) - (1.0 - r2))
        w = values[-1] + f * (values[-1] - values[-2])
    return w, trace


# -- Cauchy integrals of atomic measures --------------------------------------


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite atomic measure on the circle: atoms (t_j, a_j)."""

    atoms: tuple

    def __post_init__(self):
        for t, a in self.atoms:
            complex(a)
            float(t)

    @property
    def total_mass(self):
        return float(sum(abs(a) for _, a in self.atoms))


def cauchy_integral(mu: AtomicMeasure, z):
    """sum_j a_j / (z - e^{i t_j}) for |z| < 1."""
    if abs(z) >= 1.0:
        raise ValueError("cauchy_integral is defined on the open disk")
    return sum(a / (z - np.exp(1j * t)) for t, a in mu.atoms)


def boundary_value(mu: AtomicMeasure, theta):
    """Direct boundary evaluation away from the atoms."""
    z = np.exp(1j * theta)
    return sum(a / (z - np.exp(1j * t)) for t, a in mu.atoms)


def cone_samples(alpha, radial_samples, n_psi=9):
    """Deterministic sample of the nontangential region with vertex at 1.

    Points 1 - d e^{i psi} for d = 2^{-j} over a fixed fan of directions,
    kept when they lie in the cone over D(0, alpha) (membership grows with
    alpha, so sample sets are nested and the maximal function is monotone in
    the aperture); the disk center is always included.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    psis = np.linspace(-np.pi / 2, np.pi / 2, 2 * n_psi + 1)
    pts = [0.0 + 0.0j]
    for j in range(1, radial_samples + 1):
        dist = 2.0 ** (-j)
        for psi in psis:
            s2 = math.sin(psi) ** 2
            if s2 > alpha * alpha:
                continue
            dmax = math.cos(psi) + math.sqrt(alpha * alpha - s2)
            if dist < dmax:
                pts.append(1.0 - dist * np.exp(1j * psi))
    return np.array(pts)


def maximal_function_scan(eval_fn, alpha, theta_grid, radial_samples, n_psi=9):
    """Sampled nontangential maximal function: per theta, the max of |Phi|
    over the rotated cone sample."""
    base = cone_samples(alpha, radial_samples, n_psi)
    out = np.empty(len(theta_grid))
    for idx, theta in enumerate(theta_grid):
        pts = np.exp(1j * theta) * base
        out[idx] = max(abs(eval_fn(z)) for z in pts)
    return out


def weak_type_check(mu: AtomicMeasure, t_grid, theta_grid, atom_clearance=1e-9):
    """Empirical weak-type constant: max over t of
    t * meas{theta : |I*(theta)| > t} / |mu| with normalized measure."""
    atom_angles = np.array([t for t, _ in mu.atoms])
    thetas = np.asarray(theta_grid, dtype=float)
    if atom_angles.size:
        diffs = np.abs(np.exp(1j * thetas[:, None]) - np.exp(1j * atom_angles[None, :]))
        thetas = thetas[diffs.min(axis=1) > atom_clearance]
    vals = np.abs([boundary_value(mu, th) for th in thetas])
    mass = mu.total_mass
    best = 0.0
    for t in t_grid:
        frac = float(np.count_nonzero(vals > t)) / len(vals)
        best = max(best, t * frac / mass)
    return {"constant": best, "n_used": len(thetas)}


def hardy_pnorm(eval_fn, p, r_grid, theta_grid):
    """sup over r of the L^p quasi-norm of Phi on the circle of radius r
    (normalized angular mean)."""
    if not 0 < p < 1:
        raise ValueError("hardy_pnorm covers 0 < p < 1 only")
    best = 0.0
    thetas = np.asarray(theta_grid, dtype=float)
    for r in r_grid:
        vals = np.abs([eval_fn(r * np.exp(1j * th)) for th in thetas])
        best = max(best, float(np.mean(vals**p) ** (1.0 / p)))
    return best
