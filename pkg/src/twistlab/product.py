"""Product flow on (surface x circle) by circle-mode reduction, and the
time-tau coboundary construction.

The circle has circumference 1 and characters e^{2 pi i n phi}, so the mode
equations read (cos(theta) S + sin(theta) T + 2 pi i c n cos(theta)) u_n = f_n
in the default convention; a flag drops the cos(theta) factor (the
product-field convention), and every result records which convention
produced it.

The time-tau construction transports a surface function along the flow
through a smooth bump in time, solves the product equation mode by mode in
the dropped-cos convention (whose section return map is the translation by
(cos theta, sin theta)/c), and checks the coboundary identity on the
section.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .cohosolve import SolveConfig, solve_lsq, _sobolev_norm
from .errors import BumpOverlapsSection, TwistlabError
from .flow import eval_field, flow_polyline, transported_samples
from .grid import Grid
from .spectral import EigenBasis


@dataclass
class ProductField:
    """Fourier coefficients (in the circle variable) of a field on the
    product; mode map is total on -n_max..n_max."""

    modes: dict
    n_max: int

    def __post_init__(self):
        for n in range(-self.n_max, self.n_max + 1):
            if n not in self.modes:
                raise ValueError(f"mode {n} missing from ProductField")

    def section(self, phi0):
        """Restriction to the section phi = phi0: sum_n f_n e^{2 pi i n phi0}."""
        out = np.zeros_like(self.modes[0])
        for n, f_n in self.modes.items():
            out = out + f_n * np.exp(2j * np.pi * n * phi0)
        return out


def product_norm(F: ProductField, s, nu, S, T, grid: Grid, basis: EigenBasis | None = None):
    """Anisotropic Sobolev norm: (sum_n sum_{l<=nu} (2 pi n)^{2l} |f_n|_s^2)^(1/2)."""
    if s < 0 or nu < 0:
        raise ValueError("product_norm needs s >= 0 and nu >= 0")
    total = 0.0
    for n, f_n in F.modes.items():
        weight = sum((2.0 * np.pi * n) ** (2 * el) for el in range(nu + 1))
        norm_n = _sobolev_norm(f_n, s, S, T, grid, basis)
        total += weight * norm_n**2
    return float(np.sqrt(total))


@dataclass
class ProductSolveResult:
    solution: ProductField
    reports: dict
    defects: list
    convention: str


def product_solve(F: ProductField, theta, c, cfg: SolveConfig, grid: Grid, S, T,
                  basis: EigenBasis | None = None, drop_cos=False):
    """Solve the product-flow equation mode by mode: twist 2*pi*c*n, applied
    in the cos_scaled convention by default or raw when drop_cos is set.

    Per-mode failures are collected into the defect list; the returned
    solution has zeros for failed modes so partial results stay usable.
    """
    mode = "raw" if drop_cos else "cos_scaled"
    reports = {}
    defects = []
    out = {}
    for n in range(-F.n_max, F.n_max + 1):
        sub = replace(cfg, theta=theta, sigma=2.0 * np.pi * c * n, twist_mode=mode)
        try:
            rep = solve_lsq(F.modes[n], S, T, sub, grid, basis=basis)
            reports[n] = rep
            out[n] = rep.solution
        except TwistlabError as exc:
            defects.append((n, f"{type(exc).__name__}: {exc}"))
            out[n] = np.zeros_like(F.modes[n])
    return ProductSolveResult(
        solution=ProductField(out, F.n_max),
        reports=reports,
        defects=defects,
        convention=mode,
    )


# -- smooth bump on the circle -------------------------------------------------


@dataclass(frozen=True)
class BumpSpec:
    """C-infinity bump on the circle (circumference 1), unit integral,
    supported on [center - width/2, center + width/2]."""

    center: float
    width: float

    def __post_init__(self):
        if not 0 < self.width < 1:
            raise ValueError("bump width must be in (0, 1)")

    def _raw(self, x):
        # exp(-1/(1-x^2)) on (-1, 1), zero outside
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = np.abs(x) < 1.0
        xi = x[inside]
        out[inside] = np.exp(-1.0 / (1.0 - xi * xi))
        return out

    @property
    def _amplitude(self):
        # unit integral over the circle; the half-width scaling is absorbed
        nodes, weights = np.polynomial.legendre.leggauss(400)
        raw = float(np.sum(weights * self._raw(nodes))) * (self.width / 2.0)
        return 1.0 / raw

    def __call__(self, phi):
        delta = (np.asarray(phi, dtype=float) - self.center + 0.5) % 1.0 - 0.5
        return self._amplitude * self._raw(2.0 * delta / self.width)

    def supported_interval(self, phi0):
        """Support as a t-interval of the time parametrization
        phi = phi0 + c t (before dividing by c); raises when phi0 lies in
        the support."""
        delta = (self.center - phi0) % 1.0
        lo, hi = delta - self.width / 2.0, delta + self.width / 2.0
        if lo <= 0.0 or hi >= 1.0:
            raise BumpOverlapsSection(
                f"bump support [{self.center - self.width / 2}, "
                f"{self.center + self.width / 2}] contains the section point {phi0}"
            )
        return lo, hi

    def fourier_coefficient(self, n, quad_n=800):
        """hat(chi)(n) = int_0^1 chi(phi) e^{-2 pi i n phi} dphi by quadrature."""
        nodes, weights = np.polynomial.legendre.leggauss(quad_n)
        half = self.width / 2.0
        phis = self.center + half * nodes
        vals = self(phis) * np.exp(-2j * np.pi * n * phis)
        return complex(np.sum(weights * vals) * half)


@dataclass
class TimeTauSetup:
    field: ProductField
    normalization: float  # int_0^{1/c} of the transported time profile
    mode_norms: dict
    theta: float
    c: float
    phi0: float
    bump: BumpSpec


def time_tau_setup(f, theta, c, bump: BumpSpec, n_max, grid: Grid, phi0=0.0, quad_n=None):
    """Build the product field F with F(flow^t(x, phi0)) = f(x) chi_time(t),
    where chi_time(t) = c * chi(phi0 + c t) has unit time integral across
    one circuit.

    Mode n coefficient: c e^{-2 pi i n phi0} *
    int chi_time(t) f(. - t (cos theta, sin theta)) e^{-2 pi i n c t} dt,
    evaluated by Gauss-Legendre quadrature with the backward transport of f
    computed by bilinear interpolation along exact trajectories.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    lo, hi = bump.supported_interval(phi0)
    t_lo, t_hi = lo / c, hi / c
    if quad_n is None:
        quad_n = max(96, int(24 * n_max * bump.width) + 32)
    nodes, weights = np.polynomial.legendre.leggauss(quad_n)
    mid, half = 0.5 * (t_lo + t_hi), 0.5 * (t_hi - t_lo)
    ts = mid + half * nodes
    ws = weights * half
    chi_vals = c * bump(phi0 + c * ts)
    normalization = float(np.sum(ws * chi_vals))
    direction = (math.cos(theta), math.sin(theta))
    stack = np.empty((quad_n, grid.n_dofs), dtype=complex)
    for q, t in enumerate(ts):
        stack[q] = transported_samples(grid, f, direction, float(t))
    modes = {}
    mode_norms = {}
    for n in range(-n_max, n_max + 1):
        phase = np.exp(-2j * np.pi * n * (phi0 + c * ts))
        f_n = c * ((ws * chi_vals * phase) @ stack)  # c from dphi = c dt
        modes[n] = f_n
        mode_norms[n] = grid.norm(f_n)
    return TimeTauSetup(
        field=ProductField(modes, n_max),
        normalization=normalization,
        mode_norms=mode_norms,
        theta=theta,
        c=c,
        phi0=phi0,
        bump=bump,
    )


def time_tau_check(u_product: ProductField, f, theta, c, grid: Grid, sample_points,
                   phi0=0.0):
    """Residual of the section coboundary identity:
    max over samples of |u(flow^{1/c} x) - u(x) - f(x)| with u the section
    restriction of the product solution and the flow the exact translation
    by (cos theta, sin theta)/c."""
    u_sec = u_product.section(phi0)
    direction = (math.cos(theta), math.sin(theta))
    worst = 0.0
    for s, x, y in sample_points:
        _, end = flow_polyline(grid.origami, (s, x, y), direction, 1.0 / c)
        val = (
            eval_field(grid, u_sec, end[0], end[1], end[2])
            - eval_field(grid, u_sec, s, x, y)
            - eval_field(grid, f, s, x, y)
        )
        worst = max(worst, abs(val))
    return worst
