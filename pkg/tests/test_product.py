import math

import numpy as np
import pytest

from oracles import mode_field, symbol, torus_symbol_value
from twistlab.cohosolve import SolveConfig, solve_lsq
from twistlab.errors import BumpOverlapsSection
from twistlab.grid import Grid, assemble_Q, assemble_S, assemble_T
from twistlab.product import (
    BumpSpec,
    ProductField,
    product_norm,
    product_solve,
    time_tau_check,
    time_tau_setup,
)
from twistlab.spectral import lowest_eigenpairs


@pytest.fixture(scope="module")
def torus9():
    from twistlab import torus

    grid = Grid(torus(), 9)
    S, T = assemble_S(grid), assemble_T(grid)
    return grid, S, T


def zero_modes(grid, n_max):
    return {n: grid.zeros() for n in range(-n_max, n_max + 1)}


def test_product_field_requires_total_modes(torus9):
    grid, _, _ = torus9
    with pytest.raises(ValueError):
        ProductField({0: grid.zeros()}, n_max=1)


def test_product_norm_reduces_to_surface(torus9, rng):
    grid, S, T = torus9
    u = grid.random_field(rng)
    modes = zero_modes(grid, 2)
    modes[0] = u
    F = ProductField(modes, 2)
    from twistlab.spectral import weighted_norm

    assert product_norm(F, 2, 1, S, T, grid) == pytest.approx(
        weighted_norm(u, 2, S, T, grid), rel=1e-12
    )


def test_product_norm_single_mode_weight(torus9):
    grid, S, T = torus9
    Q = assemble_Q(S, T)
    basis = lowest_eigenpairs(Q, 10, 1e-8, grid, seed=3)
    ek = basis.vectors[:, 4]
    lam = basis.eigenvalues[4]
    modes = zero_modes(grid, 1)
    modes[1] = ek
    F = ProductField(modes, 1)
    s = 2.5
    expected = math.sqrt(1 + (2 * math.pi) ** 2) * (1 + lam) ** (s / 2)
    assert product_norm(F, s, 1, S, T, grid, basis) == pytest.approx(expected, rel=1e-9)


def test_product_norm_pythagorean(torus9):
    grid, S, T = torus9
    m = grid.m
    modes = zero_modes(grid, 1)
    modes[0] = mode_field(m, 1, 0)
    modes[1] = mode_field(m, 0, 2)
    F = ProductField(modes, 1)
    total = product_norm(F, 0, 0, S, T, grid)
    n0 = grid.norm(modes[0])
    n1 = grid.norm(modes[1])
    assert total == pytest.approx(math.hypot(n0, n1), rel=1e-12)


def test_product_solve_mode_zero_is_surface_solve(torus9, rng):
    grid, S, T = torus9
    f = mode_field(grid.m, 2, 1)
    modes = zero_modes(grid, 1)
    modes[0] = f
    cfg = SolveConfig(theta=0.9, sigma=0.0, lsq_tol=1e-13, obstruction="mean_only")
    res = product_solve(ProductField(modes, 1), 0.9, 0.37, cfg, grid, S, T)
    direct = solve_lsq(f, S, T, SolveConfig(theta=0.9, sigma=0.0, lsq_tol=1e-13,
                                            obstruction="mean_only"), grid)
    np.testing.assert_allclose(res.solution.modes[0], direct.solution, atol=1e-10)
    assert np.linalg.norm(res.solution.modes[1]) == 0.0


def test_product_solve_single_mode_closed_form(torus9):
    grid, S, T = torus9
    m = grid.m
    theta, c = 0.7, 0.37
    k, l, n = 1, -2, 1
    f = mode_field(m, k, l)
    modes = zero_modes(grid, 1)
    modes[n] = f
    cfg = SolveConfig(theta=theta, sigma=0.0, lsq_tol=1e-13, obstruction="mean_only")
    res = product_solve(ProductField(modes, 1), theta, c, cfg, grid, S, T)
    assert res.convention == "cos_scaled"
    denom = torus_symbol_value(m, k, l, theta, 2 * np.pi * c * n, cos_scaled=True)
    np.testing.assert_allclose(res.solution.modes[n], f / denom, atol=1e-9)


def test_product_solve_c_zero_untwisted(torus9):
    grid, S, T = torus9
    m = grid.m
    f = mode_field(m, 1, 1)
    modes = zero_modes(grid, 1)
    modes[1] = f
    cfg = SolveConfig(theta=0.4, sigma=0.0, lsq_tol=1e-13, obstruction="mean_only")
    res = product_solve(ProductField(modes, 1), 0.4, 0.0, cfg, grid, S, T)
    denom = torus_symbol_value(m, 1, 1, 0.4, 0.0)
    np.testing.assert_allclose(res.solution.modes[1], f / denom, atol=1e-9)


def test_product_solve_constant_data_per_mode(torus9):
    grid, S, T = torus9
    theta, c = 0.83, 0.37
    n_max = 3
    modes = {n: (1.0 + 0.5j) * grid.ones() for n in range(-n_max, n_max + 1)}
    modes[0] = grid.zeros()  # untwisted mode has no constant solution
    cfg = SolveConfig(theta=theta, sigma=0.0, lsq_tol=1e-13, obstruction="mean_only")
    res = product_solve(ProductField(modes, n_max), theta, c, cfg, grid, S, T)
    for n in range(-n_max, n_max + 1):
        if n == 0:
            continue
        sigma_n = 2 * np.pi * c * n * math.cos(theta)
        np.testing.assert_allclose(
            res.solution.modes[n], -1j * modes[n] / sigma_n, atol=1e-8
        )


def test_product_solve_conjugation_symmetry(torus9, rng):
    grid, S, T = torus9
    m = grid.m
    n_max = 2
    modes = zero_modes(grid, n_max)
    for n in range(1, n_max + 1):
        fn = np.zeros(m * m, complex)
        for _ in range(3):
            k, l = int(rng.integers(-3, 4)), int(rng.integers(-3, 4))
            fn += (rng.standard_normal() + 1j * rng.standard_normal()) * mode_field(m, k, l)
        modes[n] = fn
        modes[-n] = np.conj(fn)
    modes[0] = np.real(modes[1]) + 0.0j
    cfg = SolveConfig(theta=0.77, sigma=0.0, lsq_tol=1e-13, obstruction="mean_only")
    res = product_solve(ProductField(modes, n_max), 0.77, 0.29, cfg, grid, S, T)
    for n in range(1, n_max + 1):
        np.testing.assert_allclose(
            res.solution.modes[-n], np.conj(res.solution.modes[n]), atol=1e-9
        )


def test_bump_unit_integral():
    bump = BumpSpec(center=0.4, width=0.3)
    # independent check: trapezoid on a fine periodic grid
    phis = np.linspace(0.0, 1.0, 1 << 14, endpoint=False)
    integral = float(np.mean(bump(phis)))
    assert integral == pytest.approx(1.0, abs=1e-10)


def test_bump_overlap_detection():
    bump = BumpSpec(center=0.1, width=0.3)
    with pytest.raises(BumpOverlapsSection):
        bump.supported_interval(0.0)
    lo, hi = bump.supported_interval(0.6)
    assert 0 < lo < hi < 1


def test_bump_fourier_decay():
    # the transform oscillates through near-zeros, so compare block envelopes
    bump = BumpSpec(center=0.5, width=0.25)
    blocks = [(1, 8), (9, 24), (25, 72), (73, 160)]
    envelopes = [
        max(abs(bump.fourier_coefficient(n)) for n in range(lo, hi + 1, 2)) for lo, hi in blocks
    ]
    assert all(b < a for a, b in zip(envelopes, envelopes[1:]))
    assert envelopes[-1] < 2e-4


def test_time_tau_setup_zero_data(torus9):
    grid, _, _ = torus9
    setup = time_tau_setup(grid.zeros(), 0.83, 0.37, BumpSpec(0.5, 0.25), 4, grid)
    assert all(np.linalg.norm(fn) == 0.0 for fn in setup.field.modes.values())
    assert setup.normalization == pytest.approx(1.0, abs=1e-10)


def test_time_tau_mode_decay_measured(torus9):
    grid, _, _ = torus9
    f = mode_field(grid.m, 1, 0)
    n_max = 16
    setup = time_tau_setup(f, 0.83, 0.37, BumpSpec(0.5, 0.25), n_max, grid)
    c4 = max(setup.mode_norms[n] * n**4 for n in range(1, n_max + 1))
    assert c4 < 1e4
    assert setup.mode_norms[n_max] < setup.mode_norms[1]


def test_time_tau_section_restriction(torus9, rng):
    grid, _, _ = torus9
    u1 = grid.random_field(rng)
    modes = zero_modes(grid, 2)
    modes[2] = u1
    F = ProductField(modes, 2)
    phi0 = 0.3
    np.testing.assert_allclose(F.section(phi0), u1 * np.exp(4j * np.pi * phi0), rtol=1e-12)


def test_time_tau_zero_residual_for_zero_data(torus9):
    grid, _, _ = torus9
    n_max = 2
    F = ProductField(zero_modes(grid, n_max), n_max)
    res = time_tau_check(F, grid.zeros(), 0.83, 0.37, grid, [(0, 0.3, 0.4)])
    assert res == 0.0


def test_time_tau_end_to_end_small(torus9):
    grid, S, T = torus9
    theta, c = 1.446, 0.37
    f = mode_field(grid.m, 1, 0)
    setup = time_tau_setup(f, theta, c, BumpSpec(0.5, 0.25), 8, grid)
    assert setup.normalization == pytest.approx(1.0, abs=1e-10)
    cfg = SolveConfig(theta=theta, sigma=0.0, obstruction="mean_only", lsq_tol=1e-13)
    res = product_solve(setup.field, theta, c, cfg, grid, S, T, drop_cos=True)
    assert res.convention == "raw"
    assert not res.defects
    pts = [(0, 0.21, 0.33), (0, 0.61, 0.79)]
    residual = time_tau_check(res.solution, f, theta, c, grid, pts)
    assert residual < 0.05
