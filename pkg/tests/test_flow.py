import math
from fractions import Fraction as Fr

import numpy as np
import pytest

from oracles import mode_field, oracle_solve, symbol
from twistlab.errors import SingularHit
from twistlab.flow import (
    eval_field,
    flow_polyline,
    flow_trajectory,
    integrate_along_flow,
    resolve_cell,
    transported_samples,
    twisted_birkhoff_check,
)
from twistlab.grid import Grid


def test_horizontal_period_on_torus(torus_o):
    _, end = flow_trajectory(torus_o, (0, 0.25, 0.5), 0.0, 1.0)
    assert end[0] == 0
    assert end[1] == pytest.approx(0.25, abs=1e-14)
    assert end[2] == pytest.approx(0.5, abs=1e-14)


def test_diagonal_period_on_torus(torus_o):
    _, end = flow_trajectory(torus_o, (0, 0.25, 0.5), math.pi / 4, math.sqrt(2.0))
    assert end[1] == pytest.approx(0.25, abs=1e-12)
    assert end[2] == pytest.approx(0.5, abs=1e-12)


def test_diagonal_through_regular_vertex_torus(torus_o):
    # exact corner hit on the torus passes straight through (vertex order 0)
    start = (0, Fr(1, 2), Fr(1, 2))
    segs, end = flow_polyline(torus_o, start, (Fr(1), Fr(1)), Fr(1))
    assert end == start


def test_rational_closed_trajectory_l_shaped(l_o):
    start = (0, Fr(1, 7), Fr(1, 11))
    segs, end = flow_polyline(l_o, start, (Fr(2), Fr(1)), Fr(1))
    assert end == start
    assert len(segs) == 4
    # horizontal cylinder through squares 0, 1 has circumference 2
    start = (0, Fr(1, 3), Fr(1, 5))
    _, end = flow_polyline(l_o, start, (Fr(1), Fr(0)), Fr(2))
    assert end == start


def test_cone_point_hit_raises(l_o):
    start = (0, Fr(1, 2), Fr(1, 2))
    with pytest.raises(SingularHit):
        flow_polyline(l_o, start, (Fr(1), Fr(1)), Fr(2))


def test_segment_times_are_consistent(l_o):
    segs, _ = flow_trajectory(l_o, (0, 0.31, 0.17), 0.4, 3.0)
    assert segs[0].t0 == 0.0
    assert segs[-1].t1 == pytest.approx(3.0)
    for a, b in zip(segs, segs[1:]):
        assert a.t1 == pytest.approx(b.t0)


def test_resolve_cell_round_trip(l_o):
    m = 5
    s, i, j = resolve_cell(l_o, m, 0, -1, 2)
    assert (s, i, j) == (l_o.perm_right_inv[0], 4, 2)
    s, i, j = resolve_cell(l_o, m, 0, 5, 2)
    assert (s, i, j) == (l_o.perm_right[0], 0, 2)


def test_eval_field_reproduces_bilinear(torus_o):
    grid = Grid(torus_o, 9)
    field = grid.sample(lambda s, x, y: 2.0 * x + 3.0 * y + 0.5)
    # interior points away from the wrap: bilinear interp of an affine
    # function is exact
    for x, y in [(0.3, 0.4), (0.51, 0.62), (0.25, 0.75)]:
        assert eval_field(grid, field, 0, x, y) == pytest.approx(2 * x + 3 * y + 0.5, rel=1e-12)


def test_eval_field_smooth_convergence(torus_o):
    rng = np.random.default_rng(3)
    pts = [(float(x), float(y)) for x, y in rng.uniform(0.02, 0.98, size=(20, 2))]
    errs = []
    for m in (9, 27, 81):
        grid = Grid(torus_o, m)
        field = grid.sample(lambda s, x, y: np.exp(2j * np.pi * (x + y)))
        err = np.mean(
            [abs(eval_field(grid, field, 0, x, y) - np.exp(2j * np.pi * (x + y))) for x, y in pts]
        )
        errs.append(err)
    orders = [np.log(errs[i] / errs[i + 1]) / np.log(3.0) for i in range(2)]
    assert min(orders) > 1.8


def test_transported_samples_torus_matches_pointwise(torus_o):
    grid = Grid(torus_o, 9)
    rng = np.random.default_rng(5)
    field = grid.random_field(rng)
    t, direction = 0.37, (math.cos(0.9), math.sin(0.9))
    fast = transported_samples(grid, field, direction, t)
    for idx in [0, 7, 40, 80]:
        s, i, j = grid.cell(idx)
        x, y = grid.cell_center(s, i, j)
        _, end = flow_polyline(torus_o, (s, x, y), (-direction[0], -direction[1]), t)
        assert fast[idx] == pytest.approx(eval_field(grid, field, *end), rel=1e-12)


def test_transported_samples_generic_path(l_o):
    grid = Grid(l_o, 5)
    field = grid.sample(lambda s, x, y: s + 1.0)
    out = transported_samples(grid, field, (1.0, 0.0), 0.0)
    np.testing.assert_allclose(out, field)


def test_integrate_along_flow_constant(l_o):
    total, _ = integrate_along_flow(l_o, 5, (0, 0.21, 0.34), 0.7, 2.5, lambda s, x, y, t: 1.0)
    assert total == pytest.approx(2.5, rel=1e-12)
    total, _ = integrate_along_flow(
        l_o, 5, (0, 0.21, 0.34), 0.7, 2.5, lambda s, x, y, t: np.exp(1j * t)
    )
    assert total == pytest.approx((np.exp(2.5j) - 1.0) / 1j, rel=1e-10)


def test_birkhoff_zero_data(l_o):
    grid = Grid(l_o, 9)
    z = grid.zeros()
    assert twisted_birkhoff_check(grid, z, z, 1.0, 0.3, (0, 0.4, 0.2), 2.0) == 0.0


def test_birkhoff_residual_refinement_order(torus_o):
    theta, sigma = 0.7, 1.0
    k, l = 1, 2
    x0 = (0, 0.32, 0.41)
    T = 2.3
    residuals = []
    for m in (9, 27, 81):
        grid = Grid(torus_o, m)
        f = mode_field(m, k, l)
        denom = 1j * (symbol(m, k) * math.cos(theta) + symbol(m, l) * math.sin(theta) + sigma)
        u = f / denom
        residuals.append(twisted_birkhoff_check(grid, u, f, sigma, theta, x0, T, quad_n=32))
    orders = [np.log(residuals[i] / residuals[i + 1]) / np.log(3.0) for i in range(2)]
    assert min(orders) >= 1.5


def test_birkhoff_grid_constructed_rhs(l_o, rng):
    # sigma=0, f = S_theta u for a smooth grid field: residual bounded by
    # interpolation + quadrature error
    from twistlab.grid import assemble_S, assemble_T

    grid = Grid(l_o, 27)
    S, T = assemble_S(grid), assemble_T(grid)
    theta = 0.3
    u = grid.sample(lambda s, x, y: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y) + s)
    f = math.cos(theta) * (S @ u) + math.sin(theta) * (T @ u)
    res = twisted_birkhoff_check(grid, u, f, 0.0, theta, (0, 0.21, 0.43), 1.7)
    assert res < 5e-2
