import numpy as np
import pytest

from oracles import mode_field, symbol
from twistlab.errors import EvenGridSize
from twistlab.grid import (
    Grid,
    GridSpec,
    assemble_Q,
    assemble_S,
    assemble_T,
    commutator_report,
    export_coo,
    import_coo,
    neighbor,
    q_kernel_guard,
)


def test_even_m_rejected(torus_o):
    with pytest.raises(EvenGridSize):
        GridSpec(8)


def test_neighbor_wrap_on_torus(torus_o):
    g = GridSpec(3)
    assert neighbor(torus_o, g, (0, 2, 1), "right") == (0, 0, 1)


def test_neighbor_crosses_gluing(l_o):
    g = GridSpec(3)
    assert neighbor(l_o, g, (0, 2, 1), "right") == (1, 0, 1)
    assert neighbor(l_o, g, (0, 1, 2), "up") == (2, 1, 0)


def test_neighbor_inverse_identity(l_o, rng):
    g = GridSpec(5)
    pairs = [("right", "left"), ("left", "right"), ("up", "down"), ("down", "up")]
    for _ in range(50):
        cell = (int(rng.integers(3)), int(rng.integers(5)), int(rng.integers(5)))
        for d, dinv in pairs:
            assert neighbor(l_o, g, neighbor(l_o, g, cell, d), dinv) == cell


def test_index_cell_roundtrip(l_o):
    grid = Grid(l_o, 5)
    for idx in range(grid.n_dofs):
        s, i, j = grid.cell(idx)
        assert grid.index(s, i, j) == idx


def test_skew_symmetry_exact(l_o, stair6_o, torus_o):
    for o in (torus_o, l_o, stair6_o):
        grid = Grid(o, 5)
        S, T = assemble_S(grid), assemble_T(grid)
        assert (S + S.T).nnz == 0
        assert (T + T.T).nnz == 0


def test_constants_in_kernel(stair6_o):
    grid = Grid(stair6_o, 5)
    one = grid.ones()
    assert np.abs(assemble_S(grid) @ one).max() == 0.0
    assert np.abs(assemble_T(grid) @ one).max() == 0.0


@pytest.mark.parametrize("m", [3, 5, 9])
def test_torus_S_diagonal_on_modes(torus_o, m):
    grid = Grid(torus_o, m)
    S, T = assemble_S(grid), assemble_T(grid)
    for k in range(-(m // 2), m // 2 + 1):
        for l in (-1, 0, 2):
            e = mode_field(m, k, l)
            np.testing.assert_allclose(S @ e, 1j * symbol(m, k) * e, atol=1e-10 * m)
            np.testing.assert_allclose(T @ e, 1j * symbol(m, l) * e, atol=1e-10 * m)


def test_torus_shift_operators_commute(torus_ops_9):
    _, S, T, _ = torus_ops_9
    assert abs(S @ T - T @ S).max() == 0.0


def test_q_form_properties(l_ops_9, rng):
    grid, S, T, Q = l_ops_9
    u = grid.random_field(rng)
    qval = grid.inner(Q @ u, u).real
    direct = grid.norm(S @ u) ** 2 + grid.norm(T @ u) ** 2
    assert qval == pytest.approx(direct, rel=1e-12)
    assert qval >= 0
    c = grid.ones() * (2.0 - 1.5j)
    assert abs(grid.inner(Q @ c, c)) < 1e-12


def test_q_eigenvalues_on_torus_modes(torus_ops_9):
    grid, S, T, Q = torus_ops_9
    m = grid.m
    for k, l in [(0, 0), (1, 0), (2, 3), (-4, 1)]:
        e = mode_field(m, k, l)
        lam = symbol(m, k) ** 2 + symbol(m, l) ** 2
        np.testing.assert_allclose(Q @ e, lam * e, atol=1e-8 * max(lam, 1))


def test_commutator_report_torus(torus_ops_9, torus_o):
    grid, S, T, _ = torus_ops_9
    rep = commutator_report(S, T, torus_o, grid.spec)
    assert rep["norm"] == 0.0
    assert rep["support"] == []
    assert rep["within_predicted"]


def test_commutator_report_l_shaped(l_ops_9, l_o, rng):
    grid, S, T, _ = l_ops_9
    rep = commutator_report(S, T, l_o, grid.spec)
    assert rep["norm"] > 0
    assert rep["within_predicted"]
    support = set(grid.index(s, i, j) for s, i, j in rep["support"])
    # fields supported away from the commutator support are annihilated
    u = grid.random_field(rng)
    cols = np.unique(rep["matrix"].tocoo().col)
    u[list(support | set(int(c) for c in cols))] = 0.0
    assert np.linalg.norm(rep["matrix"] @ u) == 0.0


def test_refinement_order_of_S(torus_o):
    errs = []
    for m in (9, 27, 81):
        grid = Grid(torus_o, m)
        S = assemble_S(grid)
        u = grid.sample(lambda s, x, y: np.exp(2j * np.pi * (x + 2 * y)))
        du = grid.sample(lambda s, x, y: 2j * np.pi * np.exp(2j * np.pi * (x + 2 * y)))
        errs.append(np.abs(S @ u - du).max())
    orders = [np.log(errs[i] / errs[i + 1]) / np.log(3.0) for i in range(2)]
    assert min(orders) >= 1.9


def test_inner_product_normalization(l_o):
    grid = Grid(l_o, 9)
    one = grid.ones()
    assert grid.inner(one, one).real == pytest.approx(l_o.area)
    assert grid.norm(one) == pytest.approx(np.sqrt(l_o.area))


def test_coo_roundtrip(tmp_path, torus_ops_9):
    _, S, _, _ = torus_ops_9
    path = tmp_path / "s.coo"
    export_coo(S, path)
    S2 = import_coo(path)
    assert abs(S - S2).max() == 0.0


def test_q_kernel_guard(l_ops_9):
    _, _, _, Q = l_ops_9
    dim, vals = q_kernel_guard(Q)
    assert dim == 1


def test_q_kernel_guard_detects_alternating_mode():
    # a horizontal two-square cover has an even shift orbit, so the
    # checkerboard-in-x field survives the central difference exactly
    from twistlab import build_origami

    cover = build_origami(2, (1, 0), (0, 1))
    grid = Grid(cover, 5)
    Q = assemble_Q(assemble_S(grid), assemble_T(grid))
    dim, _ = q_kernel_guard(Q)
    assert dim == 2
