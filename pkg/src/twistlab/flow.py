"""Exact straight-line flow on an origami, field interpolation, and
quadrature along trajectories.

The tracer does exact arithmetic in whatever number type the inputs carry:
floats for numerics, fractions.Fraction for combinatorial return checks.
Edge crossings follow the gluing permutations; hitting a vertex exactly is
resolved diagonally when the vertex is regular and raises SingularHit at a
cone point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import SingularHit
from .grid import Grid
from .origami import BL, BR, TL, TR, Origami, corner_rotation, corner_vertex_orders


@dataclass(frozen=True)
class Segment:
    """One straight piece of a trajectory inside a single square."""

    square: int
    start: tuple
    end: tuple
    t0: float
    t1: float


def _corner_for(dx_pos, dy_pos):
    if dx_pos and dy_pos:
        return TR
    if dx_pos:
        return BR
    if dy_pos:
        return TL
    return BL


_DIAGONAL_ENTRY = {TR: (0, 0), BR: (0, 1), TL: (1, 0), BL: (1, 1)}


def flow_polyline(o: Origami, start, direction, total_time, max_segments=None):
    """Trace the flow of x' = direction from start=(s, x, y) for the given
    parameter time.  Returns (segments, end_position).

    All arithmetic stays in the input number types; pass Fractions for exact
    combinatorial return verification.  Cone-point hits raise SingularHit.
    """
    dx, dy = direction
    if dx == 0 and dy == 0:
        raise ValueError("direction must be nonzero")
    s, x, y = start
    orders = corner_vertex_orders(o)
    rot = corner_rotation(o)
    t = total_time * 0  # zero in the caller's number type
    segments = []
    if max_segments is None:
        speed = abs(float(dx)) + abs(float(dy))
        max_segments = int(4 + 3 * speed * float(total_time)) + 16
    for _ in range(max_segments):
        remaining = total_time - t
        if dx > 0:
            tx = (1 - x) / dx
        elif dx < 0:
            tx = x / (-dx)
        else:
            tx = None
        if dy > 0:
            ty = (1 - y) / dy
        elif dy < 0:
            ty = y / (-dy)
        else:
            ty = None
        t_exit = min(v for v in (tx, ty) if v is not None)
        if remaining <= t_exit:
            end = (x + remaining * dx, y + remaining * dy)
            segments.append(Segment(s, (x, y), end, t, total_time))
            return segments, (s, end[0], end[1])
        nx, ny = x + t_exit * dx, y + t_exit * dy
        segments.append(Segment(s, (x, y), (nx, ny), t, t + t_exit))
        t = t + t_exit
        hit_x = tx is not None and tx == t_exit
        hit_y = ty is not None and ty == t_exit
        if hit_x and hit_y:
            corner = _corner_for(dx > 0, dy > 0)
            if orders[s, corner] > 0:
                raise SingularHit(
                    f"trajectory hit the cone point at corner {corner} of square {s} "
                    f"at time {float(t)}"
                )
            code = rot[rot[4 * s + corner]]
            s = int(code // 4)
            ex, ey = _DIAGONAL_ENTRY[corner]
            x, y = x * 0 + ex, y * 0 + ey
        elif hit_x:
            s = o.perm_right[s] if dx > 0 else o.perm_right_inv[s]
            x = x * 0 + (0 if dx > 0 else 1)
            y = ny
        else:
            s = o.perm_up[s] if dy > 0 else o.perm_up_inv[s]
            y = y * 0 + (0 if dy > 0 else 1)
            x = nx
    raise RuntimeError(f"trajectory exceeded {max_segments} segments; tracer stuck?")


def flow_trajectory(o: Origami, x0, theta, length):
    """Unit-speed straight-line flow in direction (cos theta, sin theta)."""
    return flow_polyline(o, x0, (math.cos(theta), math.sin(theta)), length)


# -- field evaluation ----------------------------------------------------------


def resolve_cell(o: Origami, m, s, i, j):
    """Resolve a possibly out-of-range stencil cell through the gluings.

    The horizontal excess is resolved first, then the vertical one; at
    non-commuting corners this order is the documented convention.
    """
    while i < 0:
        s = o.perm_right_inv[s]
        i += m
    while i >= m:
        s = o.perm_right[s]
        i -= m
    while j < 0:
        s = o.perm_up_inv[s]
        j += m
    while j >= m:
        s = o.perm_up[s]
        j -= m
    return s, i, j


def eval_field(grid: Grid, field, s, x, y):
    """Bilinear interpolation of a grid field at (x, y) inside square s.

    Stencil cells that fall outside the square are fetched across the
    gluings, so evaluation is seamless across edges.
    """
    m = grid.m
    o = grid.origami
    fi = x * m - 0.5
    fj = y * m - 0.5
    i0 = math.floor(fi)
    j0 = math.floor(fj)
    tx = fi - i0
    ty = fj - j0
    total = 0.0 + 0.0j
    for di, wx in ((0, 1.0 - tx), (1, tx)):
        for dj, wy in ((0, 1.0 - ty), (1, ty)):
            w = wx * wy
            if w == 0.0:
                continue
            cs, ci, cj = resolve_cell(o, m, s, i0 + di, j0 + dj)
            total += w * field[grid.index(cs, ci, cj)]
    return total


def transported_samples(grid: Grid, field, direction, t):
    """Samples of field(flow^{-t}(cell center)) on every cell: the pullback
    of the field by the time-t flow, evaluated by bilinear interpolation.

    On the one-square torus the backward images of all cell centers share a
    single fractional offset, so the pullback is a weighted combination of
    four rolled copies of the array; general surfaces trace per cell.
    """
    dx, dy = direction
    m = grid.m
    if grid.origami.n_squares == 1:
        a = np.asarray(field, dtype=complex).reshape(m, m)  # a[j, i]
        sx = (-t * dx) * m
        sy = (-t * dy) * m
        ix, fx = divmod(sx, 1.0)
        iy, fy = divmod(sy, 1.0)
        base = np.roll(a, (-int(iy), -int(ix)), axis=(0, 1))
        nxt_x = np.roll(base, -1, axis=1)
        nxt_y = np.roll(base, -1, axis=0)
        nxt_xy = np.roll(nxt_x, -1, axis=0)
        out = (
            (1 - fx) * (1 - fy) * base
            + fx * (1 - fy) * nxt_x
            + (1 - fx) * fy * nxt_y
            + fx * fy * nxt_xy
        )
        return out.reshape(-1)
    out = np.empty(grid.n_dofs, dtype=complex)
    for idx in range(grid.n_dofs):
        s, i, j = grid.cell(idx)
        x, y = grid.cell_center(s, i, j)
        _, end = flow_polyline(grid.origami, (s, x, y), (-dx, -dy), t)
        out[idx] = eval_field(grid, field, *end)
    return out


# -- quadrature along trajectories --------------------------------------------


@lru_cache(maxsize=32)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def _split_at_grid_lines(seg: Segment, direction, m):
    """Panel breakpoints of a segment at the cell-boundary crossings, so the
    integrand is smooth on every panel (bilinear fields kink at cell edges)."""
    dx, dy = direction
    times = {seg.t0, seg.t1}
    for comp, d0, vel in ((0, seg.start[0], dx), (1, seg.start[1], dy)):
        if vel == 0:
            continue
        lo = min(d0, d0 + (seg.t1 - seg.t0) * vel)
        hi = max(d0, d0 + (seg.t1 - seg.t0) * vel)
        k0 = math.ceil(lo * m)
        k1 = math.floor(hi * m)
        for k in range(k0, k1 + 1):
            tc = seg.t0 + (k / m - d0) / vel
            if seg.t0 < tc < seg.t1:
                times.add(tc)
    return sorted(times)


def integrate_along_flow(o: Origami, m, x0, theta, total_time, integrand, quad_n=32):
    """Composite Gauss-Legendre integral of integrand(square, x, y, t) along
    the unit-speed trajectory in direction theta.

    Panels are aligned to the cell-boundary crossings, so bilinear fields
    (which kink across cell edges) are smooth on every panel; returns the
    integral and the end position.
    """
    direction = (math.cos(theta), math.sin(theta))
    segments, end = flow_polyline(o, x0, direction, total_time)
    total = 0.0 + 0.0j
    for seg in segments:
        ts = _split_at_grid_lines(seg, direction, m)
        for a, b in zip(ts[:-1], ts[1:]):
            length = b - a
            if length <= 0:
                continue
            n = max(3, min(16, int(math.ceil(quad_n * length)) + 2))
            nodes, weights = _leggauss(n)
            mid = 0.5 * (a + b)
            half = 0.5 * length
            for node, w in zip(nodes, weights):
                t = mid + half * node
                x = seg.start[0] + (t - seg.t0) * direction[0]
                y = seg.start[1] + (t - seg.t0) * direction[1]
                total += w * half * integrand(seg.square, x, y, t)
    return total, end


def twisted_birkhoff_check(grid: Grid, u, f, twist, theta, x0, time_span, quad_n=32):
    """Residual of the flow-line identity
    e^{i twist T} u(flow^T x0) - u(x0) - int_0^T e^{i twist t} f(flow^t x0) dt."""

    def integrand(s, x, y, t):
        return np.exp(1j * twist * t) * eval_field(grid, f, s, x, y)

    integral, end = integrate_along_flow(
        grid.origami, grid.m, x0, theta, time_span, integrand, quad_n
    )
    u_end = eval_field(grid, u, end[0], end[1], end[2])
    u_start = eval_field(grid, u, x0[0], x0[1], x0[2])
    return abs(np.exp(1j * twist * time_span) * u_end - u_start - integral)
