"""Square-tiled translation surfaces given by a pair of gluing permutations.

A surface is built from ``n`` unit squares: ``perm_right[s]`` is the square
glued to the right edge of square ``s`` and ``perm_up[s]`` the square glued to
its top edge.  Translations preserve the horizontal/vertical directions, so
the flat structure is exact and all geometric invariants are combinatorial.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedSurface, NotAPermutation, SurfaceFileError

# Corner labels within a square: 0 = bottom-left, 1 = bottom-right,
# 2 = top-right, 3 = top-left.
BL, BR, TR, TL = 0, 1, 2, 3


def _check_permutation(perm, n, name):
    p = tuple(int(x) for x in perm)
    if len(p) != n or sorted(p) != list(range(n)):
        raise NotAPermutation(f"{name} is not a permutation of 0..{n - 1}: {perm}")
    return p


def _invert(perm):
    inv = [0] * len(perm)
    for i, j in enumerate(perm):
        inv[j] = i
    return tuple(inv)


@dataclass(frozen=True)
class Origami:
    """Validated combinatorial surface; immutable and safe to share."""

    n_squares: int
    perm_right: tuple
    perm_up: tuple
    perm_right_inv: tuple = field(init=False, repr=False, compare=False)
    perm_up_inv: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "perm_right_inv", _invert(self.perm_right))
        object.__setattr__(self, "perm_up_inv", _invert(self.perm_up))

    @property
    def area(self):
        return float(self.n_squares)

    def commuting(self):
        """True when the two gluing permutations commute (no cone defects)."""
        r, u = self.perm_right, self.perm_up
        return all(r[u[s]] == u[r[s]] for s in range(self.n_squares))

    def content_hash(self):
        text = f"{self.n_squares}:{','.join(map(str, self.perm_right))}:{','.join(map(str, self.perm_up))}"
        return hashlib.sha256(text.encode()).hexdigest()


def build_origami(n, r, u):
    """Validate permutation data and return an :class:`Origami`.

    Raises :class:`NotAPermutation` for malformed data and
    :class:`DisconnectedSurface` when ``<r, u>`` does not act transitively.
    """
    if n < 1:
        raise NotAPermutation(f"n_squares must be positive, got {n}")
    pr = _check_permutation(r, n, "perm_right")
    pu = _check_permutation(u, n, "perm_up")

    seen = {0}
    stack = [0]
    while stack:
        s = stack.pop()
        for t in (pr[s], pu[s], pr.index(s), pu.index(s)):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    if len(seen) != n:
        missing = sorted(set(range(n)) - seen)
        raise DisconnectedSurface(
            f"squares {missing} are not reachable from square 0; surface is disconnected"
        )
    return Origami(n, pr, pu)


def corner_rotation(o):
    """Permutation on (square, corner) pairs: one counterclockwise step
    around the shared vertex.

    Encoded on indices ``4*s + c``.  The step convention (fixed once,
    validated by the Euler-characteristic identity rather than trusted):
    from the bottom-left corner of ``s`` the next quarter-turn lands in the
    square glued across the left edge, at its bottom-right corner, and so on
    cyclically through corner labels 0 -> 1 -> 2 -> 3 -> 0.
    """
    n = o.n_squares
    rot = np.empty(4 * n, dtype=np.int64)
    for s in range(n):
        rot[4 * s + BL] = 4 * o.perm_right_inv[s] + BR
        rot[4 * s + BR] = 4 * o.perm_up_inv[s] + TR
        rot[4 * s + TR] = 4 * o.perm_right[s] + TL
        rot[4 * s + TL] = 4 * o.perm_up[s] + BL
    return rot


@dataclass(frozen=True)
class SingularityData:
    """Cone points (vertex id, order), genus and area of the surface.

    Orders satisfy ``sum(k_i) == 2*genus - 2`` for genus >= 1; vertices of
    order 0 are regular and omitted from ``cone_points``.  ``odd_orders`` is
    informational: odd-order zeros can occur for square-tiled data even
    though much of the theory is stated for even orders.
    """

    cone_points: tuple
    genus: int
    area: float
    odd_orders: bool = False


def vertex_orbits(o):
    """Orbits of the corner rotation; each orbit is one vertex of the surface."""
    rot = corner_rotation(o)
    seen = np.zeros(rot.shape[0], dtype=bool)
    orbits = []
    for start in range(rot.shape[0]):
        if seen[start]:
            continue
        orbit = []
        c = start
        while not seen[c]:
            seen[c] = True
            orbit.append(int(c))
            c = rot[c]
        orbits.append(orbit)
    return orbits


def singularities(o):
    """Geometric invariants of the surface.

    Vertices are the orbits of :func:`corner_rotation`; an orbit of length
    ``4*(k+1)`` is a vertex of cone angle ``2*pi*(k+1)``, i.e. order ``k``.
    Genus comes from ``V - E + F`` with ``F = N`` faces and ``E = 2N`` edges.
    """
    orbits = vertex_orbits(o)
    n = o.n_squares
    v = len(orbits)
    euler = v - 2 * n + n
    genus = (2 - euler) // 2
    cone_points = []
    for vid, orbit in enumerate(orbits):
        if len(orbit) % 4 != 0:
            raise AssertionError("corner orbit length not divisible by 4")
        k = len(orbit) // 4 - 1
        if k > 0:
            cone_points.append((vid, k))
    total_order = sum(k for _, k in cone_points)
    if genus >= 1 and total_order != 2 * genus - 2:
        raise AssertionError(
            f"order sum {total_order} != 2g-2 = {2 * genus - 2}; corner convention broken"
        )
    odd = any(k % 2 == 1 for _, k in cone_points)
    return SingularityData(tuple(cone_points), int(genus), float(n), odd)


def corner_vertex_orders(o):
    """Array (n_squares, 4) of the cone order of the vertex at each corner."""
    orders = np.zeros((o.n_squares, 4), dtype=np.int64)
    for orbit in vertex_orbits(o):
        k = len(orbit) // 4 - 1
        for c in orbit:
            orders[c // 4, c % 4] = k
    return orders


def relabel(o, perm):
    """Conjugate both gluing permutations by ``perm`` (a relabeling of squares)."""
    p = _check_permutation(perm, o.n_squares, "relabeling")
    inv = _invert(p)
    r = tuple(p[o.perm_right[inv[i]]] for i in range(o.n_squares))
    u = tuple(p[o.perm_up[inv[i]]] for i in range(o.n_squares))
    return build_origami(o.n_squares, r, u)


def random_transitive_origami(n, rng):
    """Random pair of permutations acting transitively on ``n`` squares."""
    while True:
        r = tuple(int(x) for x in rng.permutation(n))
        u = tuple(int(x) for x in rng.permutation(n))
        try:
            return build_origami(n, r, u)
        except DisconnectedSurface:
            continue


def torus():
    """The unit square torus."""
    return build_origami(1, (0,), (0,))


def l_shaped():
    """Three-square L-shaped surface of genus 2 with one order-2 cone point."""
    return build_origami(3, (1, 0, 2), (2, 1, 0))


def _parse_cycles(text, n, line_no, col0):
    """Parse cycle notation like ``(0 1)(2)`` into a permutation tuple."""
    perm = list(range(n))
    hit = [False] * n
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch != "(":
            raise SurfaceFileError(
                f"expected '(' in cycle notation, found {ch!r}", line_no, col0 + pos + 1
            )
        end = text.find(")", pos)
        if end < 0:
            raise SurfaceFileError("unclosed cycle", line_no, col0 + pos + 1)
        body = text[pos + 1 : end]
        entries = [tok for tok in re.split(r"[,\s]+", body.strip()) if tok]
        cyc = []
        for tok in entries:
            if not tok.lstrip("-").isdigit():
                raise SurfaceFileError(
                    f"cycle entry {tok!r} is not an integer", line_no, col0 + pos + 1
                )
            val = int(tok)
            if not 0 <= val < n:
                raise SurfaceFileError(
                    f"cycle entry {val} outside 0..{n - 1}", line_no, col0 + pos + 1
                )
            if hit[val]:
                raise SurfaceFileError(f"square {val} appears twice", line_no, col0 + pos + 1)
            hit[val] = True
            cyc.append(val)
        for i, a in enumerate(cyc):
            perm[a] = cyc[(i + 1) % len(cyc)]
        pos = end + 1
    return tuple(perm)


def _parse_array(text, n, line_no, col0):
    body = text.strip()[1:-1]
    entries = [tok for tok in re.split(r"[,\s]+", body.strip()) if tok]
    if len(entries) != n:
        raise SurfaceFileError(
            f"array notation needs exactly {n} entries, got {len(entries)}", line_no, col0 + 1
        )
    vals = []
    for tok in entries:
        if not tok.lstrip("-").isdigit():
            raise SurfaceFileError(f"array entry {tok!r} is not an integer", line_no, col0 + 1)
        vals.append(int(tok))
    return tuple(vals)


def parse_surface_text(text):
    """Parse a surface description (keys n_squares, perm_right, perm_up).

    Permutations accept one-line cycle notation ``(0 1)(2)`` or array
    notation ``[1, 0, 2]``.  Raises :class:`SurfaceFileError` with line and
    column diagnostics on malformed input.
    """
    values = {}
    raw = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise SurfaceFileError("expected 'key = value'", line_no, 1)
        key, _, val = stripped.partition("=")
        key = key.strip()
        if key not in ("n_squares", "perm_right", "perm_up"):
            raise SurfaceFileError(f"unknown key {key!r}", line_no, 1)
        if key in values:
            raise SurfaceFileError(f"duplicate key {key!r}", line_no, 1)
        values[key] = val.strip()
        raw[key] = (line_no, line.index("=") + 2)
    for key in ("n_squares", "perm_right", "perm_up"):
        if key not in values:
            raise SurfaceFileError(f"missing key {key!r}")
    line_no, col0 = raw["n_squares"]
    try:
        n = int(values["n_squares"])
    except ValueError:
        raise SurfaceFileError(
            f"n_squares must be an integer, got {values['n_squares']!r}", line_no, col0
        ) from None
    if n < 1:
        raise SurfaceFileError("n_squares must be positive", line_no, col0)
    perms = {}
    for key in ("perm_right", "perm_up"):
        line_no, col0 = raw[key]
        val = values[key]
        if val.startswith("["):
            if not val.endswith("]"):
                raise SurfaceFileError("unclosed array", line_no, col0)
            perms[key] = _parse_array(val, n, line_no, col0)
        elif val.startswith("("):
            perms[key] = _parse_cycles(val, n, line_no, col0)
        else:
            raise SurfaceFileError(
                f"{key} must use cycle '(..)' or array '[..]' notation", line_no, col0
            )
        if sorted(perms[key]) != list(range(n)):
            raise SurfaceFileError(f"{key} is not a permutation of 0..{n - 1}", line_no, col0)
    return build_origami(n, perms["perm_right"], perms["perm_up"])


def parse_surface_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_surface_text(fh.read())


def surface_file_hash(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
