import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from twistlab import build_origami, l_shaped, torus
from twistlab.grid import Grid, assemble_Q, assemble_S, assemble_T


@pytest.fixture(scope="session")
def torus_o():
    return torus()


@pytest.fixture(scope="session")
def l_o():
    return l_shaped()


@pytest.fixture(scope="session")
def stair6_o():
    # 6-square surface with non-commuting gluings
    return build_origami(6, (1, 0, 3, 2, 5, 4), (5, 2, 1, 4, 3, 0))


@pytest.fixture(scope="session")
def torus_ops_9(torus_o):
    g = Grid(torus_o, 9)
    S = assemble_S(g)
    T = assemble_T(g)
    return g, S, T, assemble_Q(S, T)


@pytest.fixture(scope="session")
def l_ops_9(l_o):
    g = Grid(l_o, 9)
    S = assemble_S(g)
    T = assemble_T(g)
    return g, S, T, assemble_Q(S, T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
