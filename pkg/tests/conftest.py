from fractions import Fraction
from pathlib import Path

import pytest

from polytope import make_facet_system

DATA = Path(__file__).resolve().parent.parent / "data"

OCTAHEDRON_NORMALS = [
    (0, 1, 1), (-1, 0, 0), (0, -1, 0), (1, 0, 1),
    (0, 1, 0), (-1, 0, -1), (0, -1, -1), (1, 0, 0),
]


def octahedron_system(lam=1):
    lam = Fraction(lam)
    offsets = [0, -lam, -lam, 0, 0, -lam, -lam, 0]
    return make_facet_system(OCTAHEDRON_NORMALS, offsets, scale=lam, small_resolution=True)


def interval_system(lam=2):
    return make_facet_system([(1,), (-1,)], [0, -Fraction(lam)], scale=Fraction(lam))


def square_system(lam=1):
    lam = Fraction(lam)
    return make_facet_system([(1, 0), (0, 1), (-1, 0), (0, -1)], [0, 0, -lam, -lam], scale=lam)


@pytest.fixture
def octahedron():
    return octahedron_system()


@pytest.fixture
def data_dir():
    return DATA
