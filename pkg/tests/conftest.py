"""
Shared fixtures: generated circuits and small hand-built nests with known answers.
"""
import os
from fractions import Fraction

import numpy as np
import pytest

from nestline.circuit import NestClass, generate_surface_code
from nestline.nest_builder import BoundaryId, DetectionEventId, Nest

A = BoundaryId("A", NestClass.PRIMAL)
B = BoundaryId("B", NestClass.PRIMAL)


def event(t, x, y=0):
    return DetectionEventId(t, x, y, NestClass.PRIMAL)


def make_ladder(c1, c2, window=10):
    """d=2: per round one event joined to A with c1 and to B with c2."""
    specs = []
    for t in range(window):
        specs.append((A, event(t, 1), Fraction(c1)))
        specs.append((event(t, 1), B, Fraction(c2)))
    return Nest.assemble(NestClass.PRIMAL, window, (A, B), specs)


def make_chain(a=1, b=1, c=1, e=1, g=None, window=10):
    """
    d=4: per round u, v, w in a row joined A-u (a), u-v (b), v-w (c), w-B (e).

    With g, every u(t) is also joined to v(t-1).
    """
    specs = []
    for t in range(window):
        u, v, w = event(t, 1), event(t, 3), event(t, 5)
        specs += [(A, u, Fraction(a)), (u, v, Fraction(b)), (v, w, Fraction(c)), (w, B, Fraction(e))]
        if g is not None and t > 0:
            specs.append((u, event(t - 1, 3), Fraction(g)))
    return Nest.assemble(NestClass.PRIMAL, window, (A, B), specs)


COEFFICIENTS = [Fraction(1, 3), Fraction(1, 15), Fraction(2, 15), Fraction(1), Fraction(4, 15)]


def make_random_nest(seed, width=3, window=5, density=0.7):
    """Grid of events width x window with random space, time and diagonal sticks."""
    rng = np.random.default_rng(seed)

    def coefficient():
        return COEFFICIENTS[rng.integers(len(COEFFICIENTS))]

    specs = []
    for t in range(window):
        specs.append((A, event(t, 1), coefficient()))
        specs.append((event(t, 2 * width - 1), B, coefficient()))
        for i in range(width):
            x = 2 * i + 1
            if i + 1 < width and rng.random() < density:
                specs.append((event(t, x), event(t, x + 2), coefficient()))
            if t + 1 < window and rng.random() < density:
                specs.append((event(t, x), event(t + 1, x), coefficient()))
            if i + 1 < width and t + 1 < window and rng.random() < density / 2:
                specs.append((event(t + 1, x), event(t, x + 2), coefficient()))
    return Nest.assemble(NestClass.PRIMAL, window, (A, B), specs)


@pytest.fixture
def ladder():
    return make_ladder


@pytest.fixture
def chain():
    return make_chain


@pytest.fixture
def random_nest():
    return make_random_nest


@pytest.fixture(scope="session")
def surface_d2():
    circuit, _ = generate_surface_code(2)
    return circuit


@pytest.fixture(scope="session")
def surface_d4():
    circuit, _ = generate_surface_code(4)
    return circuit


def pytest_collection_modifyitems(config, items):
    if os.getenv("NESTLINE_ACCEPTANCE") == "1":
        return
    skip = pytest.mark.skip(reason="set NESTLINE_ACCEPTANCE=1 to run the full-size checks")
    for item in items:
        if "acceptance" in item.keywords:
            item.add_marker(skip)
