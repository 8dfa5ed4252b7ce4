import csv

import numpy as np
import pytest

from lfsr.data.scene import generate_scene
from lfsr.model.lightfield import LightFieldStack, PerspectiveIndex, View


def make_rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def make_stack(hr_shape=(8, 8), zeta=2, thetas=((0, 0), (1, 0)), disparity=None, seed=0, reference=0):
    """Random observations over random smooth-ish disparity; enough for operator algebra."""
    rng = make_rng(seed)
    h, w = hr_shape
    if disparity is None:
        disparity = rng.uniform(-1.5, 1.5, size=hr_shape)
    elif np.isscalar(disparity):
        disparity = np.full(hr_shape, float(disparity))
    views = [
        View(rng.uniform(0, 1, size=(h // zeta, w // zeta)), PerspectiveIndex(float(r), float(t)), disparity)
        for r, t in thetas
    ]
    return LightFieldStack(tuple(views), reference, zeta)


def relative_gap(a, b):
    return abs(a - b) / max(1.0, abs(a), abs(b))


@pytest.fixture(scope="session")
def scene():
    return generate_scene(64, seed=0)


def dense_matrix(op, shape):
    """Columns of a linear operator on ``shape``-images, each output flattened."""
    n = shape[0] * shape[1]
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        cols.append(np.ravel(op(e.reshape(shape))))
    return np.stack(cols, axis=1)


def inner(a, b):
    """Real inner product of two arrays or stacks of arrays."""
    return float(np.vdot(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)))


def read_trace(path):
    """Rows of a trace CSV as dicts of strings."""
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
