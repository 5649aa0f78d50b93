import os

import numpy as np
import pytest
from hypothesis import settings

from mols.io import read_matrix
from mols.problem import ProblemInstance, generate_gaussian_matrix, generate_sparse_signal

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_matrix(name):
    return read_matrix(os.path.join(FIXTURES, name))


def gaussian_instance(m, n, K, seed, kind="gaussian"):
    A = generate_gaussian_matrix(m, n, seed)
    x = generate_sparse_signal(n, K, kind, seed + 10**6)
    return ProblemInstance.noiseless(A, x)


@pytest.fixture
def small_instance():
    return gaussian_instance(24, 48, 4, 3)
