"""Regenerate the small low-isometry matrices used by the theory tests.

    python3 tests/fixtures/make_fixtures.py
"""
import os

import numpy as np
from scipy.linalg import hadamard

from mols.analysis import design_low_rip_matrix, rip_bruteforce
from mols.io import write_matrix
from mols.problem import SensingMatrix

HERE = os.path.dirname(os.path.abspath(__file__))

for m, order in [(12, 4), (14, 4)]:
    A = design_low_rip_matrix(m, 16, order, seed=2024, restarts=8)
    write_matrix(os.path.join(HERE, f"lowrip_{m}x16.txt"), A)
    print(m, np.round(rip_bruteforce(A, 6).delta, 4))

H = hadamard(16)[1:].astype(float)
A = SensingMatrix(H / np.linalg.norm(H, axis=0), normalized=True)
write_matrix(os.path.join(HERE, "hadamard_15x16.txt"), A)
print(15, np.round(rip_bruteforce(A, 6).delta, 4))
