# %% [markdown]
# # Checking the guarantees on a small matrix
#
# On a 15 x 16 matrix (a 16 x 16 Hadamard matrix with one row removed, columns
# normalised) the isometry constants can be computed exactly by enumerating
# every support. They are small enough for the exact-recovery condition to
# hold for K = 2, L = 2 and K = 3, L = 1.

# %%
import numpy as np
from scipy.linalg import hadamard

from mols import AlgorithmParams, ProblemInstance, SensingMatrix, add_noise, generate_sparse_signal
from mols.analysis import (
    collect_probes,
    iteration_bound_check,
    noisy_guarantee_check,
    recovery_condition_from,
    residual_decay_check,
    rip_bruteforce,
)

H = hadamard(16)[1:].astype(float)
A = SensingMatrix(H / np.linalg.norm(H, axis=0), normalized=True)
rip = rip_bruteforce(A, 6)
print("delta_s:", np.round(rip.delta, 4))
print(recovery_condition_from(rip, K=2, L=2))

# %% [markdown]
# Run MOLS and evaluate every per-iteration bound along the way.

# %%
x = generate_sparse_signal(16, 2, "gaussian", seed=3)
inst = add_noise(ProblemInstance.noiseless(A, x), 30.0, seed=4)
res, records = collect_probes(inst, AlgorithmParams(K=2, L=2, epsilon=0.0))
checks = residual_decay_check(res, rip, 2, 2)
for rec in records:
    if rec.probes is not None:
        checks += iteration_bound_check(rec.probes, rec.state, rip, noisy=True)
checks += noisy_guarantee_check(res, inst, rip, 2, 2, 0.0)
for c in checks:
    print(f"{c.name:24s} applicable={c.applicable!s:5s} satisfied={c.satisfied!s:5s} {c.lhs:.4g} vs {c.rhs:.4g}")
