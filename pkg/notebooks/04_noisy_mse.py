# %% [markdown]
# # MSE against SNR
#
# K = 20, 2-PAM signals, 128 x 256 matrices. The oracle least-squares
# estimate on the true support is the reference.

# %%
import numpy as np

from mols.experiments import AlgorithmSpec, SweepSpec, mse_sweep_summary, run_sweep

spec = SweepSpec(
    m=128,
    n=256,
    sweep_variable="snr_db",
    sweep_values=(0.0, 10.0, 20.0, 30.0, 40.0, 50.0),
    trials=100,
    signal_kind="pam2",
    algorithms=(AlgorithmSpec("mols", L=5), AlgorithmSpec("omp"), AlgorithmSpec("cosamp"), AlgorithmSpec("oracle_ls")),
    master_seed=3,
    K=20,
)
table = run_sweep(spec)

# %%
for alg, pts in mse_sweep_summary(table).items():
    print(alg, " ".join(f"{snr:.0f}dB:{ratio:.2f}" for snr, ratio in pts))

# %% [markdown]
# At 20 dB the l2 distortion of MOLS is about sqrt(n * MSE).

# %%
print(np.sqrt(256 * table.row("mols:L=5", 20.0).mean_mse))
