# %% [markdown]
# # Exact-recovery frequency against sparsity
#
# A reduced version of the 128 x 256 experiment: 50 trials per K. Increase
# `trials` (the published curves use 2000) for smoother curves.

# %%
from mols.experiments import AlgorithmSpec, SweepSpec, critical_sparsity, run_sweep

spec = SweepSpec(
    m=128,
    n=256,
    sweep_variable="K",
    sweep_values=tuple(range(5, 61, 5)),
    trials=50,
    signal_kind="gaussian",
    algorithms=(AlgorithmSpec("mols", L=5), AlgorithmSpec("ols"), AlgorithmSpec("omp"), AlgorithmSpec("cosamp")),
    master_seed=1,
)
table = run_sweep(spec, log=print)

# %%
for alg in table.algorithms():
    freqs = " ".join(f"{r.frequency_exact:4.2f}" for r in table.series(alg))
    print(f"{alg:9s} critical K={critical_sparsity(table, alg):2d}  {freqs}")

# %% [markdown]
# Write the table and a gnuplot script next to it.

# %%
from mols.experiments import plot_script

table.write_csv("phase_transition.csv")
with open("phase_transition.gp", "w") as fh:
    fh.write(plot_script("phase_transition.csv"))
