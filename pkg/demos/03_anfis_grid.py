"""
Grid-partitioned ANFIS with hybrid training
===========================================

Lays Gaussian fuzzy sets over each input, inspects the resulting rule
base, and trains the four (MF count, Sugeno order) cells.
"""

import numpy as np

from cycletime.anfis import grid_partition, partition_trace, run_anfis_comparison
from cycletime.dataset import INPUT_RANGES, generate_synthetic

# Two sets per input over the original ranges: neighbours cross at 0.5.
fis = grid_partition(INPUT_RANGES, n_mfs=2, order="linear")
for name, mfs in zip(("temperature", "injection", "switch-over"), fis.mfs):
    print(name, [(round(m.c, 1), round(m.sigma, 2)) for m in mfs])
    mid = 0.5 * (mfs[0].c + mfs[1].c)
    print(f"   memberships at midpoint {mid}: {mfs[0](mid):.3f}, {mfs[1](mid):.3f}")

# One rule per combination of sets.
print("rules with 2 sets per input:", fis.n_rules)
print("rules with 4 sets per input:", grid_partition(INPUT_RANGES, 4).n_rules)
print("first rule antecedent:", fis.rules[0].antecedent)

# Hybrid training: least squares for the consequents, gradient steps on the
# Gaussian centres and widths, 400/100/100 split.
data = generate_synthetic(600, seed=42, noise_sd=0.1)
reports = run_anfis_comparison(data, seed=1)
print(f"\n{'MFs':>3s} {'order':>9s} {'rules':>5s} {'train MSE':>10s} {'test MSE':>10s}")
for r in reports:
    print(f"{r.details['n_mfs'][0]:3d} {r.details['order']:>9s} {r.details['n_rules']:5d} "
          f"{r.train_mse:10.4g} {r.test_mse:10.4g}")

# Plot-ready test trace: (index, actual, predicted) in seconds.
trace = np.array(partition_trace(reports[-1]))
print("\nfirst test points (index, actual, predicted):")
print(np.round(trace[:5], 3))
