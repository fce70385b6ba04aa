"""
Six training algorithms on one network
======================================

Trains a 3-8-8-1 tansig network with each algorithm on the same split and
initial weights, then widens the hidden layers to ten neurons.
"""

from cycletime.ann import Topology
from cycletime.dataset import generate_synthetic
from cycletime.trainers import ALGORITHMS, TrainConfig, run_comparison

data = generate_synthetic(600, seed=42, noise_sd=0.1)

# One seed: every algorithm starts from the same weights on the same split.
reports = run_comparison(data, Topology(3, (8, 8), 1), seeds=[3],
                         configs=[TrainConfig(a) for a in ALGORITHMS])

print(f"{'method':10s} {'epochs':>6s} {'train':>10s} {'test':>10s} {'network':>10s} "
      f"{'R':>7s}  stop")
for r in reports:
    rv = "n/a" if r.r_value is None else f"{r.r_value:.4f}"
    print(f"{r.algorithm:10s} {r.epochs_run:6d} {r.train_mse:10.4g} {r.test_mse:10.4g} "
          f"{r.network_mse:10.4g} {rv:>7s}  {r.stop_reason}")

# Bayesian regularisation tracks its hyperparameters; gamma is the number of
# weights the data actually pins down.
br = reports[0]
print(f"\nbr: gamma {br.details['gamma'][-1]:.1f} of {Topology(3, (8, 8), 1).n_weights} weights, "
      f"alpha {br.details['alpha'][-1]:.3g}, beta {br.details['beta'][-1]:.3g}")

# Wider hidden layers on the same seed.
for widths in [(8, 8), (10, 10)]:
    [lm] = run_comparison(data, Topology(3, widths, 1), seeds=[3], configs=[TrainConfig("lm")])
    print(f"lm {widths}: network MSE {lm.network_mse:.4g} s^2")

# A step size far beyond the stability limit is reported, not raised.
[gd] = run_comparison(data, seeds=[3], configs=[TrainConfig("gd", lr=1e6)])
print(f"\ngd with lr=1e6: diverged={gd.diverged}, stop={gd.stop_reason}")
