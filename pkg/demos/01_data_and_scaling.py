"""
Process data: generation, scaling and partitioning
==================================================

Builds the synthetic 600-row process dataset, scales every column onto
[-1, 1] and cuts it into training, validation and test blocks.
"""

import tempfile
from pathlib import Path

import numpy as np

from cycletime.dataset import (INPUT_RANGES, generate_synthetic, load_csv, normalize, split,
                               synthetic_cycle_time, write_csv)

# 600 uniform draws over the sampling box, labelled with the documented
# generator plus N(0, 0.1^2) noise. The seed fixes both.
data = generate_synthetic(600, seed=42, noise_sd=0.1)
print("rows:", len(data), "columns:", data.columns)
for name, (lo, hi) in zip(data.columns, INPUT_RANGES):
    print(f"  {name:20s} sampled from [{lo}, {hi}]")
print(f"  cycle time spans {data.targets.min():.1f} s to {data.targets.max():.1f} s")

# The noise really is 0.1 s: subtract the noise-free surface.
residual = data.targets - synthetic_cycle_time(data.inputs)
print(f"noise sd estimate: {residual.std(ddof=1):.4f} s")

# Min-max scaling maps each column onto [-1, 1]; the parameters travel with
# every trained model so predictions come back in seconds.
scaled, params = normalize(data)
print("scaled column minima:", scaled.inputs.min(axis=0), scaled.targets.min())
print("scaled column maxima:", scaled.inputs.max(axis=0), scaled.targets.max())

# 70/15/15 for the networks, 400/100/100 for ANFIS.
ann_parts = split(data, (0.7, 0.15, 0.15), seed=1)
anfis_parts = split(data, counts=(400, 100, 100), seed=1)
print("network split sizes:", ann_parts.sizes)
print("ANFIS split sizes:  ", anfis_parts.sizes)

# CSV round trip: 17 significant digits keep every value exact.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "process.csv"
    write_csv(data, path)
    back = load_csv(path)
    print("CSV round trip exact:", np.array_equal(back.targets, data.targets))
