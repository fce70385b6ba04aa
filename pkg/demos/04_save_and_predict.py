"""
Saving models and predicting cycle time
=======================================

Serialises a trained network and a trained ANFIS to JSON, reloads both
and predicts the cycle time for new settings. The same files feed
``cycletime predict``.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from cycletime.anfis import FisModel, grid_partition, train_hybrid
from cycletime.ann import NetworkModel, Topology, init_weights
from cycletime.dataset import NormParams, generate_synthetic, split, synthetic_cycle_time
from cycletime.trainers import TrainConfig, train

data = generate_synthetic(600, seed=42, noise_sd=0.1)
norm = NormParams.fit(data)

net, _ = train(init_weights(Topology(3, (8, 8), 1), seed=1, norm=norm),
               split(data, seed=1), TrainConfig("lm"))
fis0 = grid_partition([(-1, 1)] * 3, 2, "linear", norm)
fis, _ = train_hybrid(fis0, split(data, counts=(400, 100, 100), seed=1))

settings = np.array([[35.0, 800.0, 450.0],
                     [50.0, 1000.0, 600.0],
                     [70.0, 1300.0, 800.0]])

with tempfile.TemporaryDirectory() as tmp:
    for model in (net, fis):
        path = Path(tmp) / f"{model.to_dict()['model_kind']}.json"
        path.write_text(json.dumps(model.to_dict()))
        d = json.loads(path.read_text())
        loaded = NetworkModel.from_dict(d) if d["model_kind"] == "ann" else FisModel.from_dict(d)
        same = np.array_equal(loaded.predict(settings), model.predict(settings))
        print(f"{d['model_kind']:6s} reloads bit-identically: {same}")

print("\nsetting (T, P_inj, P_switch)    true     ANN    ANFIS   [s]")
for x, t, a, f in zip(settings, synthetic_cycle_time(settings), net.predict(settings),
                      fis.predict(settings)):
    print(f"{str(x):30s} {t:7.2f} {a:7.2f} {f:7.2f}")
