"""Cycle-time regression for injection moulding.

Two model families share one data pipeline: a tansig MLP with six
training algorithms (:mod:`cycletime.trainers`) and a grid-partitioned
Sugeno ANFIS with hybrid training (:mod:`cycletime.anfis`).
"""

__version__ = "0.1.0"

from .dataset import Dataset, NormParams, SplitDataset, generate_synthetic, load_csv, split
from .ann import NetworkModel, Topology, init_weights
from .trainers import TrainConfig, TrainReport, run_comparison, train
from .anfis import FisModel, grid_partition, run_anfis_comparison, train_hybrid
from .metrics import mse, pearson_r, stats

__all__ = [
    "Dataset", "NormParams", "SplitDataset", "generate_synthetic", "load_csv", "split",
    "NetworkModel", "Topology", "init_weights",
    "TrainConfig", "TrainReport", "run_comparison", "train",
    "FisModel", "grid_partition", "run_anfis_comparison", "train_hybrid",
    "mse", "pearson_r", "stats",
]
