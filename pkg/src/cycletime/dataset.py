"""Process data: CSV ingestion, min-max scaling, partitioning, synthetic data.

Rows are (mould temperature [degC], injection pressure [bar], switch-over
pressure [bar]) -> cycle time [s]. Everything except the CSV schema also
works for any number of input columns, which the trainer tests rely on.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "COLUMNS",
    "INPUT_RANGES",
    "ParseError",
    "SchemaError",
    "ConstantColumn",
    "BadRatios",
    "Dataset",
    "NormParams",
    "SplitDataset",
    "load_csv",
    "write_csv",
    "normalize",
    "denormalize",
    "split",
    "synthetic_cycle_time",
    "generate_synthetic",
]

COLUMNS = ("mould_temp", "injection_pressure", "switchover_pressure", "cycle_time")

# Sampling box of the synthetic generator, original units.
INPUT_RANGES = ((20.0, 80.0), (500.0, 1500.0), (300.0, 900.0))


class ParseError(ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaError(ValueError):
    pass


class ConstantColumn(ValueError):
    def __init__(self, name):
        super().__init__(f"column {name!r} is constant and cannot be scaled")
        self.name = name


class BadRatios(ValueError):
    pass


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    columns: tuple = COLUMNS

    def __post_init__(self):
        X = _frozen(self.inputs)
        y = _frozen(self.targets)
        if X.ndim == 1:
            X = _frozen(X.reshape(-1, 1))
        if X.ndim != 2 or y.ndim != 1:
            raise ValueError("inputs must be 2-D and targets 1-D")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} input rows but {y.shape[0]} targets")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        columns = tuple(self.columns)
        if len(columns) != X.shape[1] + 1:
            columns = tuple(f"x{i + 1}" for i in range(X.shape[1])) + ("y",)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "columns", columns)

    def __len__(self):
        return self.targets.shape[0]

    @property
    def n_inputs(self):
        return self.inputs.shape[1]

    def take(self, idx):
        return Dataset(self.inputs[idx], self.targets[idx], self.columns)

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        return cls(
            np.vstack([p.inputs for p in parts]),
            np.concatenate([p.targets for p in parts]),
            parts[0].columns,
        )


@dataclass(frozen=True)
class NormParams:
    """Per-column min/max; every column is mapped affinely onto [-1, 1]."""

    input_min: np.ndarray
    input_max: np.ndarray
    target_min: float
    target_max: float

    def __post_init__(self):
        object.__setattr__(self, "input_min", _frozen(np.atleast_1d(self.input_min)))
        object.__setattr__(self, "input_max", _frozen(np.atleast_1d(self.input_max)))
        object.__setattr__(self, "target_min", float(self.target_min))
        object.__setattr__(self, "target_max", float(self.target_max))
        if np.any(self.input_max <= self.input_min) or self.target_max <= self.target_min:
            raise ValueError("every column needs max > min")

    @classmethod
    def identity(cls, n_inputs):
        return cls(-np.ones(n_inputs), np.ones(n_inputs), -1.0, 1.0)

    @classmethod
    def fit(cls, data, names=None):
        names = names or data.columns
        lo, hi = data.inputs.min(axis=0), data.inputs.max(axis=0)
        for j in range(data.n_inputs):
            if hi[j] <= lo[j]:
                raise ConstantColumn(names[j])
        tlo, thi = data.targets.min(), data.targets.max()
        if thi <= tlo:
            raise ConstantColumn(names[-1])
        return cls(lo, hi, tlo, thi)

    @property
    def target_half_range(self):
        return 0.5 * (self.target_max - self.target_min)

    def scale_inputs(self, X):
        X = np.asarray(X, dtype=float)
        return 2.0 * (X - self.input_min) / (self.input_max - self.input_min) - 1.0

    def unscale_inputs(self, Xn):
        Xn = np.asarray(Xn, dtype=float)
        return (Xn + 1.0) * 0.5 * (self.input_max - self.input_min) + self.input_min

    def scale_targets(self, y):
        y = np.asarray(y, dtype=float)
        return 2.0 * (y - self.target_min) / (self.target_max - self.target_min) - 1.0

    def unscale_targets(self, yn):
        yn = np.asarray(yn, dtype=float)
        return (yn + 1.0) * 0.5 * (self.target_max - self.target_min) + self.target_min

    def to_dict(self):
        return {
            "input_min": self.input_min.tolist(),
            "input_max": self.input_max.tolist(),
            "target_min": self.target_min,
            "target_max": self.target_max,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["input_min"], d["input_max"], d["target_min"], d["target_max"])


@dataclass(frozen=True)
class SplitDataset:
    train: Dataset
    validation: Dataset
    test: Dataset
    seed: int = None
    order: np.ndarray = field(default=None, repr=False)

    @property
    def full(self):
        """All rows, in train/validation/test order."""
        return Dataset.concat([self.train, self.validation, self.test])

    @property
    def sizes(self):
        return len(self.train), len(self.validation), len(self.test)


def _canonical(name):
    return name.strip().lower().replace(" ", "_").replace("-", "_")


def load_csv(path, has_header=True):
    """Read a four-column process data file.

    With ``has_header`` the columns are located by (case-insensitive) name,
    in any order; otherwise the first four columns are taken by position.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
    if not rows:
        raise SchemaError(f"{path}: empty file")

    first_data_row = 1
    if has_header:
        header = [_canonical(h) for h in rows[0]]
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        col_idx = [header.index(c) for c in COLUMNS]
        body = rows[1:]
    else:
        first_data_row = 0
        if len(rows[0]) < len(COLUMNS):
            raise SchemaError(f"{path}: need {len(COLUMNS)} columns, got {len(rows[0])}")
        col_idx = list(range(len(COLUMNS)))
        body = rows
    if not body:
        raise SchemaError(f"{path}: no data rows")

    values = np.empty((len(body), len(COLUMNS)))
    for i, row in enumerate(body):
        # 1-based file line number, header included
        line = i + first_data_row + 1
        for k, j in enumerate(col_idx):
            try:
                v = float(row[j])
            except (IndexError, ValueError):
                cell = row[j] if j < len(row) else ""
                raise ParseError(
                    f"{path}: row {line}, column {COLUMNS[k]}: not a number: {cell!r}",
                    row=line, column=COLUMNS[k],
                ) from None
            if not np.isfinite(v):
                raise ParseError(f"{path}: row {line}, column {COLUMNS[k]}: non-finite",
                                 row=line, column=COLUMNS[k])
            values[i, k] = v
    return Dataset(values[:, :3], values[:, 3], COLUMNS)


def write_csv(data, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.columns)
        for x, y in zip(data.inputs, data.targets):
            w.writerow([format(v, ".17g") for v in (*x, y)])


def normalize(data, params=None):
    """Map every column onto [-1, 1]; returns ``(scaled, params)``.

    Pass ``params`` to reuse an existing scaling instead of fitting one.
    """
    if params is None:
        params = NormParams.fit(data)
    scaled = Dataset(params.scale_inputs(data.inputs), params.scale_targets(data.targets),
                     data.columns)
    return scaled, params


def denormalize(data, params):
    return Dataset(params.unscale_inputs(data.inputs), params.unscale_targets(data.targets),
                   data.columns)


def _partition_sizes(n, ratios, counts):
    if counts is not None:
        counts = tuple(int(c) for c in counts)
        if len(counts) != 3 or min(counts) <= 0 or sum(counts) != n:
            raise BadRatios(f"counts {counts} must be three positive integers summing to {n}")
        return counts
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) <= 0:
        raise BadRatios(f"ratios {ratios} must be three positive numbers")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios {ratios} sum to {sum(ratios)!r}, not 1")
    n_train = int(round(n * ratios[0]))
    n_val = int(round(n * ratios[1]))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise BadRatios(f"{n} rows are too few for ratios {ratios}")
    return n_train, n_val, n_test


def split(data, ratios=(0.7, 0.15, 0.15), seed=0, counts=None, shuffle=True):
    """Partition rows into train/validation/test.

    Rows are permuted with ``numpy.random.default_rng(seed)`` (unless
    ``shuffle`` is false, which keeps file order) and cut into contiguous
    blocks. ``counts`` overrides ``ratios`` with explicit block sizes.
    """
    n = len(data)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    n_train, n_val, _ = _partition_sizes(n, ratios, counts)
    order = np.random.default_rng(seed).permutation(n) if shuffle else np.arange(n)
    a, b = n_train, n_train + n_val
    return SplitDataset(data.take(order[:a]), data.take(order[a:b]), data.take(order[b:]),
                        seed, order)


def synthetic_cycle_time(inputs):
    """Noise-free cycle time [s] of the synthetic process.

    With t, p, s the mould temperature, injection pressure and switch-over
    pressure rescaled from their sampling ranges to [-1, 1]::

        t = (T - 50) / 30,  p = (P - 1000) / 500,  s = (S - 600) / 300

        cycle = 60 + 18 t + 9 t^2 + 12 t^3
                - 12 p + 6 p^2 - 9 p^3
                + 7.2 s - 9 p s + 12 t p s + 9 t^2 s
                - 7.2 t p^2 + 9 t^2 p^2 - 12 t^4 p + 9 t^2 s^3

    Over the sampling box this spans 13.7 s to 162 s (corners included). The surface is
    rich enough (cubic and quartic cross terms) that a 3-8-8-1 network is
    capacity-limited on it, which is what lets wider networks and finer
    fuzzy grids show an advantage over the 0.1 s noise floor.

    The coefficients are frozen; results built on this function are
    reproducible across releases.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    t = (X[:, 0] - 50.0) / 30.0
    p = (X[:, 1] - 1000.0) / 500.0
    s = (X[:, 2] - 600.0) / 300.0
    return (60.0 + 18.0 * t + 9.0 * t**2 + 12.0 * t**3
            - 12.0 * p + 6.0 * p**2 - 9.0 * p**3
            + 7.2 * s - 9.0 * p * s + 12.0 * t * p * s + 9.0 * t**2 * s
            - 7.2 * t * p**2 + 9.0 * t**2 * p**2 - 12.0 * t**4 * p + 9.0 * t**2 * s**3)


def generate_synthetic(n=600, seed=0, noise_sd=0.1):
    """Draw ``n`` uniform samples from INPUT_RANGES and label them with
    :func:`synthetic_cycle_time` plus N(0, noise_sd^2) noise."""
    if n < 10:
        raise ValueError(f"n must be at least 10, got {n}")
    if noise_sd < 0:
        raise ValueError(f"noise_sd must be non-negative, got {noise_sd}")
    rng = np.random.default_rng(seed)
    lo = np.array([r[0] for r in INPUT_RANGES])
    hi = np.array([r[1] for r in INPUT_RANGES])
    X = lo + (hi - lo) * rng.random((n, 3))
    y = synthetic_cycle_time(X)
    if noise_sd > 0:
        y = y + rng.normal(0.0, noise_sd, size=n)
    return Dataset(X, y, COLUMNS)
