"""Grid-partitioned Sugeno ANFIS with Gaussian memberships.

The network has the usual five layers:

1. Gaussian membership degree of every input in each of its fuzzy sets,
   ``exp(-(x - c)^2 / (2 sigma^2))``.
2. Rule firing strength, the product of one membership per input.
3. Normalisation of the firing strengths so they sum to one.
4. Rule consequent, a constant ``r`` (zero order) or ``p . x + r``
   (first order), weighted by the normalised strength.
5. Sum of the weighted consequents.

Rules cover the full grid, one per combination of fuzzy sets, so three
inputs with four sets each give 64 rules. Rule ``k`` uses the sets in
``fis.antecedents[k]``; the first input varies slowest.

Training is Jang's hybrid scheme: with the premise (c, sigma) fixed the
output is linear in the consequents, which are solved by least squares;
then one gradient step is taken on the premise parameters.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .dataset import NormParams, split as split_rows
from .metrics import ConstantInput, pearson_r
from .numerics import solve_least_squares
from .trainers import TrainReport

__all__ = [
    "ORDERS",
    "SIGMA_FLOOR",
    "BadRange",
    "DegenerateFiring",
    "GaussianMF",
    "SugenoRule",
    "FisModel",
    "gaussian_mf",
    "grid_partition",
    "evaluate_fis",
    "predict_fis",
    "normalized_firing",
    "fit_consequents",
    "train_hybrid",
    "run_anfis_comparison",
    "partition_trace",
    "cell_name",
]

SCHEMA_VERSION = 1
ORDERS = ("constant", "linear")
SIGMA_FLOOR = 1e-6
LR_DECAY = 0.99
MAX_FAIL = 6


class BadRange(ValueError):
    pass


class DegenerateFiring(ArithmeticError):
    """No rule fires (sum of firing strengths is zero or undefined)."""


@dataclass(frozen=True)
class GaussianMF:
    c: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > SIGMA_FLOOR:
            raise ValueError(f"sigma must exceed {SIGMA_FLOOR}, got {self.sigma}")

    def __call__(self, x):
        return gaussian_mf(x, self)


@dataclass(frozen=True)
class SugenoRule:
    antecedent: tuple
    consequent: tuple


def gaussian_mf(x, mf):
    """Membership degree of ``x`` in ``mf`` (scalar or array ``x``)."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-((x - mf.c) ** 2) / (2.0 * mf.sigma**2))
    return out if out.ndim else float(out)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class FisModel:
    """Premise parameters per input, consequent matrix, Sugeno order.

    ``consequents`` has one row per rule: ``[r]`` for constant order,
    ``[p_1, ..., p_n, r]`` for linear order. Centres and spreads live in
    normalised input units.
    """

    centers: tuple
    sigmas: tuple
    consequents: np.ndarray
    order: str = "linear"
    norm: NormParams = None
    antecedents: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}, got {self.order!r}")
        centers = tuple(_frozen(c) for c in self.centers)
        sigmas = tuple(_frozen(s) for s in self.sigmas)
        if len(centers) != len(sigmas) or any(c.shape != s.shape for c, s in zip(centers, sigmas)):
            raise ValueError("centers and sigmas must match per input")
        if any(np.any(~(s > SIGMA_FLOOR)) for s in sigmas):
            raise ValueError(f"every sigma must exceed {SIGMA_FLOOR}")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "sigmas", sigmas)
        grid = np.array(list(itertools.product(*[range(c.size) for c in centers])), dtype=int)
        grid.flags.writeable = False
        object.__setattr__(self, "antecedents", grid)
        width = len(centers) + 1 if self.order == "linear" else 1
        cons = _frozen(np.asarray(self.consequents, dtype=float).reshape(len(grid), width))
        object.__setattr__(self, "consequents", cons)
        if self.norm is None:
            object.__setattr__(self, "norm", NormParams.identity(len(centers)))

    @property
    def n_inputs(self):
        return len(self.centers)

    @property
    def n_mfs(self):
        return tuple(c.size for c in self.centers)

    @property
    def n_rules(self):
        return len(self.antecedents)

    @property
    def mfs(self):
        return [[GaussianMF(float(c), float(s)) for c, s in zip(cs, ss)]
                for cs, ss in zip(self.centers, self.sigmas)]

    @property
    def rules(self):
        return [SugenoRule(tuple(int(i) for i in a), tuple(float(v) for v in row))
                for a, row in zip(self.antecedents, self.consequents)]

    def with_params(self, centers=None, sigmas=None, consequents=None):
        return FisModel(
            self.centers if centers is None else centers,
            self.sigmas if sigmas is None else sigmas,
            self.consequents if consequents is None else consequents,
            self.order,
            self.norm,
        )

    def predict(self, X, normalized=False):
        return predict_fis(self, X, normalized)

    def to_dict(self):
        return {
            "model_kind": "anfis",
            "schema_version": SCHEMA_VERSION,
            "inputs": self.n_inputs,
            "order": self.order,
            "mfs": [[{"c": float(c), "sigma": float(s)} for c, s in zip(cs, ss)]
                    for cs, ss in zip(self.centers, self.sigmas)],
            "rules": [{"antecedent": [int(i) for i in a], "consequent": row.tolist()}
                      for a, row in zip(self.antecedents, self.consequents)],
            "norm_params": self.norm.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("model_kind") != "anfis":
            raise ValueError(f"not an ANFIS model: model_kind={d.get('model_kind')!r}")
        centers = [[m["c"] for m in per_input] for per_input in d["mfs"]]
        sigmas = [[m["sigma"] for m in per_input] for per_input in d["mfs"]]
        if len(centers) != d.get("inputs", len(centers)):
            raise ValueError("input count does not match membership functions")
        width = len(centers) + 1 if d["order"] == "linear" else 1
        placeholder = np.zeros((int(np.prod([len(c) for c in centers])), width))
        fis = cls(centers, sigmas, placeholder, d["order"], NormParams.from_dict(d["norm_params"]))
        by_cell = {tuple(r["antecedent"]): r["consequent"] for r in d["rules"]}
        if len(by_cell) != fis.n_rules or len(d["rules"]) != fis.n_rules:
            raise ValueError("rule list does not cover the membership grid exactly once")
        try:
            cons = [by_cell[tuple(int(i) for i in a)] for a in fis.antecedents]
        except KeyError as exc:
            raise ValueError(f"missing rule for cell {exc}") from None
        return fis.with_params(consequents=np.array(cons, dtype=float))


def _as_counts(n_mfs, n_inputs):
    if np.ndim(n_mfs) == 0:
        return (int(n_mfs),) * n_inputs
    counts = tuple(int(m) for m in n_mfs)
    if len(counts) != n_inputs:
        raise ValueError(f"need one MF count per input ({n_inputs}), got {counts}")
    return counts


def grid_partition(input_ranges, n_mfs=2, order="linear", norm=None):
    """Initial FIS: evenly spaced Gaussians over each input range.

    Centres include both range ends. Spreads are chosen so that
    neighbouring sets cross at membership 0.5:
    ``sigma = spacing / (2 sqrt(2 ln 2))``. Consequents start at zero.
    """
    ranges = [(float(lo), float(hi)) for lo, hi in input_ranges]
    counts = _as_counts(n_mfs, len(ranges))
    centers, sigmas = [], []
    for (lo, hi), m in zip(ranges, counts):
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise BadRange(f"invalid input range ({lo}, {hi})")
        if m < 2:
            raise BadRange(f"need at least 2 membership functions per input, got {m}")
        spacing = (hi - lo) / (m - 1)
        centers.append(np.linspace(lo, hi, m))
        sigmas.append(np.full(m, spacing / (2.0 * np.sqrt(2.0 * np.log(2.0)))))
    width = len(ranges) + 1 if order == "linear" else 1
    n_rules = int(np.prod(counts))
    return FisModel(centers, sigmas, np.zeros((n_rules, width)), order, norm)


def _log_firing(fis, Xn):
    """Log firing strength of every rule, shape (n, R)."""
    logw = np.zeros((Xn.shape[0], fis.n_rules))
    for i, (c, s) in enumerate(zip(fis.centers, fis.sigmas)):
        log_mu = -((Xn[:, i:i + 1] - c) ** 2) / (2.0 * s**2)
        logw += log_mu[:, fis.antecedents[:, i]]
    return logw


def normalized_firing(fis, Xn):
    """Layer-3 output: firing strengths scaled to sum to one per row.

    Computed in log space, so far-out inputs whose raw strengths all
    underflow still get a well-defined weighting.
    """
    logw = _log_firing(fis, Xn)
    top = logw.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise DegenerateFiring("firing strengths are undefined for these inputs")
    w = np.exp(logw - top)
    return w / w.sum(axis=1, keepdims=True)


def _rule_outputs(fis, Xn):
    """f_k(x) for every sample and rule, shape (n, R)."""
    if fis.order == "constant":
        return np.broadcast_to(fis.consequents[:, 0], (Xn.shape[0], fis.n_rules))
    return Xn @ fis.consequents[:, :-1].T + fis.consequents[:, -1]


def _design(order, wbar, Xn):
    """Least-squares design matrix; column layout matches ``consequents.ravel()``."""
    if order == "constant":
        return wbar
    n = Xn.shape[0]
    x_aug = np.hstack([Xn, np.ones((n, 1))])
    return (wbar[:, :, None] * x_aug[:, None, :]).reshape(n, -1)


def _check(fis, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != fis.n_inputs:
        raise ValueError(f"FIS expects {fis.n_inputs} inputs, got {X.shape[1]}")
    return X


def predict_fis(fis, X, normalized=False):
    X = _check(fis, X)
    Xn = X if normalized else fis.norm.scale_inputs(X)
    out = np.sum(normalized_firing(fis, Xn) * _rule_outputs(fis, Xn), axis=1)
    return out if normalized else fis.norm.unscale_targets(out)


def evaluate_fis(fis, x, normalized=False):
    """Weighted-average Sugeno output for one input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("evaluate_fis takes a single input vector")
    return float(predict_fis(fis, x, normalized)[0])


def fit_consequents(fis, X, y, normalized=True):
    """Least-squares consequents for fixed premise parameters.

    Returns ``(fitted_fis, lstsq_result)``.
    """
    X = _check(fis, X)
    y = np.asarray(y, dtype=float).ravel()
    if not normalized:
        X, y = fis.norm.scale_inputs(X), fis.norm.scale_targets(y)
    res = solve_least_squares(_design(fis.order, normalized_firing(fis, X), X), y)
    return fis.with_params(consequents=res.x), res


def _premise_gradient(fis, Xn, y):
    """d MSE / d (centers, sigmas) through layers 1-5, per input."""
    wbar = normalized_firing(fis, Xn)
    f = _rule_outputs(fis, Xn)
    yhat = np.sum(wbar * f, axis=1)
    # d yhat / d log w_k = wbar_k (f_k - yhat); chain rule through the MSE
    G = (-2.0 / len(y)) * (y - yhat)[:, None] * wbar * (f - yhat[:, None])
    d_c, d_s = [], []
    for i, (c, s) in enumerate(zip(fis.centers, fis.sigmas)):
        onehot = np.zeros((fis.n_rules, c.size))
        onehot[np.arange(fis.n_rules), fis.antecedents[:, i]] = 1.0
        A = G @ onehot
        diff = Xn[:, i:i + 1] - c
        d_c.append(np.sum(A * diff / s**2, axis=0))
        d_s.append(np.sum(A * diff**2 / s**3, axis=0))
    return d_c, d_s


def _mse(fis, Xn, yn):
    r = yn - predict_fis(fis, Xn, normalized=True)
    return float(np.mean(r * r))


def _safe_r(a, p):
    try:
        return pearson_r(a, p)
    except ConstantInput:
        return None


def _evaluate(fis, split):
    half = fis.norm.target_half_range
    parts = {"train": split.train, "validation": split.validation, "test": split.test}
    out, actual, predicted, labels = {}, [], [], []
    for name, part in parts.items():
        if len(part) == 0:
            out[name] = out[name + "_norm"] = None
            continue
        p = predict_fis(fis, part.inputs)
        m = float(np.mean((part.targets - p) ** 2))
        out[name], out[name + "_norm"] = m, m / half**2
        actual.append(part.targets)
        predicted.append(p)
        labels += [name] * len(part)
    actual, predicted = np.concatenate(actual), np.concatenate(predicted)
    m = float(np.mean((actual - predicted) ** 2))
    out["network"], out["network_norm"] = m, m / half**2
    out["r"] = _safe_r(actual, predicted)
    out["fit"] = {"partition": np.array(labels), "actual": actual, "predicted": predicted}
    return out


def cell_name(n_mfs, order):
    m = n_mfs if np.ndim(n_mfs) == 0 else "x".join(str(v) for v in n_mfs)
    return f"anfis-{m}mf-{order}"


def train_hybrid(fis, split, epochs=100, lr_premise=0.01, max_fail=MAX_FAIL, seed=None):
    """Hybrid least-squares / gradient-descent training.

    Each epoch: solve the consequents by least squares with the premise
    fixed, record training and validation MSE for that (premise,
    consequent) pair, then take one gradient step on the premise with the
    current step size (decayed by LR_DECAY per epoch; sigma floored at
    SIGMA_FLOOR). Training stops after ``max_fail`` consecutive rises of
    the validation error; the best-validation model is returned.

    Losses in ``loss_trace``/``validation_trace`` are normalised-space MSE,
    one entry per epoch.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    norm = fis.norm
    X, y = norm.scale_inputs(split.train.inputs), norm.scale_targets(split.train.targets)
    has_val = len(split.validation) > 0
    if has_val:
        Xv = norm.scale_inputs(split.validation.inputs)
        yv = norm.scale_targets(split.validation.targets)

    centers = [np.array(c) for c in fis.centers]
    sigmas = [np.array(s) for s in fis.sigmas]
    lr = float(lr_premise)
    trace, val_trace = [], []
    best, best_val, fails = None, np.inf, 0
    rank_deficient = 0
    max_cond = 0.0
    stop_reason = "max_epochs"
    current = fis
    epoch = 0
    for epoch in range(1, epochs + 1):
        current = fis.with_params(centers=centers, sigmas=sigmas)
        current, res = fit_consequents(current, X, y)
        rank_deficient += int(res.rank_deficient)
        max_cond = max(max_cond, res.cond)
        trace.append(_mse(current, X, y))
        val = _mse(current, Xv, yv) if has_val else trace[-1]
        val_trace.append(val)
        if val < best_val:
            best, best_val, fails = current, val, 0
        elif val > best_val:
            fails += 1
        if has_val and fails >= max_fail:
            stop_reason = "validation_patience"
            break
        if epoch == epochs:
            break
        if lr > 0:
            d_c, d_s = _premise_gradient(current, X, y)
            centers = [c - lr * g for c, g in zip(centers, d_c)]
            sigmas = [np.maximum(s - lr * g, 2.0 * SIGMA_FLOOR) for s, g in zip(sigmas, d_s)]
            lr *= LR_DECAY

    trained = best if best is not None else current
    ev = _evaluate(trained, split)
    report = TrainReport(
        algorithm=cell_name(fis.n_mfs[0] if len(set(fis.n_mfs)) == 1 else fis.n_mfs, fis.order),
        epochs_run=epoch,
        train_mse=ev["train"],
        validation_mse=ev["validation"],
        test_mse=ev["test"],
        network_mse=ev["network"],
        r_value=ev["r"],
        stop_reason=stop_reason,
        train_mse_norm=ev["train_norm"],
        validation_mse_norm=ev["validation_norm"],
        test_mse_norm=ev["test_norm"],
        network_mse_norm=ev["network_norm"],
        loss_trace=trace,
        validation_trace=val_trace,
        seed=seed,
        details={
            "n_mfs": list(fis.n_mfs),
            "order": fis.order,
            "n_rules": fis.n_rules,
            "lr_premise": float(lr_premise),
            "rank_deficient_epochs": rank_deficient,
            "max_condition": max_cond,
        },
        fit=ev["fit"],
    )
    return trained, report


def run_anfis_comparison(dataset, n_mfs_list=(2, 4), orders=ORDERS, seed=42, epochs=100,
                         lr_premise=0.01, counts=None, ratios=(2 / 3, 1 / 6, 1 / 6),
                         shuffle=True):
    """Train every (MF count, order) cell on one shared split.

    The default ratios give 400/100/100 rows for a 600-row dataset; pass
    ``counts`` to fix the partition sizes explicitly. Each report's
    ``fit`` holds the per-row traces; ``partition_trace(report)`` extracts the
    (index, actual, predicted) test series.
    """
    parts = split_rows(dataset, ratios, seed=seed, counts=counts, shuffle=shuffle)
    norm = NormParams.fit(dataset)
    ranges = [(-1.0, 1.0)] * dataset.n_inputs
    reports = []
    for m in n_mfs_list:
        for order in orders:
            fis0 = grid_partition(ranges, m, order, norm)
            _, rep = train_hybrid(fis0, parts, epochs, lr_premise, seed=seed)
            reports.append(rep)
    return reports


def partition_trace(report, partition="test"):
    """(index, actual_s, predicted_s) rows of one partition, in split order."""
    mask = report.fit["partition"] == partition
    actual = report.fit["actual"][mask]
    predicted = report.fit["predicted"][mask]
    return [(i, float(a), float(p)) for i, (a, p) in enumerate(zip(actual, predicted))]
