"""Error and correlation metrics used in every training report."""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LengthMismatch",
    "EmptyInput",
    "ConstantInput",
    "RegressionStats",
    "mse",
    "pearson_r",
    "stats",
]


class LengthMismatch(ValueError):
    pass


class EmptyInput(ValueError):
    pass


class ConstantInput(ValueError):
    """Pearson R is undefined when either vector has zero variance."""


def _pair(actual, predicted):
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if a.shape != p.shape:
        raise LengthMismatch(f"lengths differ: {a.size} vs {p.size}")
    if a.size == 0:
        raise EmptyInput("metrics need at least one value")
    return a, p


def mse(actual, predicted):
    a, p = _pair(actual, predicted)
    return float(np.mean((a - p) ** 2))


def pearson_r(actual, predicted):
    a, p = _pair(actual, predicted)
    if a.size < 2:
        raise EmptyInput("Pearson R needs at least two points")
    da = a - a.mean()
    dp = p - p.mean()
    sa = np.sqrt(np.dot(da, da))
    sp = np.sqrt(np.dot(dp, dp))
    # relative to magnitude, so tiny jitter from rounding still counts as constant
    tol = 1e-14 * np.sqrt(a.size)
    if sa <= tol * max(np.abs(a).max(), 1e-300) or sp <= tol * max(np.abs(p).max(), 1e-300):
        raise ConstantInput("correlation is undefined for a constant vector")
    r = np.dot(da / sa, dp / sp)
    return float(np.clip(r, -1.0, 1.0))


@dataclass(frozen=True)
class RegressionStats:
    mse: float
    r_value: float
    n: int
    residual_min: float
    residual_max: float
    residual_mean: float


def stats(actual, predicted):
    """MSE, Pearson R and a residual summary (residual = actual - predicted)."""
    a, p = _pair(actual, predicted)
    res = a - p
    return RegressionStats(
        mse=mse(a, p),
        r_value=pearson_r(a, p),
        n=int(a.size),
        residual_min=float(res.min()),
        residual_max=float(res.max()),
        residual_mean=float(res.mean()),
    )
