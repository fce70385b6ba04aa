import sys

import numpy as np
import pytest

from cycletime.dataset import Dataset, generate_synthetic, split


@pytest.fixture(scope="session")
def synthetic600():
    return generate_synthetic(600, seed=42, noise_sd=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def linear_split(n=40, slope=2.0, intercept=0.0, lo=-1.0, hi=1.0, seed=0, n_inputs=1, coefs=None):
    """Noise-free linear data split 70/15/15 (identity scaling is applied by the models)."""
    r = np.random.default_rng(seed)
    X = r.uniform(lo, hi, size=(n, n_inputs))
    if coefs is None:
        coefs = np.full(n_inputs, slope)
    y = X @ np.asarray(coefs, dtype=float) + intercept
    return split(Dataset(X, y), (0.7, 0.15, 0.15), seed=seed)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion that ran."""
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        passed, title, detail = mod.RESULTS[number]
        terminalreporter.write_line(mod.format_line(number, passed, title, detail))
