import os
import sys

import numpy as np
import pytest

from lsmkit.data import FactorTable
from lsmkit.factors import CATEGORICAL, CONTINUOUS, FactorMeta

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_table(rows, labels=None, names=None, kinds=None, coords=None):
    rows = np.asarray(rows, dtype=np.float64)
    names = names or [f"F{i + 1}" for i in range(rows.shape[1])]
    kinds = kinds or [CONTINUOUS] * len(names)
    metas = tuple(FactorMeta(n, kind=k) for n, k in zip(names, kinds))
    return FactorTable(metas, rows, labels, coords)


@pytest.fixture
def toy_table(rng):
    """Two informative factors, one noise factor and one categorical factor."""
    n = 400
    X = rng.standard_normal((n, 3))
    cat = rng.integers(1, 4, n).astype(float)
    logit = 2.0 * X[:, 0] - 1.5 * X[:, 1] + 0.8 * (cat == 2)
    y = (rng.random(n) < 1 / (1 + np.exp(-logit))).astype(int)
    return make_table(np.column_stack([X, cat]), y, ["A", "B", "C", "K"],
                      [CONTINUOUS, CONTINUOUS, CONTINUOUS, CATEGORICAL])


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
