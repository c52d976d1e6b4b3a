import numpy as np
import pytest

from indist.dataset import Dataset
from indist.synth import SynthConfig, generate

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_ds(X, y, yh=None, **kw):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    yh = y.copy() if yh is None else np.asarray(yh, dtype=float)
    return Dataset(features=X, outcome=y, expert=yh, row_ids=np.arange(len(y)).astype(str), **kw)


@pytest.fixture(scope="session")
def synth_small():
    return generate(SynthConfig(n=2000, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
