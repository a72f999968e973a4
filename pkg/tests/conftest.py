import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mnist_paths():
    """Gzipped IDX train/test files, built from mlxtend's bundled subset if absent."""
    sys.path.insert(0, str(ROOT / "scripts"))
    from prepare_mnist import TEST_NAME, TRAIN_NAME, prepare

    train, test = DATA / TRAIN_NAME, DATA / TEST_NAME
    if not (train.exists() and test.exists()):
        pytest.importorskip("mlxtend", reason="MNIST IDX files missing and mlxtend unavailable")
        prepare(DATA)
    return train, test


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
