import os
from pathlib import Path

import numpy as np
import pytest

import acceptance_log
from synthetic_ctg import make_ctg_like, write_ctg_like

ROOT = Path(__file__).resolve().parents[1]


def reference_csv_path():
    """The public 2126-row fetal_health.csv, if present."""
    candidates = [os.environ.get("CTG_DATA"), ROOT / "data" / "fetal_health.csv", ROOT / "fetal_health.csv"]
    for c in candidates:
        if c and Path(c).is_file():
            return Path(c)
    return None


@pytest.fixture(scope="session")
def ctg_like():
    return make_ctg_like(n=600, seed=0, separation=0.4)


@pytest.fixture
def ctg_like_csv(tmp_path):
    path = tmp_path / "fetal_health.csv"
    write_ctg_like(path, n=300, seed=1, separation=0.5)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in acceptance_log.TITLES.items():
        if n in acceptance_log.RESULTS:
            passed, detail = acceptance_log.RESULTS[n]
            tag = "PASS" if passed else "FAIL"
        else:
            tag, detail = "NOT RUN", ""
        line = f"[{tag}] criterion {n:>2}: {title}"
        terminalreporter.write_line(line + (f" -- {detail}" if detail else ""))
