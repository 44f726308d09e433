import re
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
ML100K = ROOT / "data" / "ml-100k" / "u.data"
ML1M = ROOT / "data" / "ml-1m" / "ratings.dat"


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def ml100k_path():
    if not ML100K.exists():
        pytest.skip(f"MovieLens 100K not found at {ML100K}; see scripts/fetch_ml100k.py")
    return ML100K


@pytest.fixture(autouse=True)
def _isolate_cache_env(monkeypatch):
    # a developer's cache override must not leak into tests
    monkeypatch.delenv("GSPREC_CACHE_DIR", raising=False)


# criterion id -> (status, detail); filled by the acceptance suite
ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    def record(criterion, passed, detail, status=None):
        ACCEPTANCE[criterion] = (status or ("PASS" if passed else "FAIL"), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE, key=lambda c: (int(re.match(r"\d+", c).group()), c)):
        status, detail = ACCEPTANCE[criterion]
        terminalreporter.write_line(f"criterion {criterion}: {status}  {detail}")
