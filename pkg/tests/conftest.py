from __future__ import annotations

from pathlib import Path

import pytest

from docbench import _fastpath

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = FIXTURES / "golden"


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Compile the numba kernels once so timing assertions measure steady
    # state, not JIT latency.
    _fastpath.warmup()


@pytest.fixture
def golden_dir() -> Path:
    return GOLDEN
