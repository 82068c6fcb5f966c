import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from semjoin.model import Table, Tuple  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def golden():
    return GOLDEN


def make_table(n, size=5, prefix="t", start=0):
    """``n`` tuples of constant token size with distinct texts."""
    return Table(tuple(Tuple(start + i, f"{prefix}{start + i}", size) for i in range(n)), "fixed")


@pytest.fixture
def small_tables():
    return make_table(7, 4, "a"), make_table(5, 3, "b")
