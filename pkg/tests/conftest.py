"""Shared fixtures: small graphs with hand-checkable structure."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bslbench.graphs import Dag


@pytest.fixture
def chain4() -> Dag:
    """0 -> 1 -> 2 -> 3."""
    return Dag(4, ((0, 1), (1, 2), (2, 3)))


@pytest.fixture
def collider() -> Dag:
    """0 -> 2 <- 1 (the unshielded collider)."""
    return Dag(3, ((0, 2), (1, 2)))


@pytest.fixture
def diamond() -> Dag:
    """0 -> 1 -> 3, 0 -> 2 -> 3."""
    return Dag(4, ((0, 1), (0, 2), (1, 3), (2, 3)))


@pytest.fixture
def star5() -> Dag:
    """Hub 4 with parents 0..3 (in-degree 4)."""
    return Dag(5, ((0, 4), (1, 4), (2, 4), (3, 4)))
