"""Shared fixtures: one long-lived service cluster for tests that only need
live endpoints, and helpers for the ones that must own their own processes.
"""

from __future__ import annotations

import shutil
import tempfile
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from healthvault.harness.procs import Cluster

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def pytest_collection_modifyitems(items):
    # Acceptance tests are the expensive, end-to-end gate; run them last so
    # a broken unit surfaces in seconds rather than after a long soak.
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")


@pytest.fixture(scope="session")
def cluster():
    """Registry + vault + data host shared by read-mostly service tests.

    Tests that sever data-tier hosts must build their own Cluster; this one
    is shared state. App-host attacks are fine: apps are per-test anyway.
    """
    base = Path(tempfile.mkdtemp(prefix="healthvault-suite-"))
    c = Cluster(base)
    c.start_core()
    yield c
    c.shutdown()
    shutil.rmtree(base, ignore_errors=True)


@pytest.fixture
def announce(capsys):
    """Print one PASS/FAIL line straight to the terminal, then assert."""

    def _announce(name: str, ok: bool, detail: str) -> None:
        line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} - {detail}"
        with capsys.disabled():
            print(line, flush=True)
        assert ok, line

    return _announce
