"""Pytest configuration to isolate tests from user config files and environment."""

import os
import tempfile
import pytest
from pathlib import Path
from unittest.mock import patch


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-running fit tests (set TRIMODE_SLOW_TESTS=1)')


def pytest_collection_modifyitems(config, items):
    if os.environ.get('TRIMODE_SLOW_TESTS') == '1':
        return
    skip_slow = pytest.mark.skip(reason='set TRIMODE_SLOW_TESTS=1 to run')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def isolate_config(monkeypatch):
    """Automatically isolate each test from user config files and TRIMODE_* variables."""
    for name in list(os.environ):
        if name.startswith('TRIMODE_') and name != 'TRIMODE_SLOW_TESTS':
            monkeypatch.delenv(name, raising=False)
    # Create a temporary home directory
    with tempfile.TemporaryDirectory() as temp_home:
        monkeypatch.setenv('HOME', temp_home)
        # Also set USERPROFILE for Windows compatibility
        monkeypatch.setenv('USERPROFILE', temp_home)

        # Patch Path.home() to return our temp home
        with patch.object(Path, 'home', return_value=Path(temp_home)):
            yield
