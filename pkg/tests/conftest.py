"""Shared fixtures; this file also anchors the tests directory on sys.path."""

import pytest

from faasched import default_catalog


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()
