import shutil

import pytest

from backreg.fixtures import generate_store
from backreg.store import load_store


@pytest.fixture(scope="session")
def session_store(tmp_path_factory):
    """A small generated store shared read-only across tests."""
    root = tmp_path_factory.mktemp("store")
    generate_store(root, seed=123, patients=2)
    return root


@pytest.fixture
def store_copy(session_store, tmp_path):
    """A private mutable copy of the session store."""
    dst = tmp_path / "store"
    shutil.copytree(session_store, dst)
    return dst


@pytest.fixture
def records(store_copy):
    return load_store(store_copy)
