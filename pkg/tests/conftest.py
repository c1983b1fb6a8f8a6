from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixture_bench import build_financial_db, build_library_db

from hisql.model import DatabaseProfile


@pytest.fixture(scope="session")
def financial_path(tmp_path_factory) -> Path:
    return build_financial_db(tmp_path_factory.mktemp("dbs") / "financial.sqlite")


@pytest.fixture(scope="session")
def financial_db(financial_path) -> DatabaseProfile:
    return DatabaseProfile(db_id="financial", file_path=str(financial_path))


@pytest.fixture(scope="session")
def library_path(tmp_path_factory) -> Path:
    return build_library_db(tmp_path_factory.mktemp("dbs2") / "library.sqlite")


@pytest.fixture(scope="session")
def library_db(library_path) -> DatabaseProfile:
    return DatabaseProfile(db_id="library", file_path=str(library_path))
