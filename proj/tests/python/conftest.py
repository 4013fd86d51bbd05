from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return Path(__file__).resolve().parents[1] / "data"


@pytest.fixture(scope="session")
def chain(data_dir):
    import spinney

    return spinney.load_model(str(data_dir / "chain.model"))
