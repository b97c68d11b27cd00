import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stratus.config import ServiceConfig, bundled_catalog, bundled_sim_params


@pytest.fixture(scope="session")
def snapshot():
    return bundled_catalog()


@pytest.fixture(scope="session")
def sim_params():
    return bundled_sim_params()


@pytest.fixture
def service(tmp_path):
    """Fresh in-process service with isolated record and work directories."""
    from stratus.gateway.service import StratusService

    cfg = ServiceConfig(record_dir=tmp_path / "records",
                        workdir_root=tmp_path / "work")
    svc = StratusService(cfg)
    yield svc
    svc.close()
