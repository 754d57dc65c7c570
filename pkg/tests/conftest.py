"""Shared fixtures: small meshes of every model domain and a clean config."""

import pytest

from skewdrift.config.settings import config
from skewdrift.fem.mesh import Domain, build_mesh


@pytest.fixture(autouse=True)
def clean_config():
    config.reset_to_defaults()
    yield
    config.reset_to_defaults()


@pytest.fixture(scope="session")
def square():
    return build_mesh(Domain("unit_square"), 8)


@pytest.fixture(scope="session")
def disk():
    return build_mesh(Domain("unit_disk"), 16)


@pytest.fixture(scope="session")
def cube():
    return build_mesh(Domain("unit_cube"), 4)


@pytest.fixture(scope="session")
def ball():
    return build_mesh(Domain("unit_ball"), 8)


@pytest.fixture
def write_config(tmp_path):
    """Write an experiment file and return its path."""

    def write(text, name="experiment.cfg"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return write
