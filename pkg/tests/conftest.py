import numpy as np
import pytest

from chbs import diskfem


@pytest.fixture(scope="session")
def tiny_ops():
    return diskfem.assemble(diskfem.gen_disk_mesh(2, 8))


@pytest.fixture(scope="session")
def small_ops():
    return diskfem.assemble(diskfem.gen_disk_mesh(8, 24))


@pytest.fixture(scope="session")
def desk_ops():
    return diskfem.assemble(diskfem.gen_disk_mesh(40, 160))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
