import os

# single-threaded BLAS keeps every run bitwise reproducible
os.environ.setdefault("MSGV_THREADS", "1")
from utils.env import configure_threads  # noqa: E402

configure_threads()

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from helpers import tiny_generator_config, tiny_run_config  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def gen_config():
    return tiny_generator_config()


@pytest.fixture
def run_config():
    return tiny_run_config()


@pytest.fixture
def config_file(tmp_path, run_config):
    path = tmp_path / "tiny.cfg"
    path.write_text("# tiny run\n" + run_config.to_text(), encoding="utf-8")
    return path
