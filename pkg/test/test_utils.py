import logging

import numpy as np
import pytest

from msgv_types.errors import ConfigError
from msgv_types.types import GeneratorConfig, RunConfig
from utils.env import THREAD_VARS, configure_threads
from utils.utils import parse_sweep, parse_times, read_pgm, read_ppm, setup_logging, to_uint8, write_pgm, write_ppm


@pytest.mark.parametrize("text, expected", [
    ("0..3", [0.0, 1.0, 2.0, 3.0]),
    ("5..5", [5.0]),
    ("0.5,2,7.25", [0.5, 2.0, 7.25]),
    (" 1, 2 ,", [1.0, 2.0]),
])
def test_parse_times(text, expected):
    assert parse_times(text) == expected


@pytest.mark.parametrize("text", ["3..1", "a..b", "0.5..2", "x,y", ""])
def test_parse_times_rejects(text):
    with pytest.raises(ValueError):
        parse_times(text)


def test_parse_sweep():
    assert parse_sweep("k=0,4, 8") == ("k", ["0", "4", "8"])
    for bad in ("k", "=1,2", "k="):
        with pytest.raises(ValueError):
            parse_sweep(bad)


def test_ppm_round_trip(tmp_path, rng):
    frame = rng.uniform(-1, 1, size=(3, 5, 7))
    path = write_ppm(tmp_path / "f.ppm", frame)
    assert path.read_bytes().startswith(b"P6\n7 5\n255\n")
    np.testing.assert_allclose(read_ppm(path), frame, atol=1.0 / 255 + 1e-12)
    with pytest.raises(ValueError):
        write_ppm(tmp_path / "g.ppm", frame[:2])
    with pytest.raises(ValueError):
        read_pgm(path)


def test_pgm_round_trip(tmp_path):
    image = np.linspace(0.0, 1.0, 12).reshape(3, 4)
    path = write_pgm(tmp_path / "m.pgm", image)
    assert path.read_bytes()[:11] == b"P5\n4 3\n255\n"
    np.testing.assert_allclose(read_pgm(path), image, atol=0.5 / 255 + 1e-12)
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "n.pgm", image[None])


def test_netpbm_comments_are_skipped(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
    np.testing.assert_array_equal(read_pgm(path), [[0.0, 1.0]])


def test_to_uint8_clips_and_rounds():
    np.testing.assert_array_equal(to_uint8(np.array([-2.0, -1.0, 0.0, 1.0, 3.0])), [0, 0, 128, 255, 255])


def test_configure_threads(monkeypatch):
    for var in THREAD_VARS:
        monkeypatch.delenv(var, raising=False)
    monkeypatch.setenv("MSGV_THREADS", "3")
    monkeypatch.setenv("MKL_NUM_THREADS", "2")
    assert configure_threads() == 3
    import os

    assert os.environ["OMP_NUM_THREADS"] == "3"
    assert os.environ["MKL_NUM_THREADS"] == "2"
    monkeypatch.setenv("MSGV_THREADS", "lots")
    assert configure_threads() == 1


def test_setup_logging_levels():
    setup_logging(verbose=True)
    assert logging.getLogger().level == logging.DEBUG
    assert logging.getLogger("numba").level == logging.WARNING
    setup_logging()
    assert logging.getLogger().level == logging.INFO


def test_config_text_round_trip(run_config):
    text = run_config.to_text()
    assert RunConfig.from_text("# header\n\n" + text) == run_config
    assert "channels=8,8" in text and "demodulate=true" in text


def test_config_file_and_defaults(config_file, run_config):
    assert RunConfig.from_file(config_file) == run_config
    defaults = RunConfig.from_text("")
    assert defaults.generator.k == 8 and defaults.generator.resolution == 32
    assert defaults.train.lambda_div == 1.0


def test_config_errors_name_the_key(run_config):
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("kk=8\n")
    assert err.value.key == "kk"
    with pytest.raises(ConfigError) as err:
        run_config.with_overrides(k=-1)
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text("rank=two\n")
    assert err.value.key == "rank"
    with pytest.raises(ConfigError):
        RunConfig.from_text("just words\n")


def test_overrides_change_only_the_named_key(run_config):
    changed = run_config.with_overrides(strategy="ii", lambda_div=0.5)
    assert changed.generator.strategy == "ii" and changed.train.lambda_div == 0.5
    assert changed.generator.channels == run_config.generator.channels
    assert run_config.generator.strategy == "i"


@pytest.mark.parametrize("overrides", [
    {"resolution": 24},
    {"resolution": 4, "channels": []},
    {"channels": [8]},
])
def test_generator_shape_validation(overrides):
    values = dict(resolution=16, channels=[8, 8])
    values.update(overrides)
    with pytest.raises(ValueError):
        GeneratorConfig(**values)
