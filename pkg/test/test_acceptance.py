import csv

import numpy as np
import pytest
from click.testing import CliRunner

from cli.cli import cli
from models.generator import GeneratorNet
from msgv_types.errors import ConfigError
from training.acceptance import ACCEPTANCE_NAME, AcceptanceReport, SeedResult, run_acceptance, style_checks
from training.trainer import FINAL_CHECKPOINT

from helpers import tiny_generator_config


def result(seed, frechet_k, frechet_single, moving=3, cosine=0.5):
    return SeedResult(seed, frechet_k, frechet_single, moving, 0.01, cosine)


def test_k_must_win_two_of_three_seeds():
    report = AcceptanceReport(k=8, steps=10, seeds=[result(0, 1.0, 2.0), result(1, 3.0, 2.0), result(2, 1.0, 1.0)])
    assert report.frechet_ok and report.passed
    report.seeds[2] = result(2, 1.5, 1.0)
    assert not report.frechet_ok and not report.passed


def test_attention_and_cosine_verdicts():
    assert not AcceptanceReport(8, 10, [result(0, 1.0, 2.0, moving=1)]).attention_ok
    assert not AcceptanceReport(8, 10, [result(0, 1.0, 2.0, cosine=0.95)]).cosine_ok
    assert AcceptanceReport(8, 10, [result(0, 1.0, 2.0, moving=2, cosine=0.89)]).passed


def test_style_checks_on_a_fresh_generator():
    generator = GeneratorNet(tiny_generator_config(), np.random.default_rng(0))
    moving, max_std, cosine = style_checks(generator, seed=1, frames=8)
    assert 0 <= moving <= 4
    assert max_std >= 0.0 and 0.0 <= cosine <= 1.0
    assert style_checks(generator, seed=1, frames=8) == (moving, max_std, cosine)
    with pytest.raises(ValueError):
        style_checks(GeneratorNet(tiny_generator_config(k=1), np.random.default_rng(0)), seed=1)


def test_single_style_config_is_rejected(tmp_path, run_config):
    with pytest.raises(ConfigError) as err:
        run_acceptance(run_config.with_overrides(k=1), tmp_path)
    assert err.value.key == "k"
    with pytest.raises(ValueError):
        run_acceptance(run_config, tmp_path, seeds=[])


def test_command_rejects_single_style_config(tmp_path, run_config):
    path = tmp_path / "k1.cfg"
    path.write_text(run_config.with_overrides(k=1).to_text())
    result = CliRunner().invoke(cli, ["acceptance", str(path), str(tmp_path / "out")], catch_exceptions=False)
    assert result.exit_code == 2


@pytest.mark.slow
def test_acceptance_run_writes_one_row_per_seed(tmp_path, run_config):
    report = run_acceptance(run_config, tmp_path, seeds=[0, 1], steps=1)
    assert report.k == 4 and report.steps == 1
    assert [r.seed for r in report.seeds] == [0, 1]
    assert all(np.isfinite([r.frechet_k, r.frechet_single, r.mean_offdiag_cosine]).all() for r in report.seeds)
    for seed in (0, 1):
        for arm in ("k=4", "k=1"):
            assert (tmp_path / f"seed={seed}" / arm / FINAL_CHECKPOINT).is_file()
    with (tmp_path / ACCEPTANCE_NAME).open(newline="") as fh:
        table = list(csv.reader(fh))
    assert table[0][:4] == ["seed", "steps", "frechet_k4", "frechet_k1"]
    assert [row[:2] for row in table[1:]] == [["0", "1"], ["1", "1"]]
