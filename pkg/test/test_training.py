import csv

import numpy as np
import pytest

from autodiff import functional as F
from autodiff.nn import Parameter
from msgv_types.errors import ConfigError, NonFiniteError
from msgv_types.utils import latest_checkpoint
from training import trainer
from training.ablation import ABLATION_NAME, run_ablation
from training.checkpoint import load_checkpoint
from training.metrics_log import COLUMNS, MetricsLog, MetricsRow, read_metrics
from training.optim import Adam
from training.trainer import (
    FINAL_CHECKPOINT,
    METRICS_NAME,
    build_state,
    checkpoint_name,
    load_generator,
    restore_state,
    run_training,
    sample_clip_times,
)


@pytest.mark.parametrize("length, frames, gap", [(64, 3, 8), (16, 2, 4), (5, 5, 8), (10, 4, 1)])
def test_clip_times_are_ordered_and_bounded(length, frames, gap):
    rng = np.random.default_rng(0)
    for _ in range(200):
        times = sample_clip_times(rng, length, frames, gap)
        assert times.shape == (frames,)
        assert times[0] >= 0 and times[-1] < length
        gaps = np.diff(times)
        assert np.all(gaps >= 1) and np.all(gaps <= gap)


def test_full_length_sample_is_every_frame():
    np.testing.assert_array_equal(sample_clip_times(np.random.default_rng(1), 4, 4), [0, 1, 2, 3])


@pytest.mark.parametrize("length, frames, gap", [(2, 3, 8), (8, 0, 8), (8, 2, 0)])
def test_clip_time_preconditions(length, frames, gap):
    with pytest.raises(ValueError):
        sample_clip_times(np.random.default_rng(0), length, frames, gap)


def test_checkpoint_names_sort_by_step():
    assert checkpoint_name(7) == "ckpt_00000007.msgv"
    assert sorted([checkpoint_name(100), checkpoint_name(20)])[0] == checkpoint_name(20)


def test_adam_first_step_moves_by_lr():
    p = Parameter(np.array([1.0, -1.0]))
    opt = Adam([("p", p)], lr=0.1, beta1=0.0, beta2=0.99)
    p.grad = np.array([3.0, -0.5])
    opt.step()
    np.testing.assert_allclose(p.data, [0.9, -0.9], atol=1e-7)
    restored = Adam([("p", p)])
    restored.load_state_dict(opt.state_dict("opt"), "opt")
    assert restored.t == 1
    np.testing.assert_array_equal(restored.v["p"], opt.v["p"])


def test_metrics_log_truncates_on_resume(tmp_path):
    log = MetricsLog(tmp_path / "m.csv")
    for step in range(1, 5):
        log.append(MetricsRow(step, 1.0, 2.0, 0.5, 0.0, 0.1, 0.2))
    log.truncate_after(2)
    assert [row.step for row in read_metrics(log.path)] == [1, 2]
    MetricsLog(log.path)  # reopening keeps the rows
    assert log.path.read_text().splitlines()[0] == ",".join(COLUMNS)
    assert len(read_metrics(log.path)) == 2


def test_training_writes_metrics_and_checkpoints(tmp_path, run_config):
    state = run_training(build_state(run_config), tmp_path)
    assert state.step == 4
    rows = read_metrics(tmp_path / METRICS_NAME)
    assert [row.step for row in rows] == [1, 2, 3, 4]
    assert all(np.isfinite([row.loss_d, row.loss_g, row.l_div]).all() for row in rows)
    assert rows[0].r1 == 0.0 and rows[1].r1 > 0.0
    for name in (checkpoint_name(2), checkpoint_name(4), FINAL_CHECKPOINT):
        assert (tmp_path / name).is_file()
    assert latest_checkpoint(tmp_path) == tmp_path / FINAL_CHECKPOINT
    ckpt = load_checkpoint(tmp_path / FINAL_CHECKPOINT)
    assert ckpt.step == 4 and ckpt.config_text == run_config.to_text()
    assert set(ckpt.rng_states) == {"noise", "data"}


def test_training_is_reproducible(tmp_path, run_config):
    run_training(build_state(run_config), tmp_path / "a")
    run_training(build_state(run_config), tmp_path / "b")
    assert (tmp_path / "a" / METRICS_NAME).read_bytes() == (tmp_path / "b" / METRICS_NAME).read_bytes()
    assert (tmp_path / "a" / FINAL_CHECKPOINT).read_bytes() == (tmp_path / "b" / FINAL_CHECKPOINT).read_bytes()


def test_resumed_run_matches_uninterrupted_run(tmp_path, run_config):
    config = run_config.with_overrides(total_steps=12)
    straight = run_training(build_state(config), tmp_path / "straight")

    run_training(build_state(config), tmp_path / "resumed", total_steps=3)
    state = restore_state(load_checkpoint(tmp_path / "resumed" / checkpoint_name(2)))
    assert state.step == 2
    resumed = run_training(state, tmp_path / "resumed")
    assert resumed.step == 12

    assert (tmp_path / "resumed" / METRICS_NAME).read_bytes() == (tmp_path / "straight" / METRICS_NAME).read_bytes()
    for (name, a), (_, b) in zip(straight.generator.named_parameters(), resumed.generator.named_parameters()):
        np.testing.assert_array_equal(a.data, b.data, err_msg=name)


def test_one_step_moves_every_module(tmp_path, run_config):
    state = build_state(run_config)
    nets = {"g": state.generator, "d": state.discriminator}
    before = {(net, name): p.data.copy() for net, module in nets.items() for name, p in module.named_parameters()}
    run_training(state, tmp_path, total_steps=1)

    moved = {}
    for net, module in nets.items():
        for name, p in module.named_parameters():
            owner = (net, name.rsplit(".", 1)[0])
            moved[owner] = moved.get(owner, False) or not np.array_equal(p.data, before[(net, name)])
    assert len(moved) > 10
    assert [owner for owner, changed in moved.items() if not changed] == []


def test_other_seed_gives_other_run(tmp_path, run_config):
    run_training(build_state(run_config), tmp_path / "a", total_steps=1)
    run_training(build_state(run_config.with_overrides(seed=4)), tmp_path / "b", total_steps=1)
    assert read_metrics(tmp_path / "a" / METRICS_NAME) != read_metrics(tmp_path / "b" / METRICS_NAME)


def test_variants_train(tmp_path, run_config):
    for overrides in ({"motion_diff": False}, {"k": 0}, {"use_div": False}, {"strategy": "ii", "rank": 2}):
        config = run_config.with_overrides(**overrides)
        state = run_training(build_state(config), tmp_path / "_".join(overrides), total_steps=1)
        assert state.step == 1


def test_non_finite_loss_stops_training(tmp_path, run_config, monkeypatch):
    monkeypatch.setattr(trainer, "generator_loss", lambda logits: F.mean(logits) * float("nan"))
    with pytest.raises(NonFiniteError) as err:
        run_training(build_state(run_config), tmp_path)
    assert err.value.step == 1
    assert not (tmp_path / FINAL_CHECKPOINT).exists()


def test_load_generator_restores_weights(tmp_path, run_config):
    state = run_training(build_state(run_config), tmp_path, total_steps=2)
    generator, config = load_generator(tmp_path / FINAL_CHECKPOINT)
    assert config == run_config
    for (name, a), (_, b) in zip(state.generator.named_parameters(), generator.named_parameters()):
        np.testing.assert_array_equal(a.data, b.data, err_msg=name)


def test_latest_checkpoint_prefers_final_then_highest_step(tmp_path):
    assert latest_checkpoint(tmp_path / "missing") is None
    assert latest_checkpoint(tmp_path) is None
    for step in (2, 10, 4):
        (tmp_path / checkpoint_name(step)).write_bytes(b"")
    (tmp_path / "ckpt_12.msgv").write_bytes(b"")
    assert latest_checkpoint(tmp_path) == tmp_path / checkpoint_name(10)
    (tmp_path / FINAL_CHECKPOINT).write_bytes(b"")
    assert latest_checkpoint(tmp_path) == tmp_path / FINAL_CHECKPOINT


@pytest.mark.slow
def test_ablation_writes_one_row_per_arm(tmp_path, run_config):
    rows = run_ablation(run_config, "k", ["0", "4"], tmp_path, steps=1)
    assert [row.value for row in rows] == ["0", "4"]
    assert all(np.isfinite(row.frechet) and row.frechet >= 0 for row in rows)
    with (tmp_path / ABLATION_NAME).open(newline="") as fh:
        table = list(csv.reader(fh))
    assert table[0] == ["key", "value", "frechet"]
    assert [r[:2] for r in table[1:]] == [["k", "0"], ["k", "4"]]
    assert (tmp_path / "k=0" / FINAL_CHECKPOINT).is_file()


def test_ablation_validates_before_training(tmp_path, run_config):
    with pytest.raises(ValueError):
        run_ablation(run_config, "resolution", ["32"], tmp_path)
    with pytest.raises(ConfigError):
        run_ablation(run_config, "strategy", ["i", "iii"], tmp_path)
    assert not (tmp_path / "strategy=i").exists()
