import numpy as np
import pytest

from autodiff import functional as F
from autodiff.functional import PRIMITIVES
from cli.bench import MIN_REPS, Timing, bench_paths, parse_layer, run_bench
from cli.gradcheck_suite import op_cases, run_full, run_layer, run_ops, run_suite, worst_offender
from models.style_hypernet import LayerShape


def test_every_primitive_has_a_case():
    names = [case.name for case in op_cases(np.random.default_rng(0))]
    assert sorted(names) == sorted(PRIMITIVES)


def test_all_primitives_pass():
    results = run_ops()
    failed = [(r.name, r.report.max_rel_error) for r in results if not r.passed]
    assert not failed
    assert all(r.report.checked > 0 for r in results)


def test_a_broken_backward_is_named(monkeypatch):
    monkeypatch.setattr(F.Cos, "backward", lambda self, g: (g * np.sin(self.inputs[0].data),))
    results = run_ops()
    assert [r.name for r in results if not r.passed] == ["cos"]
    assert worst_offender(results).name == "cos"


def test_modulated_layer_passes():
    results = run_layer()
    assert [r.name for r in results] == ["modconv[i]", "modconv[ii]"]
    assert all(r.passed for r in results)


@pytest.mark.slow
def test_full_model_passes():
    (result,) = run_full(max_elements=2)
    assert result.passed
    assert any(name.startswith("d.") for name in result.report.per_tensor)


def test_unknown_scope():
    with pytest.raises(ValueError):
        run_suite("everything")


@pytest.mark.parametrize("text", ["512,512,3", "a,b,c,d", "4,0,3,3", ""])
def test_parse_layer_rejects(text):
    with pytest.raises(ValueError):
        parse_layer(text)


def test_parse_layer():
    assert parse_layer("512,256,3,1") == LayerShape(512, 256, 3, 1)


def test_bench_counts_and_timings():
    result = run_bench(LayerShape(8, 8, 3, 3), d_h=16, rank=2, reps=MIN_REPS, styles=4)
    assert result.lowrank_params == 16 * 2 * 14
    assert result.fullrank_params == 16 * 8 * 8 * 9
    assert result.lowrank_time.mean_ms >= 0 and result.fullrank_time.std_ms >= 0
    with pytest.raises(ValueError):
        run_bench(LayerShape(8, 8, 3, 3), d_h=16, rank=1, reps=MIN_REPS - 1)


def test_timing_renders_mean_and_spread():
    assert str(Timing(1.23456, 0.5)) == "1.235 ± 0.500 ms"


@pytest.mark.parametrize("layer", [LayerShape(8, 4, 3, 3), LayerShape(3, 2000, 3, 3)])
def test_both_bench_paths_end_in_attention(layer):
    lowrank_path, fullrank_path = bench_paths(layer, d_h=4, rank=2, styles=5)
    for record in (lowrank_path(), fullrank_path()):
        assert record.logits.shape == (layer.c_out, 5)
        assert record.attended.shape == (layer.c_out, layer.flat_dim)
        np.testing.assert_allclose(record.probs.sum(axis=1), 1.0, atol=1e-12)
