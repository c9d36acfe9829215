import numpy as np
import pytest

from autodiff.gradcheck import check_tensors
from autodiff import functional as F
from autodiff.tensor import Tensor
from models.motion_codes import MotionEncoder, num_anchors_for, sample_motion_noise
from msgv_types.types import MotionNoiseTrack


def softplus(x):
    return np.logaddexp(0.0, x)


def test_motion_noise_is_seeded():
    a = sample_motion_noise(7, 4, 8, 16.0)
    b = sample_motion_noise(7, 4, 8, 16.0)
    np.testing.assert_array_equal(a.anchors, b.anchors)
    assert a.anchors.shape == (4, 8) and a.duration == 48.0
    assert not np.array_equal(a.anchors, sample_motion_noise(8, 4, 8, 16.0).anchors)


def test_motion_noise_is_standard_normal():
    track = sample_motion_noise(0, 100_000, 1, 1.0)
    assert abs(track.anchors.mean()) < 0.02
    assert abs(track.anchors.var() - 1.0) < 0.05


@pytest.mark.parametrize("anchors, spacing", [(1, 16.0), (4, 0.0), (4, -1.0)])
def test_motion_noise_preconditions(anchors, spacing):
    with pytest.raises(ValueError):
        sample_motion_noise(0, anchors, 4, spacing)


def test_num_anchors_covers_requested_time():
    assert num_anchors_for(63.0, 16.0) == 5
    assert num_anchors_for(64.0, 16.0) == 5
    assert num_anchors_for(0.0, 16.0) == 2


def test_identity_temporal_conv_passes_anchors_through(rng):
    encoder = MotionEncoder(4, 3, rng, num_layers=1, identity_init=True)
    track = sample_motion_noise(1, 6, 4, 2.0)
    np.testing.assert_allclose(encoder.temporal_conv(track).data, track.anchors, atol=1e-12)


def test_temporal_conv_is_shift_invariant_away_from_edges(rng):
    encoder = MotionEncoder(2, 3, rng, num_layers=1, kernel_size=3)
    encoder.conv_weights[0].data = np.full((2, 2, 3), 1.0 / encoder.gain / 6.0)
    track = MotionNoiseTrack(anchors=np.full((8, 2), 0.7), anchor_spacing=1.0, seed=0)
    out = encoder.temporal_conv(track).data
    np.testing.assert_allclose(out[1:-1], 0.7, atol=1e-12)
    assert out.shape == (8, 2)


def test_zero_head_gives_baseline_waves(rng):
    encoder = MotionEncoder(4, 5, rng)
    encoder.head.weight.data[:] = 0.0
    encoder.head.bias.data[:] = 0.0
    track = sample_motion_noise(2, 3, 4, 8.0)
    params = encoder.wave_params(encoder.temporal_conv(track), 1)
    np.testing.assert_allclose(params.amplitudes.data, softplus(1.0))
    np.testing.assert_allclose(params.angular_frequencies.data, softplus(1.0) * encoder.base_frequencies)
    np.testing.assert_array_equal(params.phases.data, 0.0)
    np.testing.assert_allclose(2 * np.pi / encoder.base_frequencies[[0, -1]], [2.0, 64.0])


def test_wave_params_are_positive_and_interval_specific(rng):
    encoder = MotionEncoder(4, 6, rng)
    features = encoder.temporal_conv(sample_motion_noise(3, 4, 4, 8.0))
    first, second = encoder.wave_params(features, 0), encoder.wave_params(features, 1)
    assert np.all(first.amplitudes.data >= 0) and np.all(first.angular_frequencies.data > 0)
    assert not np.allclose(first.phases.data, second.phases.data)
    with pytest.raises(IndexError):
        encoder.wave_params(features, 4)


def test_zero_amplitudes_give_zero_codes(rng):
    encoder = MotionEncoder(4, 3, rng)
    encoder.head.weight.data[:3] = 0.0
    encoder.head.bias.data[:3] = -1000.0
    track = sample_motion_noise(0, 3, 4, 8.0)
    codes = encoder.codes(encoder.temporal_conv(track), [0.0, 3.3, 12.0], track.anchor_spacing)
    np.testing.assert_array_equal(codes.data, 0.0)


def test_codes_are_continuous_across_anchors(rng):
    encoder = MotionEncoder(4, 8, rng)
    track = sample_motion_noise(5, 4, 4, 8.0)
    features = encoder.temporal_conv(track)
    left, right = encoder.codes(features, [8.0 - 1e-12, 8.0 + 1e-12], 8.0).data
    np.testing.assert_allclose(left, right, atol=1e-9)


def test_code_differences_shrink_linearly(rng):
    encoder = MotionEncoder(4, 8, rng)
    track = sample_motion_noise(6, 4, 4, 8.0)
    features = encoder.temporal_conv(track)
    t = 5.3
    v = encoder.codes(features, [t, t + 1e-3, t + 1e-4], 8.0).data
    big, small = np.linalg.norm(v[1] - v[0]), np.linalg.norm(v[2] - v[0])
    assert big > 0
    assert big / small == pytest.approx(10.0, rel=0.05)


def test_times_past_the_track_hold_last_parameters(rng):
    encoder = MotionEncoder(4, 3, rng)
    track = sample_motion_noise(0, 2, 4, 4.0)
    features = encoder.temporal_conv(track)
    last = encoder.wave_params(features, 1)
    v = encoder.codes(features, [100.0], 4.0).data[0]
    expected = last.amplitudes.data * np.sin(last.angular_frequencies.data * 100.0 + last.phases.data)
    np.testing.assert_allclose(v, expected, rtol=1e-12)


def test_negative_time_rejected(rng):
    encoder = MotionEncoder(4, 3, rng)
    track = sample_motion_noise(0, 2, 4, 4.0)
    with pytest.raises(ValueError):
        encoder.motion_code(track, -1.0)


def test_motion_code_is_bounded_by_amplitudes(rng):
    encoder = MotionEncoder(4, 6, rng)
    track = sample_motion_noise(9, 3, 4, 8.0)
    code = encoder.motion_code(track, 4.0)
    features = encoder.temporal_conv(track)
    # t=4 sits halfway between the first two anchors
    bound = 0.5 * (encoder.wave_params(features, 0).amplitudes.data + encoder.wave_params(features, 1).amplitudes.data)
    assert code.values.shape == (6,) and code.t == 4.0
    assert np.all(np.abs(code.values) <= bound + 1e-12)


def test_different_seeds_give_different_trajectories(rng):
    encoder = MotionEncoder(4, 6, rng)
    times = np.linspace(0.0, 15.0, 7)
    a = encoder.codes(encoder.temporal_conv(sample_motion_noise(1, 3, 4, 8.0)), times, 8.0).data
    b = encoder.codes(encoder.temporal_conv(sample_motion_noise(2, 3, 4, 8.0)), times, 8.0).data
    assert np.linalg.norm(a - b) > 0


def test_codes_are_differentiable_end_to_end(rng):
    encoder = MotionEncoder(3, 4, rng, num_layers=2, kernel_size=3)
    track = sample_motion_noise(4, 4, 3, 2.0)
    cotangent = Tensor(rng.standard_normal((3, 4)))
    tensors = {
        "conv0": encoder.conv_weights[0],
        "conv1": encoder.conv_weights[1],
        "head": encoder.head.weight,
    }
    report = check_tensors(
        lambda: F.sum(encoder.codes(encoder.temporal_conv(track), [0.5, 2.0, 4.7], 2.0) * cotangent), tensors
    )
    assert report.passed(1e-4)
