import numpy as np
import pytest

from autodiff.gradcheck import check_tensors
from autodiff import functional as F
from autodiff.tensor import Tensor
from models.style_hypernet import LayerShape, StyleNetworks, hyper_param_count, lowrank_reconstruct
from msgv_types.errors import ShapeError, UnknownLayerError

from helpers import tiny_generator_config

LAYERS = {"b8.conv0": LayerShape(6, 5, 3, 3), "b8.conv1": LayerShape(4, 6, 3, 3)}


def loop_oracle(style, c_in, k_h, k_w):
    out = np.zeros((c_in, k_h, k_w))
    for r in range(style.shape[0]):
        v1, v2, v3 = style[r, :c_in], style[r, c_in:c_in + k_h], style[r, c_in + k_h:]
        for i in range(c_in):
            for h in range(k_h):
                for w in range(k_w):
                    out[i, h, w] += v1[i] * v2[h] * v3[w]
    return out


@pytest.fixture
def networks(rng):
    return StyleNetworks(tiny_generator_config(), LAYERS, rng)


def test_reconstruct_small_example():
    style = Tensor(np.array([[1.0, 2.0, 3.0, 5.0]]))
    out = lowrank_reconstruct(style, 2, 1, 1)
    np.testing.assert_array_equal(out.data, [[[15.0]], [[30.0]]])


def test_reconstruct_all_ones():
    out = lowrank_reconstruct(Tensor(np.ones((1, 4 + 3 + 3))), 4, 3, 3)
    np.testing.assert_array_equal(out.data, np.ones((4, 3, 3)))


def test_reconstruct_matches_loop_oracle(rng):
    for _ in range(100):
        c_in, k_h, k_w, rank = (int(v) for v in rng.integers(1, 6, size=4))
        style = rng.standard_normal((rank, c_in + k_h + k_w))
        out = lowrank_reconstruct(Tensor(style), c_in, k_h, k_w)
        np.testing.assert_allclose(out.data, loop_oracle(style, c_in, k_h, k_w), atol=1e-10)


def test_reconstruct_batches_over_leading_axes(rng):
    styles = rng.standard_normal((2, 3, 2, 4 + 3 + 3))
    out = lowrank_reconstruct(Tensor(styles), 4, 3, 3)
    assert out.shape == (2, 3, 4, 3, 3)
    np.testing.assert_allclose(out.data[1, 2], loop_oracle(styles[1, 2], 4, 3, 3), atol=1e-12)


@pytest.mark.parametrize("rank", [1, 2, 3])
def test_reconstruction_rank_is_bounded(rng, rank):
    style = rng.standard_normal((rank, 6 + 3 + 3))
    unfolded = lowrank_reconstruct(Tensor(style), 6, 3, 3).data.reshape(6, 9)
    singular = np.linalg.svd(unfolded, compute_uv=False)
    assert np.all(singular[rank:] < 1e-8)


def test_reconstruct_rejects_bad_length():
    with pytest.raises(ShapeError):
        lowrank_reconstruct(Tensor(np.ones((1, 9))), 4, 3, 3)


def test_param_counts_match_the_accounting():
    layer = LayerShape(512, 512, 3, 3)
    low, full = hyper_param_count(layer, 128, 1)
    assert (low, full) == (66_304, 301_989_888)
    assert 512 * 512 * 3 * 3 == 2_359_296
    assert hyper_param_count(layer, 128, 3)[0] == 3 * low
    with pytest.raises(ValueError):
        hyper_param_count(layer, 0, 1)


def test_content_path_is_time_agnostic(networks, rng):
    z_c = rng.standard_normal(8)
    w1 = networks.map_content(z_c).w.data
    w2 = networks.map_content(z_c).w.data
    np.testing.assert_array_equal(w1, w2)
    s = networks.affine_style(Tensor(w1), "b8.conv1").s
    assert s.shape == (6,)
    assert networks.affine_style(Tensor(w1), "b8.conv0").s.shape == (5,)


def test_zero_final_mapping_layer_gives_bias(networks, rng):
    last = networks.mapping.layers[-1]
    last.weight.data[:] = 0.0
    last.bias.data = np.arange(8.0)
    np.testing.assert_array_equal(networks.map_content(rng.standard_normal(8)).w.data, np.arange(8.0))


def test_zero_affine_weight_gives_unit_style(networks, rng):
    networks.affines["b8.conv0"].weight.data[:] = 0.0
    s = networks.affine_style(networks.map_content(rng.standard_normal(8)).w, "b8.conv0").s
    np.testing.assert_array_equal(s.data, np.ones(5))


def test_unknown_layer_is_rejected(networks):
    with pytest.raises(UnknownLayerError):
        networks.affine_style(Tensor(np.ones(8)), "b64.conv0")
    with pytest.raises(UnknownLayerError):
        networks.layer("nope")


def test_motion_vectors_depend_on_time_only_through_v(networks, rng):
    w = networks.map_content(rng.standard_normal(8)).w
    zero = Tensor(np.zeros(4))
    a = networks.motion_vectors(w, zero, t=1.0).vectors.data
    b = networks.motion_vectors(w, zero, t=9.0).vectors.data
    c = networks.motion_vectors(w, Tensor(rng.standard_normal(4)), t=9.0).vectors.data
    assert a.shape == (4, 8)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_default_motion_vector_shape(rng):
    cfg = tiny_generator_config(d_c=16, d_v=4, k=8, d_m=128, motion_hidden=32)
    nets = StyleNetworks(cfg, {"l": LayerShape(4, 4, 3, 3)}, rng)
    m = nets.motion_vectors(nets.map_content(rng.standard_normal(16)).w, Tensor(np.zeros(4)))
    assert m.vectors.shape == (8, 128)


@pytest.mark.parametrize("rank", [1, 3])
def test_hyper_style_shape(rng, rank):
    cfg = tiny_generator_config(rank=rank)
    nets = StyleNetworks(cfg, {"big": LayerShape(8, 512, 3, 3)}, rng)
    m = nets.motion_vectors(nets.map_content(rng.standard_normal(8)).w, Tensor(np.zeros(4)))
    styles = nets.hyper_styles(m, "big")
    assert styles.styles.shape == (4, rank, 518)
    assert styles.rank == rank


def test_identical_motion_vectors_give_identical_styles(networks, rng):
    m = networks.motion_vectors(networks.map_content(rng.standard_normal(8)).w, Tensor(np.zeros(4)))
    m.vectors = F.broadcast_to(m.vectors[:1], m.vectors.shape)
    styles = networks.hyper_styles(m, "b8.conv0").styles.data
    np.testing.assert_allclose(styles[0], styles[3], rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("rank", [1, 2])
def test_initial_modulation_is_near_ones(rng, rank):
    nets = StyleNetworks(tiny_generator_config(rank=rank), LAYERS, rng)
    m = nets.motion_vectors(nets.map_content(rng.standard_normal(8)).w, Tensor(rng.standard_normal(4)))
    motion = nets.modulation_matrix(m, "b8.conv1").data
    assert motion.shape == (4, 6 * 3 * 3)
    assert np.abs(motion - 1.0).max() < 0.5


def test_no_motion_styles_with_k_zero(rng):
    nets = StyleNetworks(tiny_generator_config(k=0), LAYERS, rng)
    assert not nets.has_motion_styles
    assert not hasattr(nets, "hyper_heads")
    with pytest.raises(ValueError):
        nets.motion_vectors(Tensor(np.ones(8)), Tensor(np.ones(4)))


def test_param_report_per_layer(networks):
    report = dict((layer_id, (low, full)) for layer_id, _, low, full in networks.param_report(128))
    assert report["b8.conv0"] == (128 * (5 + 3 + 3), 128 * 6 * 5 * 9)


def test_style_networks_are_differentiable(networks, rng):
    z_c = rng.standard_normal(8)
    v = rng.standard_normal(4)
    cotangent = Tensor(rng.standard_normal((4, 6 * 9)))

    def loss():
        w = networks.map_content(z_c).w
        m = networks.motion_vectors(w, Tensor(v))
        return F.sum(networks.modulation_matrix(m, "b8.conv1") * cotangent) + F.sum(
            networks.affine_style(w, "b8.conv1").s
        )

    tensors = {
        "mapping": networks.mapping.layers[0].weight,
        "affine": networks.affines["b8.conv1"].weight,
        "motion": networks.motion_net.layers[1].weight,
        "trunk": networks.hyper_trunk.weight,
        "head": networks.hyper_heads["b8.conv1"].weight,
    }
    report = check_tensors(loss, tensors, max_elements=20, rng=rng)
    assert report.passed(1e-4)
