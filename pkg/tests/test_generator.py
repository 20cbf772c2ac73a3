import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import max_rel_err, oracle_data_probs, sequential_generate
from pqwgan import generator as G
from pqwgan import qsim
from pqwgan.errors import ConfigError, PostSelectionError


def small_config(**kw):
    base = dict(n_patches=4, n_data=3, n_ancilla=1, n_layers=2, image_height=4, image_width=8)
    base.update(kw)
    return G.GeneratorConfig(**base)


# --- configuration --------------------------------------------------------

def test_default_config_is_row_patches():
    c = G.GeneratorConfig()
    assert (c.patch_height, c.patch_width, c.n_qubits) == (1, 28, 8)


@pytest.mark.parametrize(
    "kw,fragment",
    [
        (dict(n_patches=5), "must divide"),
        (dict(n_patches=4, patch_height=7, patch_width=4), "patch_height*patch_width"),
        (dict(n_patches=7, patch_height=16, patch_width=7), "tile"),
        (dict(n_data=4), "2**n_data"),
        (dict(n_data=20, n_ancilla=1), "qubit limit"),
        (dict(prior_kind="cauchy"), "prior_kind"),
        (dict(n_layers=-1), "n_layers"),
    ],
)
def test_config_violations_name_the_constraint(kw, fragment):
    with pytest.raises(ConfigError, match=fragment.replace("*", r"\*")):
        G.GeneratorConfig(**kw)


@settings(max_examples=60)
@given(P=st.sampled_from([1, 2, 4, 7, 14, 28, 49, 98, 196, 392, 784]), D=st.integers(1, 12))
def test_config_accepts_exactly_when_basis_is_large_enough(P, D):
    pixels = 784 // P
    fits = 2**D >= pixels and D + 1 <= qsim.MAX_QUBITS
    layout = {49: (4, 4), 98: (2, 4), 196: (2, 2), 392: (1, 2), 784: (1, 1)}
    kw = dict(n_patches=P, n_data=D, n_ancilla=1, n_layers=1)
    if P in layout:
        kw.update(patch_height=layout[P][0], patch_width=layout[P][1])
    if fits:
        G.GeneratorConfig(**kw)
    else:
        with pytest.raises(ConfigError):
            G.GeneratorConfig(**kw)


@pytest.mark.parametrize(
    "P,L,A,D,expected",
    [(28, 8, 1, 7, 5376), (1, 153, 1, 10, 5049), (28, 15, 1, 5, 7560), (1, 1, 0, 1, 3)],
)
def test_count_parameters(P, L, A, D, expected):
    kw = dict(n_patches=P, n_layers=L, n_ancilla=A, n_data=D)
    if (P, D) == (1, 1):
        kw.update(image_height=1, image_width=2)
    assert G.count_parameters(G.GeneratorConfig(**kw)) == expected


def test_init_params_shape_and_range():
    c = small_config()
    th = G.init_params(c, np.random.default_rng(0))
    assert th.shape == c.params_shape and th.min() >= 0 and th.max() < np.pi


# --- encoding and sub-generators ------------------------------------------

def test_encode_zero_and_pi():
    assert G.encode_latent(np.zeros(3), 3).amplitudes[0] == 1
    amps = G.encode_latent(np.full(3, np.pi), 3).amplitudes
    np.testing.assert_allclose(np.abs(amps[-1]), 1, atol=1e-15)


@given(z=st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_encode_keeps_unit_norm(z):
    assert abs(G.encode_latent(np.array(z), 4).norm_squared() - 1) < 1e-12


def test_encode_dimension_mismatch():
    with pytest.raises(ConfigError):
        G.encode_latent(np.zeros(3), 4)


def test_sub_generator_with_no_layers_and_zero_latent():
    c = small_config(n_layers=0)
    out = G.sub_generator_forward(np.zeros((0, 4, 3)), np.zeros(4), c)
    np.testing.assert_array_equal(out, [1, 0, 0, 0, 0, 0, 0, 0])


def test_sub_generator_fails_with_ancilla_flipped():
    c = small_config(n_layers=0)
    with pytest.raises(PostSelectionError):
        G.sub_generator_forward(np.zeros((0, 4, 3)), np.array([np.pi, 0, 0, 0]), c)


def test_sub_generator_matches_density_oracle():
    c = small_config(n_layers=2)
    rng = np.random.default_rng(42)
    p = rng.uniform(0, np.pi, (2, 4, 3))
    z = rng.random(4)
    out = G.sub_generator_forward(p, z, c)
    np.testing.assert_allclose(out, oracle_data_probs(4, p, 2, 1, encode=z), atol=1e-12)
    assert abs(out.sum() - 1) < 1e-12


def test_postselection_error_identifies_sample_and_patch():
    c = small_config(n_layers=0)
    zs = np.zeros((3, 4))
    zs[2, 0] = np.pi
    with pytest.raises(PostSelectionError) as info:
        G.generate_batch(np.zeros((4, 0, 4, 3)), zs, c)
    assert (info.value.sample, info.value.patch) == (2, 0)


# --- postprocessing and assembly ------------------------------------------

def test_postprocess_examples():
    np.testing.assert_allclose(G.postprocess_patch([0.1, 0.4, 0.25, 0.25], 3), [0.25, 1.0, 0.625])
    np.testing.assert_array_equal(G.postprocess_patch([1.0], 1), [1.0])
    np.testing.assert_array_equal(G.postprocess_patch([0.25] * 4, 4), [1, 1, 1, 1])


def test_postprocess_errors():
    with pytest.raises(ValueError):
        G.postprocess_patch([0.0, 0.0], 1)
    with pytest.raises(ConfigError):
        G.postprocess_patch([0.5, 0.5], 3)


def test_row_patches_fill_rows():
    c = G.GeneratorConfig()
    patches = np.arange(784, dtype=float).reshape(28, 28)
    img = G.assemble_image(patches, c)
    for i in range(28):
        np.testing.assert_array_equal(img[i], patches[i])


def test_seven_by_four_patches_tile_horizontally_first():
    c = G.GeneratorConfig(n_patches=28, n_data=5, patch_height=7, patch_width=4)
    patches = np.repeat(np.arange(28.0)[:, None], 28, axis=1)
    img = G.assemble_image(patches, c)
    for i in range(28):
        r, col = 7 * (i // 7), 4 * (i % 7)
        assert (img[r : r + 7, col : col + 4] == i).all()


def test_single_patch_is_identity_layout():
    c = G.GeneratorConfig(n_patches=1, n_data=10)
    flat = np.arange(784.0)
    np.testing.assert_array_equal(G.assemble_image(flat[None], c), flat.reshape(28, 28))


@pytest.mark.parametrize(
    "P,ph,pw", [(28, 1, 28), (28, 7, 4), (1, 28, 28), (2, 14, 28), (4, 7, 28), (49, 4, 4), (14, 2, 28)]
)
def test_assembly_is_a_bijection(P, ph, pw):
    c = G.GeneratorConfig(n_patches=P, n_data=10, patch_height=ph, patch_width=pw)
    idx = G.patch_index(c).ravel()
    assert np.array_equal(np.sort(idx), np.arange(784))


def test_assemble_rejects_wrong_layout():
    with pytest.raises(ConfigError):
        G.assemble_image(np.zeros((27, 28)), G.GeneratorConfig())


# --- full forward ---------------------------------------------------------

def test_generate_no_layers_zero_latent_rows():
    c = G.GeneratorConfig(n_data=5, n_layers=0)
    img = G.generate(np.zeros(c.params_shape), np.zeros(c.n_qubits), c)
    expected = np.zeros(28)
    expected[0] = 1
    for row in img:
        np.testing.assert_array_equal(row, expected)


def test_generate_pixel_range_on_random_inputs():
    c = small_config()
    rng = np.random.default_rng(9)
    for _ in range(100):
        th = rng.uniform(-np.pi, np.pi, c.params_shape)
        img = G.generate(th, rng.random(4), c)
        assert img.min() >= 0 and img.max() <= 1


def test_each_patch_peaks_at_one_when_max_is_kept():
    c = small_config(n_data=3, image_width=8)  # 8 pixels per patch, nothing truncated
    rng = np.random.default_rng(4)
    img = G.generate(G.init_params(c, rng), rng.random(4), c)
    for i, idx in enumerate(G.patch_index(c)):
        assert img.ravel()[idx].max() == 1.0


@pytest.mark.parametrize("cfg", [
    dict(n_patches=4, n_data=3, n_ancilla=1, n_layers=2, image_height=4, image_width=6),
    dict(n_patches=2, n_data=3, n_ancilla=2, n_layers=3, image_height=4, image_width=4,
         patch_height=2, patch_width=4),
    dict(n_patches=4, n_data=2, n_ancilla=0, n_layers=1, image_height=4, image_width=4,
         patch_height=2, patch_width=2),
])
def test_generate_matches_sequential_oracle_bit_exactly(cfg):
    c = G.GeneratorConfig(**cfg)
    rng = np.random.default_rng(21)
    th = G.init_params(c, rng)
    for _ in range(3):
        z = rng.random(c.n_qubits)
        assert np.array_equal(G.generate(th, z, c), sequential_generate(th, z, c))


def test_batch_equals_single_generation():
    c = small_config()
    rng = np.random.default_rng(8)
    th = G.init_params(c, rng)
    zs = rng.random((5, 4))
    batch = G.generate_batch(th, zs, c)
    for b in range(5):
        assert np.array_equal(batch[b], G.generate(th, zs[b], c))


def test_generate_rejects_bad_shapes():
    c = small_config()
    with pytest.raises(ConfigError):
        G.generate(np.zeros((4, 1, 4, 3)), np.zeros(4), c)
    with pytest.raises(ConfigError):
        G.generate(np.zeros(c.params_shape), np.zeros(3), c)


def test_continuity_in_latent():
    c = small_config()
    rng = np.random.default_rng(17)
    th = G.init_params(c, rng)
    for _ in range(20):
        z = rng.random(4)
        k = int(rng.integers(4))
        e = np.zeros(4)
        e[k] = 1
        base = G.generate(th, z, c)
        small = np.max(np.abs(G.generate(th, z + 1e-4 * e, c) - base))
        large = np.max(np.abs(G.generate(th, z + 1e-3 * e, c) - base))
        assert small <= 0.11 * large


# --- backward -------------------------------------------------------------

def test_backward_zero_upstream():
    c = small_config()
    rng = np.random.default_rng(0)
    th = G.init_params(c, rng)
    assert not G.generator_backward(th, rng.random(4), c, np.zeros((4, 8))).any()


def test_backward_is_patch_local():
    c = G.GeneratorConfig(n_patches=8, n_data=3, n_ancilla=1, n_layers=2, image_height=8, image_width=8)
    rng = np.random.default_rng(1)
    th = G.init_params(c, rng)
    up = np.zeros((8, 8))
    up.ravel()[G.patch_index(c)[3]] = rng.standard_normal(8)
    g = G.generator_backward(th, rng.random(4), c, up)
    assert np.abs(g[3]).max() > 0
    assert not np.delete(g, 3, axis=0).any()


def _fd_check(c, seed, weights=None):
    rng = np.random.default_rng(seed)
    th = G.init_params(c, rng)
    z = rng.random(c.n_qubits)
    up = np.ones((c.image_height, c.image_width)) if weights is None else weights(rng, c)
    g = G.generator_backward(th, z, c, up)
    fd = qsim.finite_difference_grad(lambda t: float(np.sum(up * G.generate(t, z, c))), th, 1e-5)
    return max_rel_err(g, fd)


def test_backward_matches_finite_differences_pixel_sum():
    c = G.GeneratorConfig(n_patches=2, n_data=3, n_ancilla=1, n_layers=2, image_height=2, image_width=6,
                          patch_height=1, patch_width=6)
    assert _fd_check(c, 5) < 1e-6


def test_backward_one_patch_three_plus_one_qubits_weighted():
    c = G.GeneratorConfig(n_patches=1, n_data=3, n_ancilla=1, n_layers=3, image_height=1, image_width=8)
    assert _fd_check(c, 6, lambda rng, c: rng.standard_normal((1, 8))) < 1e-6


def test_backward_through_truncation_and_multiple_ancillas():
    c = G.GeneratorConfig(n_patches=2, n_data=3, n_ancilla=2, n_layers=2, image_height=2, image_width=5,
                          patch_height=1, patch_width=5)
    assert _fd_check(c, 7, lambda rng, c: rng.standard_normal((2, 5))) < 1e-6


def test_batch_backward_is_sum_of_single_backwards():
    c = small_config()
    rng = np.random.default_rng(2)
    th = G.init_params(c, rng)
    zs = rng.random((3, 4))
    up = rng.standard_normal((3, 4, 8))
    total = sum(G.generator_backward(th, zs[b], c, up[b]) for b in range(3))
    np.testing.assert_allclose(G.generator_backward_batch(th, zs, c, up), total, atol=1e-13)
