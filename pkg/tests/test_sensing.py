import numpy as np
import pytest

from multilook import sensing
from multilook.errors import StructuralError, ValidationError


class TestScene:
    def test_clipping(self):
        scene = sensing.Scene(pixels=np.array([[-0.5, 0.0], [0.5, 1.5]]))
        assert scene.pixels.min() == sensing.DEFAULT_X_MIN
        assert scene.pixels.max() == 1.0

    def test_rejects_non_2d(self):
        with pytest.raises(StructuralError):
            sensing.Scene(pixels=np.zeros(4))

    def test_synthetic_deterministic(self):
        a = sensing.synthetic_scene(32, 32, seed=5).pixels
        b = sensing.synthetic_scene(32, 32, seed=5).pixels
        np.testing.assert_array_equal(a, b)
        assert a.min() >= sensing.DEFAULT_X_MIN and a.max() <= 1.0

    def test_image_roundtrip(self, tmp_path):
        scene = sensing.synthetic_scene(16, 16, seed=1)
        path = tmp_path / "scene.png"
        sensing.save_image(path, scene.pixels)
        back = sensing.load_scene(path)
        # 8-bit quantization, so agreement only to half a level
        assert np.max(np.abs(back.pixels - scene.pixels)) <= 0.5 / 255 + 1e-12


class TestComplexGaussian:
    def test_component_variance(self):
        rng = np.random.default_rng(0)
        w = sensing.complex_gaussian(rng, 200_000, sigma=2.0)
        # E|w|^2 = sigma^2, per-component variance sigma^2 / 2
        assert np.mean(np.abs(w) ** 2) == pytest.approx(4.0, rel=0.02)
        assert np.var(w.real) == pytest.approx(2.0, rel=0.03)
        assert np.var(w.imag) == pytest.approx(2.0, rel=0.03)


class TestHaarPartial:
    def test_scalar_is_unit_modulus(self):
        a = sensing.haar_partial(1, 1, seed=0)
        assert abs(np.abs(a[0, 0]) - 1.0) < 1e-12

    @pytest.mark.parametrize("m,n", [(4, 8), (8, 16), (16, 16)])
    def test_orthonormal_rows(self, m, n):
        a = sensing.haar_partial(m, n, seed=3)
        gram = a @ a.conj().T
        assert np.linalg.norm(gram - np.eye(m)) <= 1e-10

    def test_row_norms(self):
        a = sensing.haar_partial(8, 16, seed=4)
        norms = np.linalg.norm(a, axis=1)
        np.testing.assert_allclose(norms, np.ones(8), atol=1e-12)

    def test_deterministic(self):
        np.testing.assert_array_equal(sensing.haar_partial(4, 8, 7),
                                      sensing.haar_partial(4, 8, 7))

    def test_m_greater_than_n_rejected(self):
        with pytest.raises(ValidationError):
            sensing.haar_partial(5, 4, seed=0)


class TestGaussianMatrix:
    def test_deterministic(self):
        np.testing.assert_array_equal(sensing.gaussian_matrix(4, 6, 1),
                                      sensing.gaussian_matrix(4, 6, 1))

    def test_moments(self):
        g = sensing.gaussian_matrix(32, 256, seed=11)
        assert -0.05 <= g.mean() <= 0.05
        assert 0.9 <= g.var() <= 1.1

    def test_singular_value_concentration(self):
        # sqrt(n) - sqrt(m) - t <= s_min <= s_max <= sqrt(n) + sqrt(m) + t
        # with t = 2 sqrt(m), on at least 99 of 100 seeds
        m, n = 32, 256
        t = 2.0 * np.sqrt(m)
        lo = np.sqrt(n) - np.sqrt(m) - t
        hi = np.sqrt(n) + np.sqrt(m) + t
        ok = 0
        for seed in range(100):
            sv = np.linalg.svd(sensing.gaussian_matrix(m, n, seed),
                               compute_uv=False)
            if lo <= sv.min() and sv.max() <= hi:
                ok += 1
        assert ok >= 99


class TestSimulate:
    def test_zero_scene_gives_pure_noise(self):
        # a scene at the clip floor is almost zero; use x_min tiny to make it exact
        scene = sensing.Scene(pixels=np.full((1, 4), 1e-300), x_min=1e-300)
        a = sensing.haar_partial(2, 4, seed=0)
        ens = sensing.simulate(scene, a, 3, sigma_w=1.0, sigma_z=0.5, seed=1)
        ref = sensing.simulate(scene, a, 3, sigma_w=0.0, sigma_z=0.5, seed=1)
        for y, z in zip(ens.looks, ref.looks):
            assert np.max(np.abs(y - z)) < 1e-290

    def test_zero_noise_gives_zero(self):
        scene = sensing.synthetic_scene(2, 2, seed=0)
        a = sensing.haar_partial(2, 4, seed=0)
        ens = sensing.simulate(scene, a, 2, sigma_w=0.0, sigma_z=0.0, seed=1)
        for y in ens.looks:
            np.testing.assert_array_equal(y, np.zeros(2))

    def test_speckle_power_law_of_large_numbers(self):
        # A = I, sigma_z = 0: (1/L) sum |y_i|^2 -> x_i^2
        n, looks = 16, 20_000
        scene = sensing.synthetic_scene(4, 4, seed=2)
        a = np.eye(n, dtype=complex)
        ens = sensing.simulate(scene, a, looks, sigma_w=1.0, sigma_z=0.0, seed=3)
        power = np.mean(np.abs(np.stack(ens.looks)) ** 2, axis=0)
        ratio = power / scene.flat() ** 2
        assert np.all(ratio > 0.95) and np.all(ratio < 1.05)

    def test_looks_are_distinct_and_deterministic(self):
        scene = sensing.synthetic_scene(2, 4, seed=0)
        a = sensing.haar_partial(4, 8, seed=0)
        e1 = sensing.simulate(scene, a, 3, 1.0, 0.1, seed=9)
        e2 = sensing.simulate(scene, a, 3, 1.0, 0.1, seed=9)
        for y1, y2 in zip(e1.looks, e2.looks):
            np.testing.assert_array_equal(y1, y2)
        assert not np.allclose(e1.looks[0], e1.looks[1])

    def test_scene_matrix_mismatch(self):
        scene = sensing.synthetic_scene(2, 2, seed=0)
        a = sensing.haar_partial(2, 8, seed=0)
        with pytest.raises(StructuralError):
            sensing.simulate(scene, a, 1, 1.0, 0.0, seed=0)


class TestSerialization:
    def test_roundtrip_bit_exact(self, tmp_path):
        scene = sensing.synthetic_scene(2, 4, seed=0)
        a = sensing.haar_partial(4, 8, seed=0)
        ens = sensing.simulate(scene, a, 3, 1.0, 0.25, seed=5)
        path = tmp_path / "ens.npz"
        ens.save(path)
        back = sensing.MeasurementEnsemble.load(path)
        np.testing.assert_array_equal(back.a, ens.a)
        assert back.num_looks == 3
        for y1, y2 in zip(back.looks, ens.looks):
            np.testing.assert_array_equal(y1, y2)
        assert back.sigma_w == 1.0 and back.sigma_z == 0.25 and back.seed == 5

    def test_bad_version_rejected(self, tmp_path):
        path = tmp_path / "bad.npz"
        np.savez(path, format_version=np.int64(99))
        with pytest.raises(ValidationError):
            sensing.MeasurementEnsemble.load(path)


class TestInitEstimate:
    def test_single_look_identity(self):
        n = 4
        scene = sensing.Scene(pixels=np.full((1, n), 0.5))
        a = np.eye(n, dtype=complex)
        ens = sensing.simulate(scene, a, 1, 1.0, 0.0, seed=0)
        x0 = sensing.init_estimate(ens)
        ref = np.clip(np.abs(ens.looks[0]), sensing.DEFAULT_X_MIN, 1.0)
        np.testing.assert_allclose(x0, ref, atol=1e-14)

    def test_zero_looks_clip_floor(self):
        a = sensing.haar_partial(2, 4, seed=0)
        ens = sensing.MeasurementEnsemble(a=a, looks=[np.zeros(2, complex)])
        x0 = sensing.init_estimate(ens)
        np.testing.assert_array_equal(x0, np.full(4, sensing.DEFAULT_X_MIN))

    def test_matches_elementwise_recomputation(self):
        scene = sensing.synthetic_scene(2, 4, seed=1)
        a = sensing.haar_partial(4, 8, seed=1)
        ens = sensing.simulate(scene, a, 5, 1.0, 0.1, seed=2)
        x0 = sensing.init_estimate(ens)
        ref = np.zeros(8)
        for j in range(8):
            for y in ens.looks:
                ref[j] += abs(sum(np.conj(a[i, j]) * y[i] for i in range(4)))
        ref = np.clip(ref / 5, sensing.DEFAULT_X_MIN, 1.0)
        np.testing.assert_allclose(x0, ref, atol=1e-12)
        assert np.max(np.abs(x0 - ref)) <= 1e-12
