import numpy as np
import pytest

from multilook import cxla, sensing
from multilook.errors import NumericalError, StructuralError, ValidationError


def random_block(m, seed, jitter=1.0):
    """Random PD block matrix built from a Hermitian Gram matrix."""
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    c = g @ g.conj().T + jitter * np.eye(m)
    return cxla.BlockSymmetric(s=c.real, t=c.imag)


class TestAssembleB:
    def test_zero_x_unit_noise_gives_identity(self):
        a = sensing.haar_partial(4, 8, seed=0)
        b = cxla.assemble_b(np.zeros(8), a, sigma_w=1.0, sigma_z=1.0)
        np.testing.assert_allclose(b.s, np.eye(4), atol=1e-14)
        np.testing.assert_allclose(b.t, np.zeros((4, 4)), atol=1e-14)

    def test_scalar_instance(self):
        b = cxla.assemble_b(np.array([2.0]), np.array([[1.0 + 0j]]), 1.0, 0.0)
        assert b.s[0, 0] == pytest.approx(4.0)
        assert b.t[0, 0] == pytest.approx(0.0)

    def test_matches_entrywise_oracle(self):
        # independent elementwise construction from the definition
        rng = np.random.default_rng(3)
        m, n = 4, 8
        a = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
        x = rng.uniform(0.1, 1.0, size=n)
        sw, sz = 0.7, 0.3
        s_ref = np.zeros((m, m))
        t_ref = np.zeros((m, m))
        for i in range(m):
            for k in range(m):
                core = sum(a[i, j] * x[j] ** 2 * np.conj(a[k, j]) for j in range(n))
                s_ref[i, k] = sw ** 2 * core.real + (sz ** 2 if i == k else 0.0)
                t_ref[i, k] = sw ** 2 * core.imag
        b = cxla.assemble_b(x, a, sw, sz)
        np.testing.assert_allclose(b.s, s_ref, atol=1e-12)
        np.testing.assert_allclose(b.t, t_ref, atol=1e-12)

    def test_structure(self):
        b = random_block(5, seed=1)
        np.testing.assert_allclose(b.s, b.s.T, atol=1e-13)
        np.testing.assert_allclose(b.t, -b.t.T, atol=1e-13)
        dense = b.dense()
        assert dense.shape == (10, 10)
        np.testing.assert_allclose(dense, dense.T, atol=1e-13)

    def test_dimension_mismatch(self):
        a = np.ones((2, 3), dtype=complex)
        with pytest.raises(StructuralError):
            cxla.assemble_b(np.ones(4), a, 1.0, 1.0)

    def test_nonfinite_x(self):
        a = np.ones((2, 3), dtype=complex)
        with pytest.raises(ValidationError):
            cxla.assemble_b(np.array([1.0, np.nan, 1.0]), a, 1.0, 1.0)

    def test_negative_sigma(self):
        a = np.ones((2, 3), dtype=complex)
        with pytest.raises(ValidationError):
            cxla.assemble_b(np.ones(3), a, -1.0, 1.0)


class TestExactInverse:
    def test_identity(self):
        b = cxla.BlockSymmetric(s=np.eye(3), t=np.zeros((3, 3)))
        inv = cxla.exact_inverse(b)
        np.testing.assert_allclose(inv.u, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(inv.v, np.zeros((3, 3)), atol=1e-12)

    def test_scalar(self):
        b = cxla.BlockSymmetric(s=np.array([[2.0]]), t=np.array([[0.0]]))
        inv = cxla.exact_inverse(b)
        assert inv.u[0, 0] == pytest.approx(0.5)
        assert inv.v[0, 0] == pytest.approx(0.0)

    def test_matches_dense_lu_oracle(self):
        b = random_block(6, seed=2)
        inv = cxla.exact_inverse(b)
        ref = np.linalg.inv(b.dense())
        scale = np.linalg.norm(ref)
        assert np.linalg.norm(inv.dense() - ref) <= 1e-9 * scale
        inv.check_structure()

    def test_logdet_matches_slogdet(self):
        b = random_block(7, seed=5)
        inv = cxla.exact_inverse(b)
        sign, ref = np.linalg.slogdet(b.dense())
        assert sign == 1.0
        assert inv.logdet == pytest.approx(ref, rel=1e-10)

    def test_rcond_recorded(self):
        inv = cxla.exact_inverse(random_block(5, seed=7))
        assert inv.rcond is not None and 0 < inv.rcond <= 1

    def test_not_positive_definite_raises(self):
        b = cxla.BlockSymmetric(s=-np.eye(2), t=np.zeros((2, 2)))
        with pytest.raises(NumericalError):
            cxla.exact_inverse(b)


class TestNewtonSchulz:
    def test_scalar(self):
        b = cxla.BlockSymmetric(s=np.array([[2.0]]), t=np.array([[0.0]]))
        m0 = cxla.HermitianInverse(u=np.array([[0.4]]), v=np.array([[0.0]]))
        m1 = cxla.newton_schulz_step(b, m0)
        assert m1.u[0, 0] == pytest.approx(0.48)

    def test_identity_fixed_point(self):
        b = cxla.BlockSymmetric(s=np.eye(4), t=np.zeros((4, 4)))
        m0 = cxla.exact_inverse(b)
        m1 = cxla.newton_schulz_step(b, m0)
        np.testing.assert_allclose(m1.dense(), np.eye(8), atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_residual_squaring_identity(self, seed):
        # I - M'B = (I - MB)^2, dense arithmetic oracle
        b = random_block(8, seed=seed)
        rng = np.random.default_rng(100 + seed)
        exact = cxla.exact_inverse(b)
        du = rng.normal(size=(8, 8))
        dv = rng.normal(size=(8, 8))
        m0 = cxla.HermitianInverse(u=exact.u + 0.005 * (du + du.T),
                                   v=exact.v + 0.005 * (dv - dv.T))
        m1 = cxla.newton_schulz_step(b, m0)
        eye = np.eye(16)
        bd = b.dense()
        lhs = eye - m1.dense() @ bd
        rhs = (eye - m0.dense() @ bd) @ (eye - m0.dense() @ bd)
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(np.linalg.norm(rhs), 1.0)

    def test_quadratic_convergence(self):
        b = random_block(6, seed=9)
        exact = cxla.exact_inverse(b)
        m = cxla.HermitianInverse(u=exact.u * 1.05, v=exact.v * 1.05)
        bd = b.dense()
        eye = np.eye(12)
        res = [np.linalg.norm(eye - m.dense() @ bd)]
        for _ in range(4):
            m = cxla.newton_schulz_step(b, m)
            res.append(np.linalg.norm(eye - m.dense() @ bd))
        assert res[-1] < 1e-10
        assert all(b < a for a, b in zip(res, res[1:]))

    def test_dimension_mismatch(self):
        b = random_block(4, seed=0)
        m0 = cxla.exact_inverse(random_block(5, seed=0))
        with pytest.raises(StructuralError):
            cxla.newton_schulz_step(b, m0)


class TestSpectralBounds:
    def test_identity(self):
        assert cxla.spectral_bounds(np.eye(5)) == (1.0, 1.0)

    def test_diagonal(self):
        lo, hi = cxla.spectral_bounds(np.diag([1.0, 2.0, 3.0]))
        assert (lo, hi) == (1.0, 3.0)

    def test_matches_svd_oracle(self, rng):
        mat = rng.normal(size=(10, 10))
        sv = np.linalg.svd(mat, compute_uv=False)
        lo, hi = cxla.spectral_bounds(mat)
        assert lo == pytest.approx(sv.min())
        assert hi == pytest.approx(sv.max())

    def test_nonfinite_raises(self):
        with pytest.raises(ValidationError):
            cxla.spectral_bounds(np.array([[np.inf, 0.0], [0.0, 1.0]]))
