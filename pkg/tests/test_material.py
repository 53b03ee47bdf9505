import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flexofpm.material import (EPS0, MaterialError, MaterialProperties, build_raw_matrices,
                               condense, constitutive_set, evaluate_fields, lame_parameters)

from support import FLEXO, PIEZO

vec = lambda n: arrays(np.float64, n, elements=st.floats(-1, 1))  # noqa: E731


class TestLame:
    def test_silicon_like(self):
        lam, G = lame_parameters(139e9, 0.3)
        assert lam / 1e9 == pytest.approx(80.1923, abs=1e-4)
        assert G / 1e9 == pytest.approx(53.4615, abs=1e-4)

    def test_zero_poisson(self):
        assert lame_parameters(10.0, 0.0) == (0.0, 5.0)

    def test_pyramid_inputs(self):
        lam, G = lame_parameters(100e9, 0.37)
        # 100 * 0.37 / (1.37 * 0.26)
        assert lam / 1e9 == pytest.approx(103.8742, abs=1e-4)
        assert G / 1e9 == pytest.approx(36.496, abs=5e-4)

    def test_incompressible(self):
        with pytest.raises(MaterialError, match="incompressible"):
            lame_parameters(1e9, 0.5)


class TestProperties:
    @pytest.mark.parametrize("kw", [{"E_young": 0.0}, {"nu": 0.5}, {"nu": -1.0}, {"l": -1e-6},
                                    {"k11": EPS0}, {"k33": 1e-13}])
    def test_invalid(self, kw):
        base = dict(E_young=1e9, nu=0.3)
        base.update(kw)
        with pytest.raises(MaterialError):
            MaterialProperties(**base)

    def test_with_returns_copy(self):
        m = FLEXO.with_(l=0.0)
        assert m.l == 0.0 and FLEXO.l == 2e-6


class TestRawMatrices:
    def test_no_gradient_length(self):
        _, Dmk, *_ = build_raw_matrices(FLEXO.with_(l=0.0))
        assert not Dmk.any()

    def test_no_piezo(self):
        *_, e, _ = build_raw_matrices(FLEXO)
        assert e.shape == (2, 3) and not e.any()

    def test_flexo_tensor_entries(self):
        *_, A0 = build_raw_matrices(FLEXO)
        assert A0.shape == (6, 2)
        np.testing.assert_array_equal(A0[0], [1e-6, 0.0])
        assert A0[3, 0] == pytest.approx(1e-6)

    def test_fractions(self):
        lam, G = lame_parameters(FLEXO.E_young, FLEXO.nu)
        Dse, Dmk, kbar, *_ = build_raw_matrices(FLEXO)
        l2 = FLEXO.l ** 2
        assert Dse[2, 2] == G
        assert Dmk[2, 2] == pytest.approx(l2 * (lam + 3 * G) / 4)
        assert Dmk[0, 3] == pytest.approx(l2 * lam / 2)
        assert Dmk[3, 4] == pytest.approx(l2 * G / 2)
        np.testing.assert_array_equal(kbar, np.diag([1e-9, 1e-9]))

    def test_length_scaling(self):
        a = build_raw_matrices(FLEXO.with_(l=1e-6))[1]
        b = build_raw_matrices(FLEXO.with_(l=3e-6))[1]
        np.testing.assert_allclose(b, 9 * a, rtol=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(vec(3))
    def test_elastic_energy_positive(self, eps):
        Dse = build_raw_matrices(FLEXO)[0]
        n = np.linalg.norm(eps)
        if n > 0:
            # the sign is scale invariant; normalising avoids underflow
            e = eps / n
            assert e @ Dse @ e > 0

    def test_shear_law(self):
        # engineering shear in the third slot: sigma12 = 2 G e12
        Dse = build_raw_matrices(FLEXO)[0]
        _, G = lame_parameters(FLEXO.E_young, FLEXO.nu)
        e12 = 1e-4
        assert (Dse @ [0, 0, 2 * e12])[2] == pytest.approx(2 * G * e12)


class TestCondense:
    def test_no_coupling_is_identity(self):
        raw = build_raw_matrices(FLEXO.with_(mu11=0.0, mu12=0.0, mu44=0.0))
        Dse, Dmk, G0 = condense(*raw)
        np.testing.assert_array_equal(Dse, raw[0])
        np.testing.assert_array_equal(Dmk, raw[1])
        assert not G0.any()

    def test_flexo_entry(self):
        cs = constitutive_set(FLEXO)
        lam, G = lame_parameters(FLEXO.E_young, FLEXO.nu)
        want = FLEXO.l ** 2 * (lam + 2 * G) - (1e-6) ** 2 / (1e-9 - EPS0)
        assert cs.Dmk[0, 0] == pytest.approx(want, rel=1e-12)
        np.testing.assert_array_equal(cs.Dse, cs.Dse_raw)

    def test_singular_kbar(self):
        raw = list(build_raw_matrices(FLEXO))
        raw[2] = np.diag([EPS0, 1e-9])
        with pytest.raises(MaterialError, match="singular"):
            condense(*raw)

    @pytest.mark.parametrize("mat", [FLEXO, PIEZO])
    def test_symmetry(self, mat):
        cs = constitutive_set(mat)
        for A in (cs.Dse, cs.Dmk, cs.Dse_raw, cs.Dmk_raw, cs.enthalpy_matrix()):
            assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()

    @settings(max_examples=30, deadline=None)
    @given(vec(3))
    def test_condensation_softens(self, eps):
        cs = constitutive_set(PIEZO)
        assert eps @ cs.Dse @ eps <= eps @ cs.Dse_raw @ eps * (1 + 1e-14) + 1e-300

    def test_piezo_transpose_placement(self):
        cs = constitutive_set(PIEZO)
        inv = np.linalg.inv(cs.kbar - EPS0 * np.eye(2))
        np.testing.assert_allclose(cs.Dse, cs.Dse_raw - cs.e_mat.T @ inv @ cs.e_mat, rtol=1e-14)


class TestEvaluateFields:
    cs = constitutive_set(FLEXO)

    def test_zero(self):
        out = evaluate_fields(self.cs, np.zeros(3), np.zeros(6), np.zeros(2))
        assert all(not a.any() for a in out)

    def test_strain_only_non_piezo(self):
        eps = np.array([1e-4, -2e-4, 3e-5])
        sigma, mu, P = evaluate_fields(self.cs, eps, np.zeros(6), np.zeros(2))
        np.testing.assert_allclose(sigma, self.cs.Dse @ eps)
        assert not P.any()

    def test_uniform_field(self):
        E = np.array([1e5, -2e5])
        _, _, P = evaluate_fields(self.cs, np.zeros(3), np.zeros(6), E)
        np.testing.assert_allclose(P, (1e-9 - EPS0) * E, rtol=1e-14)

    def test_batched(self, rng):
        eps, kap, E = rng.normal(size=(5, 3)), rng.normal(size=(5, 6)), rng.normal(size=(5, 2))
        s, m, P = evaluate_fields(self.cs, eps, kap, E)
        s1, m1, P1 = evaluate_fields(self.cs, eps[2], kap[2], E[2])
        np.testing.assert_allclose(s[2], s1)
        np.testing.assert_allclose(m[2], m1)
        np.testing.assert_allclose(P[2], P1)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            evaluate_fields(self.cs, np.zeros(4), np.zeros(6), np.zeros(2))

    def test_energy_gradient(self, rng):
        # sigma, mu and -D are the gradients of 1/2 q^T H q
        H = self.cs.enthalpy_matrix()
        q = rng.normal(size=11)
        s, m, P = evaluate_fields(self.cs, q[:3], q[3:9], q[9:])
        g = H @ q
        np.testing.assert_allclose(g[:3], s, rtol=1e-12, atol=1e-12 * np.abs(s).max())
        np.testing.assert_allclose(g[3:9], m, rtol=1e-12, atol=1e-12 * np.abs(m).max())
        D = EPS0 * q[9:] + P
        np.testing.assert_allclose(-g[9:], D, rtol=1e-12, atol=1e-12 * np.abs(D).max())
