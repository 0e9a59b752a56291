"""Cosine eigenbasis, transforms, Sobolev norms and the biharmonic semigroup."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import brute_grid
from sharpflow.spectral_core import (
    SpectralField,
    eigenvalue,
    eigenvalues,
    eval_basis,
    evaluate,
    frac_laplacian,
    grid_points,
    laplacian,
    read_field,
    semigroup_apply,
    sobolev_norm,
    to_coeffs,
    to_grid,
    write_field,
    write_field_csv,
)

# frozen from 30-digit mpmath evaluations
PI2 = 9.869604401089358
THIRTEEN_PI2 = 128.30485721416166
INV_PI = 0.3183098861837907
EXP_MINUS_PI4 = 4.963285718884150e-43

coeff_arrays = arrays(np.float64, (6, 6), elements=st.floats(-1, 1, allow_nan=False, width=64))


class TestEigenvalues:
    @pytest.mark.parametrize("k, expected", [((0, 0), 0.0), ((1, 0), PI2), ((2, 3), THIRTEEN_PI2)])
    def test_values(self, k, expected):
        assert eigenvalue(k) == pytest.approx(expected, rel=1e-14)

    def test_table_matches_pointwise(self):
        lam = eigenvalues(5)
        for k1 in range(5):
            for k2 in range(5):
                assert lam[k1, k2] == eigenvalue((k1, k2))

    def test_eigenrelation_by_finite_differences(self):
        # -Lap e_k = lambda_k e_k checked with a centred difference stencil
        h = 1e-4
        x = np.array([0.31, 0.62])
        k = (2, 1)
        e = lambda p: eval_basis(k, p)
        lap = sum((e(x + h * d) - 2 * e(x) + e(x - h * d)) / h**2 for d in np.eye(2))
        assert -lap == pytest.approx(eigenvalue(k) * e(x), rel=1e-5)


class TestEvalBasis:
    @pytest.mark.parametrize("x", [(0.0, 0.0), (0.3, 0.9), (1.0, 0.5)])
    def test_constant_mode(self, x):
        assert eval_basis((0, 0), x) == 1.0

    def test_corner_value(self):
        assert eval_basis((1, 1), (0.0, 0.0)) == pytest.approx(2.0)

    @pytest.mark.parametrize("x2", [0.0, 0.37, 1.0])
    def test_node_line(self, x2):
        assert abs(eval_basis((1, 0), (0.5, x2))) < 1e-15

    def test_orthonormality_on_grid(self):
        m = 8
        x = grid_points(m)
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        modes = [(a, b) for a in range(m) for b in range(m)]
        E = np.stack([eval_basis(k, (X1, X2)) * np.ones_like(X1) for k in modes]).reshape(len(modes), -1)
        gram = E @ E.T / m**2
        np.testing.assert_allclose(gram, np.eye(len(modes)), atol=1e-12)


class TestTransforms:
    def test_constant(self):
        f = to_coeffs(np.ones((16, 16)))
        expected = np.zeros((16, 16))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(f.coeffs, expected, atol=1e-14)

    def test_single_mode(self):
        m = 16
        x = grid_points(m)
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        f = to_coeffs(eval_basis((1, 0), (X1, X2)) * np.ones((m, m)))
        assert f.coeffs[1, 0] == pytest.approx(1.0, abs=1e-12)
        rest = f.coeffs.copy()
        rest[1, 0] = 0.0
        assert np.max(np.abs(rest)) <= 1e-12

    def test_roundtrip_random_bandlimited(self, rng):
        c = rng.standard_normal((24, 24))
        f = SpectralField(c)
        for m in (24, 48):
            back = to_coeffs(to_grid(f, m), 24)
            assert np.max(np.abs(back.coeffs - c)) <= 1e-12

    def test_grid_matches_brute_force_sum(self, rng):
        c = rng.standard_normal((6, 6))
        np.testing.assert_allclose(to_grid(SpectralField(c), 12), brute_grid(c, 12), atol=1e-12)

    def test_evaluate_matches_grid(self, rng):
        f = SpectralField(rng.standard_normal((8, 8)))
        x = grid_points(16)
        pts = np.array([(x[3], x[11]), (x[0], x[15])])
        g = to_grid(f, 16)
        np.testing.assert_allclose(evaluate(f, pts), [g[3, 11], g[0, 15]], atol=1e-12)

    def test_grid_smaller_than_cutoff_rejected(self):
        with pytest.raises(ValueError, match="smaller than cutoff"):
            to_grid(SpectralField.zeros(8), 4)

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            to_coeffs(np.zeros((4, 5)))

    @settings(max_examples=30, deadline=None)
    @given(coeff_arrays)
    def test_parseval(self, c):
        f = SpectralField(c)
        g = to_grid(f, 12)
        assert sobolev_norm(f, 0.0) == pytest.approx(math.sqrt(np.mean(g**2)), abs=1e-10)


class TestSpectralField:
    def test_immutable(self):
        f = SpectralField.zeros(4)
        with pytest.raises(ValueError):
            f.coeffs[0, 0] = 1.0

    def test_arithmetic(self):
        a = SpectralField.mode(4, (1, 2), 2.0)
        b = SpectralField.constant(4, 3.0)
        s = 2 * a - b + (-b)
        assert s.coeffs[1, 2] == 4.0 and s.mean == -6.0

    def test_cutoff_mismatch(self):
        with pytest.raises(ValueError, match="cutoff mismatch"):
            SpectralField.zeros(4) + SpectralField.zeros(8)

    def test_resize(self):
        f = SpectralField.mode(4, (3, 3))
        assert f.resized(8).coeffs[3, 3] == 1.0
        assert np.all(f.resized(2).coeffs == 0.0)


class TestSobolevNorm:
    def test_negative_order(self):
        assert sobolev_norm(SpectralField.mode(8, (1, 0)), -1.0) == pytest.approx(INV_PI, rel=1e-14)

    @pytest.mark.parametrize("alpha", [-2.0, -1.0, 0.0, 0.5, 2.0])
    def test_constant(self, alpha):
        assert sobolev_norm(SpectralField.constant(8, 1.0), alpha) == pytest.approx(1.0)

    def test_unit_mode(self):
        assert sobolev_norm(SpectralField.mode(8, (1, 1)), 0.0) == pytest.approx(1.0)


class TestFracLaplacian:
    def test_eigenrelation(self):
        g = frac_laplacian(SpectralField.mode(8, (1, 0)), 1.0)
        assert g.coeffs[1, 0] == pytest.approx(PI2)

    def test_identity_on_mean_free(self, rng):
        c = rng.standard_normal((8, 8))
        c[0, 0] = 0.0
        np.testing.assert_array_equal(frac_laplacian(SpectralField(c), 0.0).coeffs, c)

    @pytest.mark.parametrize("s", [-1.5, 0.0, 0.5, 2.0])
    def test_constant_annihilated(self, s):
        assert np.all(frac_laplacian(SpectralField.constant(8, 5.0), s).coeffs == 0.0)

    def test_first_power_is_minus_laplacian(self, rng):
        f = SpectralField(rng.standard_normal((8, 8)))
        np.testing.assert_allclose(frac_laplacian(f, 1.0).coeffs, -laplacian(f).coeffs)

    @settings(max_examples=30, deadline=None)
    @given(coeff_arrays, st.floats(-2, 2))
    def test_inverse_powers(self, c, s):
        f = SpectralField(c)
        back = frac_laplacian(frac_laplacian(f, s), -s)
        expected = c.copy()
        expected[0, 0] = 0.0
        np.testing.assert_allclose(back.coeffs, expected, atol=1e-10)


class TestSemigroup:
    def test_zero_time_identity(self, rng):
        f = SpectralField(rng.standard_normal((8, 8)))
        np.testing.assert_array_equal(semigroup_apply(f, 0.0, 0.1).coeffs, f.coeffs)

    def test_constant_fixed(self):
        assert semigroup_apply(SpectralField.constant(8, 1.0), 3.0, 0.5).mean == 1.0

    def test_closed_form_multiplier(self):
        g = semigroup_apply(SpectralField.mode(4, (1, 0)), 1.0, 1.0)
        assert g.coeffs[1, 0] == pytest.approx(EXP_MINUS_PI4, rel=1e-12)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            semigroup_apply(SpectralField.zeros(4), -1.0, 0.1)

    @settings(max_examples=30, deadline=None)
    @given(coeff_arrays, st.floats(0, 1e-4), st.floats(0, 1e-4), st.floats(1e-3, 1))
    def test_semigroup_property(self, c, s, t, eps):
        f = SpectralField(c)
        a = semigroup_apply(f, s + t, eps)
        b = semigroup_apply(semigroup_apply(f, s, eps), t, eps)
        np.testing.assert_allclose(a.coeffs, b.coeffs, atol=1e-12)
        assert a.coeffs[0, 0] == c[0, 0]


class TestSnapshots:
    def test_binary_roundtrip(self, tmp_path, rng):
        f = SpectralField(rng.standard_normal((8, 8)))
        write_field(tmp_path / "f.spf", f, 16)
        g, m = read_field(tmp_path / "f.spf")
        assert m == 16
        np.testing.assert_array_equal(g.coeffs, f.coeffs)
        raw = (tmp_path / "f.spf").read_bytes()
        assert raw[:4] == b"SPF1" and len(raw) == 12 + 8 * 64

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x.spf").write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(ValueError, match="magic"):
            read_field(tmp_path / "x.spf")

    def test_csv(self, tmp_path):
        write_field_csv(tmp_path / "f.csv", SpectralField.mode(2, (1, 0), 0.5))
        lines = (tmp_path / "f.csv").read_text().splitlines()
        assert lines[0] == "k1,k2,coeff" and lines[3] == "1,0,0.5"
