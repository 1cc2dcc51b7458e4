import numpy as np
import pytest

from flipblur.lib.boundary_ops import (
    BcKind,
    BlurOperator,
    DimensionError,
    OperatorSizeError,
    PadTooWideError,
    SizeCapExceededError,
    apply,
    assemble_dense,
    extend,
    field_of_view,
    flip_apply,
    flip_dense,
    flip_image,
    observe,
    toeplitz_part,
)
from flipblur.lib.psf_symbol import PsfKind, make_psf
from flipblur.lib.spectral import is_hankel, singular_values_dense

from conftest import random_psf


class TestExtend:
    def test_zero(self):
        np.testing.assert_array_equal(extend(np.array([5.0, 6.0, 7.0]), 1, BcKind.ZERO), [0, 5, 6, 7, 0])

    def test_periodic(self):
        np.testing.assert_array_equal(extend(np.array([5.0, 6.0, 7.0]), 1, BcKind.PERIODIC), [7, 5, 6, 7, 5])

    def test_reflective_repeats_edge(self):
        np.testing.assert_array_equal(extend(np.array([5.0, 6.0, 7.0]), 1, BcKind.REFLECTIVE), [5, 5, 6, 7, 7])

    def test_antireflective(self):
        np.testing.assert_array_equal(extend(np.array([1.0, 2.0, 3.0]), 1, BcKind.ANTIREFLECTIVE), [0, 1, 2, 3, 4])

    def test_antireflective_corner(self):
        padded = extend(np.array([[1.0, 2.0], [3.0, 4.0]]), 1, BcKind.ANTIREFLECTIVE)
        # 4*1 - 2*2 - 2*3 + 4
        assert padded[0, 0] == -2.0
        np.testing.assert_array_equal(padded[1:3, 1:3], [[1, 2], [3, 4]])
        # edges: 2 f_{1,j} - f_{2,j}
        np.testing.assert_array_equal(padded[0, 1:3], [-1, 0])

    def test_antireflective_corner_formula_2d(self, rng):
        img = rng.standard_normal((6, 7))
        m = 2
        padded = extend(img, m, BcKind.ANTIREFLECTIVE)
        for i in range(1, m + 1):
            for j in range(1, m + 1):
                expected = 4 * img[0, 0] - 2 * img[0, j] - 2 * img[i, 0] + img[i, j]
                assert padded[m - i, m - j] == pytest.approx(expected, abs=1e-13)
                expected = 4 * img[-1, -1] - 2 * img[-1, -1 - j] - 2 * img[-1 - i, -1] + img[-1 - i, -1 - j]
                assert padded[-1 - m + i, -1 - m + j] == pytest.approx(expected, abs=1e-13)

    def test_shape(self, rng):
        assert extend(rng.random((5, 7)), 2, BcKind.REFLECTIVE).shape == (9, 11)

    def test_batch_axes_untouched(self, rng):
        batch = rng.random((3, 5))
        padded = extend(batch, 1, BcKind.PERIODIC, ndim=1)
        assert padded.shape == (3, 7)
        np.testing.assert_array_equal(padded[1], extend(batch[1], 1, BcKind.PERIODIC))

    @pytest.mark.parametrize("m", [-1, 3, 4])
    def test_pad_too_wide(self, m):
        with pytest.raises(PadTooWideError):
            extend(np.zeros(3), m, BcKind.ZERO)


class TestBlurOperator:
    def test_identity_psf(self, identity_psf, rng):
        img = rng.random(6)
        for bc in BcKind:
            np.testing.assert_array_equal(BlurOperator(identity_psf, bc, (6,)).apply(img), img)

    def test_first_basis_column(self, skewed_psf):
        op = BlurOperator(skewed_psf, BcKind.ZERO, (4,))
        np.testing.assert_allclose(op.apply(np.eye(4)[0]), [0.5, 0.3, 0, 0])

    def test_zero_dense(self, skewed_psf):
        dense = assemble_dense(BlurOperator(skewed_psf, BcKind.ZERO, (4,)))
        expected = [[0.5, 0.2, 0, 0], [0.3, 0.5, 0.2, 0], [0, 0.3, 0.5, 0.2], [0, 0, 0.3, 0.5]]
        np.testing.assert_allclose(dense, expected, atol=1e-16)

    def test_reflective_dense(self, skewed_psf):
        dense = BlurOperator(skewed_psf, BcKind.REFLECTIVE, (4,)).assemble_dense()
        np.testing.assert_allclose(dense[0], [0.8, 0.2, 0, 0], atol=1e-15)
        np.testing.assert_allclose(dense[-1], [0, 0, 0.3, 0.7], atol=1e-15)

    def test_antireflective_dense(self, skewed_psf):
        dense = BlurOperator(skewed_psf, BcKind.ANTIREFLECTIVE, (4,)).assemble_dense()
        np.testing.assert_allclose(dense[0], [1.1, -0.1, 0, 0], atol=1e-15)

    def test_periodic_dense(self, skewed_psf):
        dense = BlurOperator(skewed_psf, BcKind.PERIODIC, (4,)).assemble_dense()
        np.testing.assert_allclose(dense[0], [0.5, 0.2, 0, 0.3], atol=1e-16)

    def test_shape_mismatch(self, skewed_psf):
        with pytest.raises(DimensionError):
            BlurOperator(skewed_psf, BcKind.ZERO, (4,)).apply(np.zeros(5))

    def test_dims_mismatch(self, skewed_psf):
        with pytest.raises(DimensionError):
            BlurOperator(skewed_psf, BcKind.ZERO, (4, 4))

    def test_support_rule(self, rng):
        psf = random_psf(rng, 2, 2)
        BlurOperator(psf, BcKind.ANTIREFLECTIVE, (5, 5))
        with pytest.raises(OperatorSizeError):
            BlurOperator(psf, BcKind.ANTIREFLECTIVE, (5, 4))

    def test_size_cap(self, skewed_psf):
        with pytest.raises(SizeCapExceededError):
            BlurOperator(skewed_psf, BcKind.ZERO, (40,)).assemble_dense(cap=39)

    def test_bc_from_string(self, skewed_psf):
        assert BlurOperator(skewed_psf, "antireflective", [8]).bc is BcKind.ANTIREFLECTIVE

    def test_module_functions(self, skewed_psf, rng):
        op = BlurOperator(skewed_psf, BcKind.REFLECTIVE, (6,))
        img = rng.random(6)
        np.testing.assert_array_equal(apply(op, img), op.apply(img))
        np.testing.assert_array_equal(flip_apply(op, img), op.apply(img)[::-1])
        np.testing.assert_array_equal(toeplitz_part(op), BlurOperator(skewed_psf, BcKind.ZERO, (6,)).assemble_dense())

    def test_threaded_assembly(self, speckle_psf):
        op = BlurOperator(speckle_psf, BcKind.ANTIREFLECTIVE, (20, 20))
        np.testing.assert_array_equal(op.assemble_dense(workers=3), op.assemble_dense())


class TestOperatorEquivalence:
    @pytest.mark.parametrize("bc", list(BcKind))
    @pytest.mark.parametrize("dims", [1, 2])
    @pytest.mark.parametrize("m", [1, 2])
    def test_dense_matches_apply(self, bc, dims, m, rng):
        for n in range(4, 9):
            if n < 2 * m + 1:
                continue
            shape = (n,) * dims
            for _ in range(20):
                op = BlurOperator(random_psf(rng, m, dims), bc, shape)
                img = rng.standard_normal(shape)
                deviation = np.abs(op.assemble_dense() @ img.ravel() - op.apply(img).ravel()).max()
                assert deviation < 1e-13

    @pytest.mark.parametrize("bc", [BcKind.PERIODIC, BcKind.REFLECTIVE, BcKind.ANTIREFLECTIVE])
    def test_rows_sum_to_one(self, bc, speckle_psf):
        dense = BlurOperator(speckle_psf, bc, (7, 6)).assemble_dense()
        np.testing.assert_allclose(dense.sum(axis=1), 1.0, atol=1e-13)

    def test_zero_boundary_rows_lose_mass(self, skewed_psf):
        sums = BlurOperator(skewed_psf, BcKind.ZERO, (6,)).assemble_dense().sum(axis=1)
        assert sums[0] < 1 and sums[-1] < 1
        np.testing.assert_allclose(sums[1:-1], 1.0)

    @pytest.mark.parametrize("bc", [BcKind.PERIODIC, BcKind.REFLECTIVE, BcKind.ANTIREFLECTIVE])
    @pytest.mark.parametrize("shape", [(9,), (6, 8)])
    def test_constants_preserved(self, bc, shape, rng):
        img = np.full(shape, 0.7)
        out = BlurOperator(random_psf(rng, 2, len(shape)), bc, shape).apply(img)
        np.testing.assert_allclose(out, img, atol=1e-13)

    def test_antireflective_preserves_ramps(self, rng):
        for m in (1, 2, 3):
            op = BlurOperator(random_psf(rng, m, 1), BcKind.ANTIREFLECTIVE, (12,))
            out = op.apply(2.0 - 0.3 * np.arange(12))
            assert np.abs(np.diff(out, 2)).max() < 1e-12
            np.testing.assert_allclose(np.diff(out), -0.3, atol=1e-12)


class TestObserve:
    @pytest.mark.parametrize("bc", list(BcKind))
    @pytest.mark.parametrize("shape", [(9,), (7, 8)])
    def test_matches_operator_on_extended_scene(self, bc, shape, rng):
        psf = random_psf(rng, 2, len(shape))
        img = rng.standard_normal(shape)
        expected = BlurOperator(psf, bc, shape).apply(img)
        np.testing.assert_allclose(observe(psf, extend(img, 2, bc)), expected, atol=1e-13)

    def test_field_of_view(self):
        scene = np.arange(30.0).reshape(5, 6)
        np.testing.assert_array_equal(field_of_view(scene, 1), scene[1:4, 1:5])
        np.testing.assert_array_equal(field_of_view(scene, 0), scene)

    def test_scene_too_small(self, skewed_psf):
        with pytest.raises(OperatorSizeError):
            observe(skewed_psf, np.ones(4))
        assert observe(skewed_psf, np.ones(5)).shape == (3,)

    def test_dimension_mismatch(self, skewed_psf):
        with pytest.raises(DimensionError):
            observe(skewed_psf, np.ones((6, 6)))


class TestStructure:
    def test_reflective_correction_is_hankel_corners(self, skewed_psf):
        n = 8
        op = BlurOperator(skewed_psf, BcKind.REFLECTIVE, (n,))
        correction = op.correction_part()
        expected = np.zeros((n, n))
        expected[0, 0] = 0.3
        expected[-1, -1] = 0.2
        np.testing.assert_allclose(correction, expected, atol=1e-16)

    def test_reflective_correction_m2(self, rng):
        psf = random_psf(rng, 2, 1)
        h = {j: psf.coefficient(j) for j in range(-2, 3)}
        correction = BlurOperator(psf, BcKind.REFLECTIVE, (9,)).correction_part()
        np.testing.assert_allclose(correction[:2, :2], [[h[1], h[2]], [h[2], 0]], atol=1e-15)
        np.testing.assert_allclose(correction[-2:, -2:], [[0, h[-2]], [h[-2], h[-1]]], atol=1e-15)
        assert not np.any(correction[2:-2])

    def test_antireflective_correction_pattern(self, rng):
        n, m = 10, 2
        psf = random_psf(rng, m, 1)
        correction = BlurOperator(psf, BcKind.ANTIREFLECTIVE, (n,)).correction_part()
        z = [2 * sum(psf.coefficient(k) for k in range(j, m + 1)) for j in range(1, m + 1)]
        np.testing.assert_allclose(correction[:m, 0], z, atol=1e-15)
        h = {j: psf.coefficient(j) for j in range(-m, m + 1)}
        np.testing.assert_allclose(correction[:m, 1 : m + 1], [[-h[1], -h[2]], [-h[2], 0]], atol=1e-15)
        np.testing.assert_allclose(correction[n - m :, n - m - 1 : n - 1], [[0, -h[-2]], [-h[-2], -h[-1]]], atol=1e-15)
        assert is_hankel(correction[:m, 1 : m + 1]) and is_hankel(correction[n - m :, n - m - 1 : n - 1])
        mask = np.zeros((n, n), dtype=bool)
        mask[:m, : m + 1] = True
        mask[n - m :, n - m - 1 :] = True
        assert not np.any(correction[~mask])

    def test_periodic_correction_in_corners(self, rng):
        n, m = 9, 2
        correction = BlurOperator(random_psf(rng, m, 1), BcKind.PERIODIC, (n,)).correction_part()
        mask = np.zeros((n, n), dtype=bool)
        mask[:m, n - m :] = True
        mask[n - m :, :m] = True
        assert not np.any(correction[~mask])

    def test_zero_correction_vanishes(self, speckle_psf):
        assert not np.any(BlurOperator(speckle_psf, BcKind.ZERO, (6, 6)).correction_part())

    @pytest.mark.parametrize("bc", [BcKind.ZERO, BcKind.PERIODIC])
    @pytest.mark.parametrize("shape", [(10,), (6, 7)])
    def test_flipped_symmetric(self, bc, shape, rng):
        dense = flip_dense(BlurOperator(random_psf(rng, 2, len(shape)), bc, shape).assemble_dense())
        assert np.abs(dense - dense.T).max() < 1e-14

    def test_reflective_symmetric_iff_centrosymmetric(self, speckle_psf):
        gaussian = make_psf(PsfKind.GAUSSIAN, 2)
        symmetric = BlurOperator(gaussian, BcKind.REFLECTIVE, (7, 7)).assemble_dense()
        nonsymmetric = BlurOperator(speckle_psf, BcKind.REFLECTIVE, (7, 7)).assemble_dense()
        assert np.abs(symmetric - symmetric.T).max() < 1e-15
        assert np.abs(nonsymmetric - nonsymmetric.T).max() > 1e-3

    def test_flip_is_involution(self, rng):
        matrix = rng.random((5, 5))
        np.testing.assert_array_equal(flip_dense(flip_dense(matrix)), matrix)

    def test_flip_apply_matches_dense(self, speckle_psf, rng):
        op = BlurOperator(speckle_psf, BcKind.ANTIREFLECTIVE, (6, 7))
        img = rng.random((6, 7))
        np.testing.assert_allclose(flip_dense(op.assemble_dense()) @ img.ravel(), op.flip_apply(img).ravel(), atol=1e-14)

    def test_2d_flip_is_kronecker_of_flips(self, rng):
        img = rng.random((3, 4))
        y = np.kron(np.eye(3)[::-1], np.eye(4)[::-1])
        np.testing.assert_array_equal(flip_image(img, 2).ravel(), y @ img.ravel())

    def test_flip_preserves_singular_values(self, speckle_psf):
        dense = BlurOperator(speckle_psf, BcKind.REFLECTIVE, (6, 6)).assemble_dense()
        np.testing.assert_allclose(singular_values_dense(flip_dense(dense)), singular_values_dense(dense), atol=1e-12)
