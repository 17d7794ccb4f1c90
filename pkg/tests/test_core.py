import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_basis
from iac.baselines import apply_rgb_curves
from iac.core import (
    DET_MIN,
    ChannelBounds,
    IacParams,
    Projected,
    apply_curves,
    apply_iac,
    apply_iac_staged,
    compute_bounds,
    curve_eval,
    denormalize,
    identity_curve,
    identity_curves,
    inverse_project,
    invert_basis,
    normalize,
    project,
    repair_rank,
)
from iac.errors import (
    InvalidCurveError,
    InvalidInputError,
    RepairFailedError,
    SingularBasisError,
)
from reference import corner_bounds, scalar_iac

MIX = np.array([[0.5, 0.0, 0.5], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])  # columns (.5,.5,0), (0,.5,.5), (.5,0,.5)
PERM = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])  # columns (0,1,0), (0,0,1), (1,0,0)
PIXEL = np.array([[[0.2, 0.5, 0.8]]])

bases = arrays(np.float64, (3, 3), elements=st.floats(-2, 2)).filter(
    lambda m: abs(np.linalg.det(m)) > 0.05 and np.linalg.cond(m) < 50
)
images = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6), st.just(3)), elements=st.floats(0, 1))


class TestBounds:
    def test_identity(self):
        b = compute_bounds(np.eye(3))
        np.testing.assert_array_equal(b.lo, [0, 0, 0])
        np.testing.assert_array_equal(b.hi, [1, 1, 1])

    def test_sign_split(self):
        m = np.eye(3)
        m[:, 0] = [1, -1, 0]
        b = compute_bounds(m)
        assert (b.lo[0], b.hi[0]) == (-1.0, 1.0)

    def test_matches_corner_enumeration(self):
        m = np.eye(3)
        m[:, 0] = [0.5, 0.25, 0.25]
        lo, hi = corner_bounds(m)
        assert (lo[0], hi[0]) == (0.0, 1.0)
        b = compute_bounds(m)
        assert (b.lo[0], b.hi[0]) == (0.0, 1.0)

    @given(bases)
    def test_equals_corner_extrema(self, m):
        lo, hi = corner_bounds(m)
        b = compute_bounds(m)
        np.testing.assert_allclose(b.lo, lo, atol=1e-12)
        np.testing.assert_allclose(b.hi, hi, atol=1e-12)

    def test_narrow_span_is_widened(self):
        m = np.eye(3)
        m[:, 2] = [1e-6, 0, 0]
        b = compute_bounds(m)
        assert b.span[2] == pytest.approx(1e-4)
        assert 0.5 * (b.lo[2] + b.hi[2]) == pytest.approx(5e-7)

    def test_non_finite(self):
        with pytest.raises(InvalidInputError):
            compute_bounds(np.full((3, 3), np.nan))

    def test_normalized_values_stay_in_unit_interval(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            m = rng.uniform(-3, 3, (3, 3))
            px = rng.uniform(size=(10_000, 3))
            b = compute_bounds(m)
            t_hat = (px @ m - b.lo) / b.span
            assert t_hat.min() >= -1e-12 and t_hat.max() <= 1 + 1e-12


class TestProject:
    def test_identity(self):
        p = project(np.array([[[1.0, 0.0, 0.0]]]), np.eye(3))
        np.testing.assert_array_equal(p.data[0, 0], [1, 0, 0])
        assert not p.normalized

    def test_permutation(self):
        p = project(PIXEL, PERM)
        np.testing.assert_allclose(p.data[0, 0], [0.5, 0.8, 0.2])

    def test_mixing(self):
        p = project(PIXEL, MIX)
        np.testing.assert_allclose(p.data[0, 0], [0.35, 0.65, 0.50], atol=1e-15)

    def test_rejects_bad_shapes(self):
        with pytest.raises(InvalidInputError):
            project(np.zeros((2, 2)), np.eye(3))
        with pytest.raises(InvalidInputError):
            project(np.zeros((2, 2, 3)), np.eye(2))
        with pytest.raises(InvalidInputError):
            project(np.full((1, 1, 3), np.inf), np.eye(3))


class TestNormalize:
    @pytest.mark.parametrize(
        "t,lo,hi,want", [(0.5, 0.0, 1.0, 0.5), (0.0, -1.0, 1.0, 0.5), (0.35, 0.0, 1.0, 0.35)]
    )
    def test_examples(self, t, lo, hi, want):
        b = ChannelBounds(np.full(3, lo), np.full(3, hi))
        out = normalize(Projected(np.full((1, 1, 3), t), False), b)
        assert out.normalized
        np.testing.assert_allclose(out.data, want)

    @pytest.mark.parametrize("t_hat,lo,hi,want", [(0.5, -1.0, 1.0, 0.0), (0.35, 0.0, 1.0, 0.35)])
    def test_denormalize_examples(self, t_hat, lo, hi, want):
        b = ChannelBounds(np.full(3, lo), np.full(3, hi))
        out = denormalize(Projected(np.full((1, 1, 3), t_hat), True), b)
        assert not out.normalized
        np.testing.assert_allclose(out.data, want, atol=1e-15)

    @given(bases, images)
    def test_round_trip(self, m, img):
        b = compute_bounds(m)
        p = project(img, m)
        back = denormalize(normalize(p, b), b)
        np.testing.assert_allclose(back.data, p.data, atol=1e-9)

    def test_tag_checks(self):
        b = compute_bounds(np.eye(3))
        with pytest.raises(InvalidInputError):
            normalize(Projected(np.zeros((1, 1, 3)), True), b)
        with pytest.raises(InvalidInputError):
            denormalize(Projected(np.zeros((1, 1, 3)), False), b)

    def test_rejects_degenerate_bounds(self):
        b = ChannelBounds(np.zeros(3), np.full(3, 1e-6))
        with pytest.raises(InvalidInputError):
            normalize(Projected(np.zeros((1, 1, 3)), False), b)


class TestCurves:
    def test_identity_ramp(self):
        assert curve_eval(identity_curve(200), 0.37) == pytest.approx(0.37, abs=1e-9)

    def test_single_segment(self):
        assert curve_eval([0.0, 1.0], 0.25) == 0.25

    def test_hand_interpolation(self):
        # u = 1.5: midpoint of the segment from 0.8 to 1.0
        assert curve_eval([0.0, 0.8, 1.0], 0.75) == pytest.approx(0.9, abs=1e-15)

    def test_endpoints_and_clamp(self):
        c = [0.1, 0.4, 0.7]
        assert curve_eval(c, 1.0) == 0.7
        assert curve_eval(c, 0.0) == 0.1
        assert curve_eval(c, 1.5) == 0.7
        assert curve_eval(c, -0.2) == 0.1

    def test_knot_uses_right_segment(self):
        # value at a knot is the knot value either way; the segment matters for slopes
        assert curve_eval([0.0, 0.2, 1.0], 0.5) == pytest.approx(0.2)

    def test_too_short(self):
        with pytest.raises(InvalidCurveError):
            curve_eval([0.5], 0.5)

    def test_apply_identity(self):
        rng = np.random.default_rng(0)
        data = rng.uniform(size=(4, 5, 3))
        out = apply_curves(Projected(data, True), identity_curves(200))
        np.testing.assert_allclose(out.data, data, atol=1e-9)

    def test_apply_constant(self):
        out = apply_curves(Projected(np.random.default_rng(1).uniform(size=(3, 3, 3)), True), np.full((3, 7), 0.5))
        np.testing.assert_array_equal(out.data, 0.5)

    def test_apply_square_curve(self):
        k = 200
        sq = (np.arange(k) / (k - 1)) ** 2
        out = apply_curves(Projected(np.full((1, 1, 3), 0.5), True), np.tile(sq, (3, 1)))
        # linear interpolation error of t^2 is at most h^2 / 4 with h = 1/199
        np.testing.assert_allclose(out.data, 0.25, atol=1e-4)

    def test_apply_needs_normalized(self):
        with pytest.raises(InvalidInputError):
            apply_curves(Projected(np.zeros((1, 1, 3)), False), identity_curves(4))

    @given(
        arrays(np.float64, st.integers(2, 30), elements=st.floats(0, 1)),
        st.floats(0, 1),
        st.floats(1e-6, 1e-2),
    )
    def test_lipschitz(self, values, t, h):
        k = values.size
        lip = (k - 1) * np.max(np.abs(np.diff(values)))
        t2 = min(t + h, 1.0)
        assert abs(curve_eval(values, t) - curve_eval(values, t2)) <= lip * (t2 - t) + 1e-12


class TestInverse:
    def test_identity(self):
        np.testing.assert_array_equal(invert_basis(np.eye(3)), np.eye(3))

    def test_permutation_transpose(self):
        np.testing.assert_allclose(invert_basis(PERM), PERM.T)

    def test_random_product(self):
        rng = np.random.default_rng(3)
        while True:
            m = np.eye(3) + 0.4 * rng.uniform(-1, 1, (3, 3))
            if abs(np.linalg.det(m) - 0.7) < 0.1:
                break
        assert np.abs(m @ invert_basis(m) - np.eye(3)).max() <= 1e-9

    def test_singular(self):
        m = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(SingularBasisError):
            invert_basis(m)

    def test_inverse_project_examples(self):
        out = inverse_project(Projected(np.array([[[0.2, 0.5, 0.8]]]), False), np.eye(3))
        np.testing.assert_allclose(out, PIXEL)
        out = inverse_project(Projected(np.array([[[0.35, 0.65, 0.50]]]), False), MIX)
        np.testing.assert_allclose(out, PIXEL, atol=1e-6)

    def test_inverse_project_needs_denormalized(self):
        with pytest.raises(InvalidInputError):
            inverse_project(Projected(np.zeros((1, 1, 3)), True), np.eye(3))

    @given(bases, images)
    def test_round_trip(self, m, img):
        back = inverse_project(project(img, m), m)
        np.testing.assert_allclose(back, img, atol=1e-6)


class TestApplyIac:
    def test_identity(self, rng):
        img = rng.uniform(size=(16, 16, 3))
        np.testing.assert_allclose(apply_iac(img, IacParams.identity()), img, atol=1e-6)

    def test_reduces_to_rgb_curves(self, rng):
        img = rng.uniform(size=(16, 16, 3))
        curves = rng.uniform(size=(3, 50))
        out = apply_iac(img, IacParams(np.eye(3), curves))
        np.testing.assert_allclose(out, apply_rgb_curves(img, curves), atol=1e-9)

    def test_matches_scalar_reference(self, rng):
        img = rng.uniform(size=(16, 16, 3))
        params = IacParams(random_basis(rng), rng.uniform(size=(3, 200)))
        want = scalar_iac(img, params.basis, params.curves)
        np.testing.assert_allclose(apply_iac(img, params), want, atol=1e-6)
        want_raw = scalar_iac(img, params.basis, params.curves, clamp=False)
        np.testing.assert_allclose(apply_iac(img, params, clamp=False), want_raw, atol=1e-6)

    def test_fused_matches_staged(self, rng):
        img = rng.uniform(size=(32, 24, 3))
        params = IacParams(random_basis(rng), np.sort(rng.uniform(size=(3, 64)), axis=1))
        for clamp in (True, False):
            np.testing.assert_allclose(
                apply_iac(img, params, clamp=clamp), apply_iac_staged(img, params, clamp=clamp), atol=1e-12
            )

    def test_permutation_basis_cancels(self, rng):
        img = rng.uniform(size=(8, 8, 3))
        np.testing.assert_allclose(apply_iac(img, IacParams(PERM, identity_curves(200))), img, atol=1e-6)

    @given(bases, images)
    def test_identity_curves_any_basis(self, m, img):
        np.testing.assert_allclose(apply_iac(img, IacParams(m, identity_curves(200))), img, atol=1e-6)

    def test_output_clamped(self, rng):
        img = rng.uniform(size=(8, 8, 3))
        params = IacParams(random_basis(rng), rng.uniform(size=(3, 16)))
        out = apply_iac(img, params)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_params_validation(self):
        with pytest.raises(SingularBasisError):
            IacParams(np.zeros((3, 3)), identity_curves(4))
        with pytest.raises(InvalidCurveError):
            IacParams(np.eye(3), np.full((3, 4), 1.5))
        with pytest.raises(InvalidCurveError):
            IacParams(np.eye(3), np.zeros((2, 4)))


class TestRepairRank:
    def test_invertible_unchanged(self):
        np.testing.assert_array_equal(repair_rank(np.eye(3), seed=0), np.eye(3))

    def test_rank_two(self):
        m = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        m[1] = [0.3, 0.3, 0.2]
        fixed = repair_rank(m, seed=5)
        assert abs(np.linalg.det(fixed)) >= DET_MIN
        assert np.abs(fixed - m).max() <= 10 * 1e-3

    def test_deterministic(self):
        m = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 0.0, 1.0]])
        np.testing.assert_array_equal(repair_rank(m, seed=9), repair_rank(m, seed=9))

    def test_zero_matrix(self):
        try:
            fixed = repair_rank(np.zeros((3, 3)), seed=0)
        except RepairFailedError:
            return
        assert abs(np.linalg.det(fixed)) >= DET_MIN
