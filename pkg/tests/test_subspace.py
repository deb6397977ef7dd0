import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idexp.errors import DegenerateSubspace, DimensionError, RangeError
from idexp.model import ShapeModel
from idexp.subspace import (
    PrincipalAngleSet,
    amplification,
    ball_volume,
    determinant_identity_check,
    mc_measure_estimate,
    orthonormalize,
    principal_angles,
    smallest_angle_curve,
)

from conftest import make_model, random_orthonormal
from oracles import grid_smallest_angle

# mpmath, 40 digits: pi^2/2 * 0.5^4 / (sin 0.4 * sin 1.1)
AMPLIFIED_04_11 = 0.8886988104831841239919786851630704281562


def e(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def test_orthonormalize_keeps_orthonormal_input():
    u = np.column_stack([e(4, 0), e(4, 1)])
    q = orthonormalize(u)
    np.testing.assert_allclose(q.q.T @ q.q, np.eye(2), atol=1e-12)
    assert principal_angles(q, u).angles.max() < 1e-12
    assert q.source_rank == 2 and not q.rank_deficient


def test_orthonormalize_duplicate_direction():
    q = orthonormalize(np.column_stack([e(3, 0), 2 * e(3, 0)]), tol=1e-10)
    assert q.source_rank == 1 and q.rank_deficient
    assert q.q.shape == (3, 1)
    np.testing.assert_allclose(np.abs(q.q[:, 0]), e(3, 0), atol=1e-12)


def test_orthonormalize_random_projection_residual():
    a = np.random.default_rng(0).standard_normal((100, 10))
    q = orthonormalize(a).q
    assert np.abs(q.T @ q - np.eye(10)).max() <= 1e-10
    assert np.abs(q @ (q.T @ a) - a).max() <= 1e-8


def test_orthonormalize_prefix_spans_prefix():
    a = np.random.default_rng(1).standard_normal((20, 5))
    q = orthonormalize(a).q
    assert principal_angles(q[:, :2], a[:, :2]).angles.max() < 1e-10


def test_orthonormalize_zero():
    with pytest.raises(DegenerateSubspace):
        orthonormalize(np.zeros((5, 2)))


def test_same_subspace_zero_angles():
    q = random_orthonormal(np.random.default_rng(2), 10, 3)
    np.testing.assert_allclose(principal_angles(q, q).angles, 0.0, atol=1e-12)


def test_orthogonal_axes():
    pa = principal_angles(e(3, 0), e(3, 1))
    assert pa.angles.tolist() == [math.pi / 2]
    assert pa.log_amplification == 0.0


def test_planar_rotation():
    v = math.cos(0.3) * e(3, 0) + math.sin(0.3) * e(3, 1)
    assert abs(principal_angles(e(3, 0), v).angles[0] - 0.3) <= 1e-12


@pytest.mark.parametrize("tiny", [1e-5, 1e-8, 1e-12])
def test_tiny_angles_keep_relative_accuracy(tiny):
    v = math.cos(tiny) * e(4, 0) + math.sin(tiny) * e(4, 2)
    got = principal_angles(e(4, 0), v).angles[0]
    assert abs(got - tiny) <= 1e-10 * tiny


@pytest.mark.parametrize("seed", range(5))
def test_grid_search_oracle(seed):
    rng = np.random.default_rng(seed)
    a = random_orthonormal(rng, 8, 3)
    b = random_orthonormal(rng, 8, 2)
    pa = principal_angles(a, b)
    assert len(pa.angles) == 2
    assert abs(pa.angles[0] - grid_smallest_angle(a, b)) <= 1e-3


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        principal_angles(e(3, 0), e(4, 0))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(4, 40), p=st.integers(1, 4), q=st.integers(1, 4))
def test_angle_properties(seed, n, p, q):
    rng = np.random.default_rng(seed)
    a = random_orthonormal(rng, n, p)
    b = random_orthonormal(rng, n, q)
    ab, ba = principal_angles(a, b), principal_angles(b, a)
    np.testing.assert_allclose(ab.angles, ba.angles, atol=1e-12)
    assert len(ab.angles) == min(p, q)
    assert np.all(np.diff(ab.angles) >= 0)
    assert np.all((ab.angles >= 0) & (ab.angles <= math.pi / 2))
    assert np.all((ab.sines >= 0) & (ab.sines <= 1))
    assert ab.log_amplification >= 0
    rot = random_orthonormal(rng, n, n)
    np.testing.assert_allclose(principal_angles(rot @ a, rot @ b).angles, ab.angles, atol=1e-10)


def test_curve_prescribed_pair():
    model = make_model(n=12, m=2, k=2, angles=[0.2, 0.9], seed=5)
    curve = smallest_angle_curve(model, 2)
    assert [j for j, _ in curve] == [1, 2]
    assert abs(curve[0][1] - 0.2) <= 1e-10
    assert abs(curve[1][1] - 0.2) <= 1e-10


def test_curve_reaches_zero_on_shared_column():
    rng = np.random.default_rng(3)
    basis = random_orthonormal(rng, 12, 5)
    exp = np.column_stack([basis[:, 3], basis[:, 4], basis[:, 0]])
    model = ShapeModel(np.zeros(12), basis[:, :3], exp, [3.0, 2.0, 1.0], [3.0, 2.0, 1.0])
    curve = smallest_angle_curve(model, 3)
    assert curve[1][1] > 0.1
    assert curve[2][1] <= 1e-12


def test_curve_non_increasing_random_models():
    for seed in range(100):
        model = make_model(n=30, m=5, k=4, seed=seed)
        thetas = [t for _, t in smallest_angle_curve(model, 4)]
        assert np.all(np.diff(thetas) <= 1e-12), seed


def test_curve_range(small_model):
    with pytest.raises(RangeError):
        smallest_angle_curve(small_model, 4)


def pas(*angles):
    a = np.array(angles)
    return PrincipalAngleSet(a, np.sin(a), float(-np.sum(np.log(np.sin(a)))))


def test_ball_volume_closed_forms():
    assert ball_volume(2, 1.0) == pytest.approx(math.pi, rel=1e-15)
    assert ball_volume(3, 2.0) == pytest.approx(4 / 3 * math.pi * 8, rel=1e-14)
    assert ball_volume(6, 1.0) == pytest.approx(5.167712780049970029, rel=1e-14)


def test_amplification_orthogonal():
    est = amplification(pas(math.pi / 2), 1.0, 1, 1)
    assert est.analytic_alpha_measure == pytest.approx(math.pi, rel=1e-15)
    assert est.lower_bound == pytest.approx(math.pi, rel=1e-15)


def test_amplification_single_angle():
    est = amplification(pas(math.pi / 6), 1.0, 1, 1)
    assert est.analytic_alpha_measure == pytest.approx(2 * math.pi, rel=1e-14)


def test_amplification_high_precision_oracle():
    est = amplification(pas(0.4, 1.1), 0.5, 2, 2)
    assert est.dim == 4
    assert est.analytic_alpha_measure == pytest.approx(AMPLIFIED_04_11, rel=1e-13)
    assert est.analytic_alpha_measure >= est.lower_bound >= est.ball_measure_mu0


def test_amplification_unbounded():
    est = amplification(pas(1e-15, 1.0), 1.0, 2, 2)
    assert est.unbounded and est.analytic_alpha_measure == math.inf


def test_amplification_bad_inputs():
    with pytest.raises(ValueError):
        amplification(pas(0.5), 0.0, 1, 1)
    with pytest.raises(DimensionError):
        amplification(pas(0.5), 1.0, 2, 2)


def test_determinant_orthogonal(orthogonal_model):
    chk = determinant_identity_check(orthogonal_model)
    assert chk.lhs == pytest.approx(1.0, abs=1e-12)
    assert chk.rhs == pytest.approx(1.0, abs=1e-12)


def test_determinant_prescribed():
    model = make_model(n=30, m=3, k=2, angles=[0.3, 0.7], seed=9)
    chk = determinant_identity_check(model)
    assert chk.rhs == pytest.approx(math.sin(0.3) * math.sin(0.7), rel=1e-10)
    assert chk.rel_error <= 1e-9


def test_determinant_random_models():
    rng = np.random.default_rng(2024)
    for trial in range(100):
        m, k = rng.integers(1, 21, size=2)
        n = 3 * int(rng.integers((m + k + 2) // 3, 67))
        model = make_model(n=n, m=int(m), k=int(k), seed=trial)
        assert determinant_identity_check(model).rel_error <= 1e-8


def test_determinant_rank_deficient():
    rng = np.random.default_rng(0)
    b = random_orthonormal(rng, 9, 3)
    model = ShapeModel(np.zeros(9), b[:, :2], b[:, 1:], [1.0, 1.0], [1.0, 1.0])
    with pytest.raises(DegenerateSubspace):
        determinant_identity_check(model)


def test_mc_orthogonal(orthogonal_model):
    est = mc_measure_estimate(orthogonal_model, 0.7, 200_000, seed=1)
    assert abs(est.mc_alpha_measure / est.ball_measure_mu0 - 1) <= 3 * est.mc_rel_stderr
    assert est.cov_ratio_measure == pytest.approx(est.ball_measure_mu0, rel=1e-9)


def test_mc_deterministic_and_worker_substreams(angled_model):
    a = mc_measure_estimate(angled_model, 1.0, 20_000, seed=5)
    b = mc_measure_estimate(angled_model, 1.0, 20_000, seed=5)
    assert a.to_dict() == b.to_dict()
    c = mc_measure_estimate(angled_model, 1.0, 20_000, seed=5, workers=3)
    d = mc_measure_estimate(angled_model, 1.0, 20_000, seed=5, workers=3)
    assert c.to_dict() == d.to_dict()
    assert c.mc_alpha_measure != a.mc_alpha_measure


def test_mc_sample_floor(angled_model):
    with pytest.raises(RangeError):
        mc_measure_estimate(angled_model, 1.0, 999, seed=0)


def test_mc_near_singular_flagged():
    model = make_model(n=9, m=1, k=1, angles=[1e-13], seed=0)
    est = mc_measure_estimate(model, 1.0, 1000, seed=0)
    assert est.unbounded and est.mc_alpha_measure == math.inf
