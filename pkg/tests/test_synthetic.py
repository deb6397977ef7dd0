import math

import numpy as np
import pytest

from idexp.errors import DimensionError, RangeError
from idexp.model import Block
from idexp.subspace import determinant_identity_check, orthonormalize, principal_angles
from idexp.synthetic import SyntheticSpec, default_spectrum, first_pc_latents, generate, sample_latents

from conftest import make_model


def test_default_spectrum():
    s = default_spectrum(5)
    assert s[0] == pytest.approx(10.0) and s[-1] == pytest.approx(0.1)
    assert np.all(np.diff(s) < 0)
    assert default_spectrum(1) == [10.0]


def test_orthogonal_construction():
    model = make_model(n=30, m=3, k=2, angles=[math.pi / 2] * 2)
    chk = determinant_identity_check(model)
    assert chk.lhs == pytest.approx(1.0, abs=1e-12) and chk.rhs == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2**63 + 5])
def test_prescribed_angles_measured(seed):
    model = make_model(n=30, m=4, k=2, angles=[0.3, 0.7], seed=seed)
    pa = principal_angles(model.id_basis, model.exp_basis)
    np.testing.assert_allclose(pa.angles, [0.3, 0.7], rtol=0, atol=1e-10)


def test_more_expression_than_identity():
    model = make_model(n=30, m=2, k=5, angles=[0.4, 0.9], seed=3)
    pa = principal_angles(model.id_basis, model.exp_basis)
    np.testing.assert_allclose(pa.angles, [0.4, 0.9], atol=1e-10)
    assert determinant_identity_check(model).rel_error <= 1e-10


def test_generate_is_deterministic():
    spec = SyntheticSpec(n=60, m=5, k=4, seed=42)
    assert generate(spec).equals(generate(SyntheticSpec(n=60, m=5, k=4, seed=42)))
    assert not generate(spec).equals(generate(SyntheticSpec(n=60, m=5, k=4, seed=43)))


def test_bases_are_orthonormal():
    for angles in (None, [0.1, 0.5, 1.0]):
        model = make_model(n=60, m=3, k=3, angles=angles, seed=7)
        for basis in (model.id_basis, model.exp_basis):
            assert np.abs(basis.T @ basis - np.eye(3)).max() <= 1e-12
            assert orthonormalize(basis).source_rank == 3


@pytest.mark.parametrize(
    "kwargs, exc",
    [
        (dict(n=6, m=4, k=3), DimensionError),
        (dict(n=31, m=2, k=2), DimensionError),
        (dict(n=30, m=2, k=2, prescribed_angles=[0.1]), DimensionError),
        (dict(n=30, m=2, k=2, prescribed_angles=[0.0, 0.1]), RangeError),
        (dict(n=30, m=2, k=2, prescribed_angles=[0.1, 2.0]), RangeError),
        (dict(n=30, m=2, k=2, id_spectrum=[1.0, 2.0]), ValueError),
        (dict(n=30, m=2, k=2, id_spectrum=[1.0, 0.0]), ValueError),
        (dict(n=30, m=0, k=2), RangeError),
    ],
)
def test_spec_validation(kwargs, exc):
    with pytest.raises(exc):
        SyntheticSpec(**kwargs)


def test_spec_dict_round_trip():
    spec = SyntheticSpec(n=30, m=2, k=2, prescribed_angles=[0.2, 0.4], seed=9)
    assert SyntheticSpec.from_dict(spec.to_dict()) == spec


def test_sample_latents_statistics(angled_model):
    lats = sample_latents(angled_model, Block.FULL, 10_000, seed=1)
    x = np.array([lat.stacked for lat in lats])
    assert np.all(np.abs(x.mean(axis=0)) <= 0.05)
    assert np.all((x.var(axis=0) >= 0.9) & (x.var(axis=0) <= 1.1))


def test_sample_latents_identity_block(angled_model):
    for lat in sample_latents(angled_model, Block.IDENTITY, 50, seed=2):
        assert np.all(lat.exp_coeffs == 0) and lat.which is Block.IDENTITY


def test_sample_latents_reproducible(angled_model):
    a = sample_latents(angled_model, "full", 5, seed=3)
    b = sample_latents(angled_model, "full", 5, seed=3)
    assert all(x.stacked.tobytes() == y.stacked.tobytes() for x, y in zip(a, b))
    with pytest.raises(RangeError):
        sample_latents(angled_model, "full", 0, seed=3)


def test_first_pc_latents(angled_model):
    lat = first_pc_latents(angled_model, Block.IDENTITY, 2, seed=4)
    assert np.all(lat.id_coeffs[2:] == 0) and np.all(lat.exp_coeffs == 0)
    assert np.all(lat.id_coeffs[:2] != 0)
    again = first_pc_latents(angled_model, Block.IDENTITY, 2, seed=4)
    assert lat.stacked.tobytes() == again.stacked.tobytes()


def test_first_pc_full_block_matches_sampler(angled_model):
    lat = first_pc_latents(angled_model, Block.EXPRESSION, angled_model.k, seed=6)
    ref = sample_latents(angled_model, Block.EXPRESSION, 1, seed=6)[0]
    assert lat.stacked.tobytes() == ref.stacked.tobytes()


def test_first_pc_range(angled_model):
    with pytest.raises(RangeError):
        first_pc_latents(angled_model, Block.IDENTITY, 6, seed=0)
