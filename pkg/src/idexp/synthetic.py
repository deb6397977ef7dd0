"""Synthetic shape models with known ground truth, and latent samplers."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng
from .errors import DimensionError, RangeError
from .model import Block, LatentVector, ShapeModel
from .subspace import orthonormalize

MEAN_SCALE_MM = 50.0


def default_spectrum(size: int) -> list[float]:
    """Standard deviations decaying geometrically from 10 mm to 0.1 mm."""
    if size == 1:
        return [10.0]
    return np.geomspace(10.0, 0.1, size).tolist()


@dataclass
class SyntheticSpec:
    n: int
    m: int
    k: int
    prescribed_angles: list[float] | None = None
    id_spectrum: list[float] | None = None
    exp_spectrum: list[float] | None = None
    seed: int = 0
    name: str = "synthetic"

    def __post_init__(self):
        if self.id_spectrum is None:
            self.id_spectrum = default_spectrum(self.m)
        if self.exp_spectrum is None:
            self.exp_spectrum = default_spectrum(self.k)
        self.id_spectrum = [float(x) for x in self.id_spectrum]
        self.exp_spectrum = [float(x) for x in self.exp_spectrum]
        if self.prescribed_angles is not None:
            self.prescribed_angles = [float(x) for x in self.prescribed_angles]
        self.seed = rng.check_seed(self.seed)
        self.validate()

    def validate(self):
        if self.m < 1 or self.k < 1:
            raise RangeError(f"m and k must be >= 1, got m={self.m}, k={self.k}")
        if self.n % 3:
            raise DimensionError("n (multiple of 3)", "n % 3 == 0", self.n)
        if self.n < self.m + self.k:
            raise DimensionError("n (>= m + k)", f">= {self.m + self.k}", self.n)
        for what, spec, size in (("id_spectrum", self.id_spectrum, self.m),
                                 ("exp_spectrum", self.exp_spectrum, self.k)):
            s = np.asarray(spec)
            if s.shape != (size,):
                raise DimensionError(f"{what} length", size, len(spec))
            if not (np.all(np.isfinite(s)) and np.all(s > 0)):
                raise ValueError(f"{what} must be strictly positive")
            if np.any(np.diff(s) > 0):
                raise ValueError(f"{what} must be non-increasing")
        if self.prescribed_angles is not None:
            p = min(self.m, self.k)
            if len(self.prescribed_angles) != p:
                raise DimensionError("prescribed_angles length", p, len(self.prescribed_angles))
            for t in self.prescribed_angles:
                if not 0 < t <= math.pi / 2:
                    raise RangeError(f"prescribed angle {t} outside (0, pi/2]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        return cls(**d)


def generate(spec: SyntheticSpec) -> ShapeModel:
    """Build a model from ``spec``; identical specs give bit-identical models.

    With prescribed angles the identity basis is the first ``m`` canonical
    axes and expression column ``i`` is ``cos(t_i) e_i + sin(t_i) e_(m+i)``
    (or just ``e_(m+i)`` past the paired columns). That canonical pair is then
    carried into R^n by a Haar-random isometry. Without angles each basis is
    an orthonormalized Gaussian matrix.
    """
    spec.validate()
    n, m, k = spec.n, spec.m, spec.k
    gen = rng.generator(spec.seed)
    if spec.prescribed_angles is not None:
        canon = np.zeros((m + k, m + k))
        canon[:m, :m] = np.eye(m)
        for i in range(k):
            if i < m:
                t = spec.prescribed_angles[i]
                canon[i, m + i] = math.cos(t)
                canon[m + i, m + i] = math.sin(t)
            else:
                canon[m + i, m + i] = 1.0
        # first m + k columns of a Haar-distributed orthogonal matrix
        isometry = orthonormalize(gen.standard_normal((n, m + k))).q
        bases = isometry @ canon
        id_basis, exp_basis = bases[:, :m], bases[:, m:]
    else:
        id_basis = orthonormalize(gen.standard_normal((n, m))).q
        exp_basis = orthonormalize(gen.standard_normal((n, k))).q
    mean = MEAN_SCALE_MM * gen.standard_normal(n)
    return ShapeModel(mean, id_basis, exp_basis, spec.id_spectrum, spec.exp_spectrum, spec.name)


def sample_latents(model: ShapeModel, which, count: int, seed: int) -> list[LatentVector]:
    """``count`` independent standard-normal latents on the active block(s)."""
    if count < 1:
        raise RangeError(f"count must be >= 1, got {count}")
    which = Block.parse(which)
    gen = rng.generator(seed)
    draws = gen.standard_normal((count, model.block_size(which)))
    return [LatentVector.from_block(model, which, row) for row in draws]


def first_pc_latents(model: ShapeModel, which, n_active: int = 2, seed: int = 0) -> LatentVector:
    """Standard-normal values on the first ``n_active`` components of one block."""
    which = Block.parse(which)
    if which is Block.FULL:
        raise ValueError("first_pc_latents takes Identity or Expression")
    size = model.block_size(which)
    if not 1 <= n_active <= size:
        raise RangeError(f"n_active must be in [1, {size}], got {n_active}")
    coeffs = np.zeros(size)
    coeffs[:n_active] = rng.generator(seed).standard_normal(n_active)
    return LatentVector.from_block(model, which, coeffs)
