"""Linear 3D morphable shape model: representation, synthesis, truncation.

A shape is ``mean + id_basis @ (id_stddev * a_id) + exp_basis @ (exp_stddev * a_exp)``.
Coefficients live in stddev-scaled coordinates so that a standard normal
draw is a sample from the model prior. Passing ``scaled=False`` to the
functions below switches to raw coordinates where coefficients multiply the
basis columns directly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, RangeError


class Block(str, enum.Enum):
    """Which coefficient block(s) are active."""

    IDENTITY = "id"
    EXPRESSION = "exp"
    FULL = "full"

    @classmethod
    def parse(cls, value) -> "Block":
        if isinstance(value, cls):
            return value
        aliases = {"identity": "id", "expression": "exp"}
        key = str(value).lower()
        return cls(aliases.get(key, key))


def _frozen(a, ndim, what):
    # one canonical memory order so equal models give bit-identical BLAS results
    arr = np.array(a, dtype=np.float64, copy=True, order="F")
    if arr.ndim != ndim:
        raise DimensionError(f"{what} ndim", ndim, arr.ndim)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ShapeModel:
    """Mean shape plus identity and expression bases (mm per unit coefficient).

    Arrays are copied on construction and marked read-only.
    """

    mean: np.ndarray
    id_basis: np.ndarray
    exp_basis: np.ndarray
    id_stddev: np.ndarray
    exp_stddev: np.ndarray
    name: str = "model"

    def __post_init__(self):
        mean = _frozen(self.mean, 1, "mean")
        id_basis = _frozen(self.id_basis, 2, "id_basis")
        exp_basis = _frozen(self.exp_basis, 2, "exp_basis")
        id_stddev = _frozen(self.id_stddev, 1, "id_stddev")
        exp_stddev = _frozen(self.exp_stddev, 1, "exp_stddev")
        n = mean.shape[0]
        m, k = id_basis.shape[1], exp_basis.shape[1]
        if n % 3:
            raise DimensionError("mean length (multiple of 3)", "n % 3 == 0", n)
        if id_basis.shape[0] != n:
            raise DimensionError("id_basis rows", n, id_basis.shape[0])
        if exp_basis.shape[0] != n:
            raise DimensionError("exp_basis rows", n, exp_basis.shape[0])
        if id_stddev.shape[0] != m:
            raise DimensionError("id_stddev length", m, id_stddev.shape[0])
        if exp_stddev.shape[0] != k:
            raise DimensionError("exp_stddev length", k, exp_stddev.shape[0])
        if m + k < 1 or n < m + k:
            raise DimensionError("basis sizes (1 <= m + k <= n)", f"<= {n}", m + k)
        for what, arr in (("mean", mean), ("id_basis", id_basis), ("exp_basis", exp_basis)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{what} contains non-finite entries")
        for what, sd in (("id_stddev", id_stddev), ("exp_stddev", exp_stddev)):
            if not (np.all(np.isfinite(sd)) and np.all(sd > 0)):
                raise ValueError(f"{what} must be strictly positive and finite")
        for what, basis in (("id_basis", id_basis), ("exp_basis", exp_basis)):
            if basis.shape[1] and np.any(np.linalg.norm(basis, axis=0) == 0):
                raise ValueError(f"{what} has a zero column")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "id_basis", id_basis)
        object.__setattr__(self, "exp_basis", exp_basis)
        object.__setattr__(self, "id_stddev", id_stddev)
        object.__setattr__(self, "exp_stddev", exp_stddev)

    @property
    def n(self) -> int:
        return self.mean.shape[0]

    @property
    def m(self) -> int:
        return self.id_basis.shape[1]

    @property
    def k(self) -> int:
        return self.exp_basis.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.n // 3

    def block_size(self, which) -> int:
        which = Block.parse(which)
        if which is Block.IDENTITY:
            return self.m
        if which is Block.EXPRESSION:
            return self.k
        return self.m + self.k

    def effective_basis(self, which, scaled: bool = True) -> np.ndarray:
        """Basis whose columns multiply the coefficients of ``which``."""
        which = Block.parse(which)
        ids = self.id_basis * self.id_stddev if scaled else self.id_basis
        exps = self.exp_basis * self.exp_stddev if scaled else self.exp_basis
        if which is Block.IDENTITY:
            return ids
        if which is Block.EXPRESSION:
            return exps
        return np.hstack([ids, exps])

    def equals(self, other: "ShapeModel") -> bool:
        """Bit-exact comparison of every array and the name."""
        return self.name == other.name and all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self._arrays(), other._arrays())
        )

    def _arrays(self):
        return (self.mean, self.id_basis, self.exp_basis, self.id_stddev, self.exp_stddev)


@dataclass(frozen=True, eq=False)
class FaceShape:
    """Flattened (x, y, z) vertex coordinates in mm."""

    coords: np.ndarray

    def __post_init__(self):
        coords = _frozen(self.coords, 1, "coords")
        if not np.all(np.isfinite(coords)):
            raise ValueError("shape coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    @property
    def vertices(self) -> np.ndarray:
        return self.coords.reshape(-1, 3)

    def __len__(self):
        return self.coords.shape[0]


def as_coords(shape) -> np.ndarray:
    if isinstance(shape, FaceShape):
        return shape.coords
    return np.asarray(shape, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class LatentVector:
    """Identity and expression coefficients; the inactive block is all zero."""

    id_coeffs: np.ndarray
    exp_coeffs: np.ndarray
    which: Block = Block.FULL

    def __post_init__(self):
        which = Block.parse(self.which)
        a_id = _frozen(self.id_coeffs, 1, "id_coeffs")
        a_exp = _frozen(self.exp_coeffs, 1, "exp_coeffs")
        if not (np.all(np.isfinite(a_id)) and np.all(np.isfinite(a_exp))):
            raise ValueError("latent coefficients must be finite")
        if which is Block.IDENTITY and np.any(a_exp != 0):
            raise ValueError("identity latents must have an all-zero expression block")
        if which is Block.EXPRESSION and np.any(a_id != 0):
            raise ValueError("expression latents must have an all-zero identity block")
        object.__setattr__(self, "which", which)
        object.__setattr__(self, "id_coeffs", a_id)
        object.__setattr__(self, "exp_coeffs", a_exp)

    @classmethod
    def from_block(cls, model: ShapeModel, which, coeffs) -> "LatentVector":
        """Place ``coeffs`` into the block selected by ``which``; zeros elsewhere."""
        which = Block.parse(which)
        coeffs = np.asarray(coeffs, dtype=np.float64)
        size = model.block_size(which)
        if coeffs.shape != (size,):
            raise DimensionError(f"{which.value} coefficient count", size, coeffs.shape[0] if coeffs.ndim == 1 else coeffs.shape)
        if which is Block.IDENTITY:
            return cls(coeffs, np.zeros(model.k), which)
        if which is Block.EXPRESSION:
            return cls(np.zeros(model.m), coeffs, which)
        return cls(coeffs[: model.m], coeffs[model.m :], which)

    @classmethod
    def zeros(cls, model: ShapeModel, which=Block.FULL) -> "LatentVector":
        return cls(np.zeros(model.m), np.zeros(model.k), which)

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.id_coeffs, self.exp_coeffs])

    @property
    def active(self) -> np.ndarray:
        if self.which is Block.IDENTITY:
            return self.id_coeffs
        if self.which is Block.EXPRESSION:
            return self.exp_coeffs
        return self.stacked

    def to_dict(self) -> dict:
        return {
            "which": self.which.value,
            "id_coeffs": self.id_coeffs.tolist(),
            "exp_coeffs": self.exp_coeffs.tolist(),
        }


def synthesize(model: ShapeModel, latents: LatentVector, scaled: bool = True) -> FaceShape:
    """Evaluate the model at ``latents``."""
    if latents.id_coeffs.shape[0] != model.m:
        raise DimensionError("id_coeffs length", model.m, latents.id_coeffs.shape[0])
    if latents.exp_coeffs.shape[0] != model.k:
        raise DimensionError("exp_coeffs length", model.k, latents.exp_coeffs.shape[0])
    a_id, a_exp = latents.id_coeffs, latents.exp_coeffs
    if scaled:
        a_id = a_id * model.id_stddev
        a_exp = a_exp * model.exp_stddev
    return FaceShape(model.mean + model.id_basis @ a_id + model.exp_basis @ a_exp)


def restrict(model: ShapeModel, which, n_components: int) -> ShapeModel:
    """Keep only the leading ``n_components`` columns of one basis."""
    which = Block.parse(which)
    if which is Block.FULL:
        raise ValueError("restrict takes Identity or Expression; apply it twice for both")
    size = model.block_size(which)
    if not 1 <= n_components <= size:
        raise RangeError(f"n_components must be in [1, {size}], got {n_components}")
    if which is Block.IDENTITY:
        return ShapeModel(
            model.mean, model.id_basis[:, :n_components], model.exp_basis,
            model.id_stddev[:n_components], model.exp_stddev, model.name,
        )
    return ShapeModel(
        model.mean, model.id_basis, model.exp_basis[:, :n_components],
        model.id_stddev, model.exp_stddev[:n_components], model.name,
    )
