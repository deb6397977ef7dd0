"""Least-squares latent recovery and the two reconstruction metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateSubspace, DimensionError, RangeError
from .model import Block, FaceShape, LatentVector, ShapeModel, as_coords, synthesize
from .subspace import DEFAULT_TOL, orthonormalize


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    latents: LatentVector
    reconstruction: FaceShape
    residual_norm: float
    mean_vertex_error: float
    param_magnitude: float

    def to_dict(self) -> dict:
        return {
            "which": self.latents.which.value,
            "latents": self.latents.to_dict(),
            "residual_norm": self.residual_norm,
            "mean_vertex_error": self.mean_vertex_error,
            "param_magnitude": self.param_magnitude,
            "reconstruction": self.reconstruction.coords.tolist(),
        }


def mean_vertex_error(a, b) -> float:
    """Mean Euclidean distance between corresponding vertices, in mm."""
    a, b = as_coords(a), as_coords(b)
    if a.shape != b.shape:
        raise DimensionError("shape length", a.shape[0], b.shape[0])
    if a.shape[0] % 3:
        raise DimensionError("shape length (multiple of 3)", "n % 3 == 0", a.shape[0])
    if a.shape[0] == 0:
        return 0.0
    return float(np.mean(np.linalg.norm((a - b).reshape(-1, 3), axis=1)))


def param_magnitude(latents: LatentVector) -> float:
    """l2 norm of the active coefficients divided by their count."""
    active = latents.active
    if active.size == 0:
        raise RangeError("latent vector has no active coefficients")
    return float(np.linalg.norm(active) / active.size)


def project(
    model: ShapeModel, f, which=Block.FULL, scaled: bool = True, tol: float = DEFAULT_TOL
) -> ProjectionResult:
    """Closest model shape to ``f`` using only the coefficients of ``which``.

    The selected basis is factored as ``B = Q R``; the orthogonal projection
    of ``f - mean`` has coordinates ``g = Q^T (f - mean)`` and the latents
    solve ``R a = g``. The other block is held at zero. No regularization.
    """
    which = Block.parse(which)
    coords = as_coords(f)
    if coords.shape != (model.n,):
        raise DimensionError("shape length", model.n, coords.shape[0] if coords.ndim == 1 else coords.shape)
    basis = model.effective_basis(which, scaled)
    if basis.shape[1] == 0:
        raise DegenerateSubspace(f"{which.value} basis is empty")
    ortho = orthonormalize(basis, tol)
    if ortho.rank_deficient:
        raise DegenerateSubspace(
            f"{which.value} basis has rank {ortho.source_rank} < {basis.shape[1]}"
        )
    q = ortho.q
    r = q.T @ basis
    gamma = q.T @ (coords - model.mean)
    coeffs = solve_triangular(r, gamma, lower=False, check_finite=False)
    latents = LatentVector.from_block(model, which, coeffs)
    recon = synthesize(model, latents, scaled)
    return ProjectionResult(
        latents=latents,
        reconstruction=recon,
        residual_norm=float(np.linalg.norm(coords - recon.coords)),
        mean_vertex_error=mean_vertex_error(coords, recon.coords),
        param_magnitude=param_magnitude(latents),
    )
