"""Identity/expression ambiguity analysis for linear 3D morphable models."""

__version__ = "0.1.0"

from .errors import (
    CorruptModel,
    DegenerateSubspace,
    DimensionError,
    IdExpError,
    MalformedManifest,
    NearlyParallel,
    RangeError,
    UnsupportedVersion,
)
from .model import Block, FaceShape, LatentVector, ShapeModel, restrict, synthesize
from .projection import ProjectionResult, mean_vertex_error, param_magnitude, project
from .subspace import (
    MeasureEstimate,
    OrthonormalBasis,
    PrincipalAngleSet,
    amplification,
    determinant_identity_check,
    mc_measure_estimate,
    orthonormalize,
    principal_angles,
    smallest_angle_curve,
)
from .synthetic import SyntheticSpec, first_pc_latents, generate, sample_latents
