"""Principal angles between the identity and expression subspaces and the
latent-volume amplification they cause.

If a shape is only known up to an ``epsilon`` ball, the least-squares latents
fill a region whose volume is the ball volume times ``prod(1 / sin(theta_i))``
over the principal angles between the two subspaces. The functions here
compute the angles, check the determinant identity behind that statement,
and estimate the latent volume by Monte Carlo.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import gammaln

from . import rng
from .errors import DegenerateSubspace, DimensionError, NearlyParallel, RangeError
from .model import ShapeModel

DEFAULT_TOL = 1e-10
SINE_FLOOR = 1e-14
COND_LIMIT = 1e12
# Angles below this are taken from the sine formulation, above from cosines.
_SINE_SWITCH = math.pi / 4


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    q: np.ndarray
    source_rank: int
    rank_deficient: bool = False

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def p(self) -> int:
        return self.q.shape[1]


@dataclass(frozen=True, eq=False)
class PrincipalAngleSet:
    angles: np.ndarray
    sines: np.ndarray
    log_amplification: float

    @property
    def smallest(self) -> float:
        return float(self.angles[0])

    @property
    def amplification(self) -> float:
        return math.exp(self.log_amplification) if math.isfinite(self.log_amplification) else math.inf


@dataclass
class MeasureEstimate:
    """Volume of the latent region reached from an ``epsilon`` ball of shapes.

    ``analytic_alpha_measure`` is the closed form from the principal angles.
    ``direct_det_measure`` divides the ball volume by ``|det(Q^T M)|``.
    ``mc_alpha_measure`` is the Monte Carlo estimate (nan until sampled) and
    ``cov_ratio_measure`` the sample-covariance ratio of image to source cloud.
    """

    epsilon: float
    dim: int
    ball_measure_mu0: float
    analytic_alpha_measure: float
    lower_bound: float
    log_amplification: float
    unbounded: bool = False
    direct_det_measure: float = math.nan
    mc_alpha_measure: float = math.nan
    mc_rel_stderr: float = math.nan
    cov_ratio_measure: float = math.nan
    samples: int = 0
    seed: int | None = None
    workers: int = 1

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DeterminantCheck:
    lhs: float
    rhs: float
    rel_error: float


def orthonormalize(basis, tol: float = DEFAULT_TOL) -> OrthonormalBasis:
    """Orthonormal basis for the column space of ``basis``.

    Rank is the number of singular values above ``tol`` times the largest.
    Full-rank input goes through a thin QR, so the first ``j`` output columns
    span the first ``j`` input columns. Rank-deficient input returns the
    leading left singular vectors and sets ``rank_deficient``.
    """
    a = np.asarray(basis, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    n, p = a.shape
    if p > n:
        raise DimensionError("column count (p <= n)", f"<= {n}", p)
    if not np.all(np.isfinite(a)):
        raise ValueError("basis contains non-finite entries")
    if p == 0 or not np.any(a):
        raise DegenerateSubspace("cannot orthonormalize an all-zero basis")
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    rank = int(np.sum(s > tol * s[0]))
    if rank == p:
        q, r = np.linalg.qr(a)
        # positive diagonal makes the factor unique
        q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
        return OrthonormalBasis(q, rank, False)
    return OrthonormalBasis(u[:, :rank].copy(), rank, True)


def _as_basis(x, tol=DEFAULT_TOL) -> OrthonormalBasis:
    return x if isinstance(x, OrthonormalBasis) else orthonormalize(x, tol)


def principal_angles(u, v) -> PrincipalAngleSet:
    """Principal angles between span(u) and span(v), ascending, in radians.

    Small angles come from the singular values of the part of the smaller
    basis orthogonal to the larger one (their sines); the rest from the
    singular values of ``u^T v`` (their cosines), which keeps full relative
    accuracy at both ends of ``[0, pi/2]``.
    """
    u, v = _as_basis(u), _as_basis(v)
    if u.n != v.n:
        raise DimensionError("ambient dimension", u.n, v.n)
    a, b = (u.q, v.q) if u.p >= v.p else (v.q, u.q)
    ab = a.T @ b
    cosines = np.clip(np.linalg.svd(ab, compute_uv=False), 0.0, 1.0)
    from_cos = np.arccos(cosines)
    resid = b - a @ ab
    resid = resid - a @ (a.T @ resid)
    sines = np.clip(np.sort(np.linalg.svd(resid, compute_uv=False)), 0.0, 1.0)
    from_sin = np.arcsin(sines)
    angles = np.where(from_sin < _SINE_SWITCH, from_sin, from_cos)
    angles = np.sort(np.clip(angles, 0.0, math.pi / 2))
    s = np.sin(angles)
    with np.errstate(divide="ignore"):
        log_amp = float(-np.sum(np.log(s)))
    return PrincipalAngleSet(angles, s, log_amp)


def smallest_angle_curve(model: ShapeModel, max_components: int, tol: float = DEFAULT_TOL):
    """``[(j, theta_1(j))]`` for the first ``j`` identity and expression columns."""
    limit = min(model.m, model.k)
    if not 1 <= max_components <= limit:
        raise RangeError(f"max_components must be in [1, {limit}], got {max_components}")
    curve = []
    for j in range(1, max_components + 1):
        pa = principal_angles(
            orthonormalize(model.id_basis[:, :j], tol),
            orthonormalize(model.exp_basis[:, :j], tol),
        )
        curve.append((j, pa.smallest))
    return curve


def log_ball_volume(dim: int, radius: float) -> float:
    return 0.5 * dim * math.log(math.pi) + dim * math.log(radius) - float(gammaln(0.5 * dim + 1))


def ball_volume(dim: int, radius: float) -> float:
    """Lebesgue volume of a ``dim``-ball of the given radius."""
    return math.exp(log_ball_volume(dim, radius))


def amplification(angles: PrincipalAngleSet, epsilon: float, m: int, k: int) -> MeasureEstimate:
    """Closed-form latent volume ``mu0 * prod(1 / sin theta_i)``.

    A sine below ``SINE_FLOOR`` marks the result unbounded with an infinite
    measure instead of raising.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if len(angles.angles) != min(m, k):
        raise DimensionError("angle count", min(m, k), len(angles.angles))
    dim = m + k
    log_mu0 = log_ball_volume(dim, epsilon)
    mu0 = math.exp(log_mu0)
    unbounded = bool(np.any(angles.sines < SINE_FLOOR))
    if unbounded:
        return MeasureEstimate(epsilon, dim, mu0, math.inf, math.inf, math.inf, True)
    analytic = math.exp(log_mu0 + angles.log_amplification)
    lower = mu0 / float(angles.sines[0]) if len(angles.sines) else mu0
    return MeasureEstimate(epsilon, dim, mu0, analytic, lower, angles.log_amplification)


def latent_map(model: ShapeModel, tol: float = DEFAULT_TOL):
    """Return ``(Q, M, A)`` with ``M = [U_id, U_exp]`` orthonormalized blocks,
    ``Q = [U_id, Q_exp]`` an orthonormal basis of span(M) whose first ``m``
    columns are ``U_id``, and ``A = Q^T M``.
    """
    if model.m == 0 or model.k == 0:
        raise DegenerateSubspace("both identity and expression blocks must be nonempty")
    uid = orthonormalize(model.id_basis, tol)
    uexp = orthonormalize(model.exp_basis, tol)
    if uid.rank_deficient or uexp.rank_deficient:
        raise DegenerateSubspace(
            f"rank-deficient block: id rank {uid.source_rank}/{model.m}, "
            f"exp rank {uexp.source_rank}/{model.k}"
        )
    resid = uexp.q - uid.q @ (uid.q.T @ uexp.q)
    resid = resid - uid.q @ (uid.q.T @ resid)
    # resid has singular values sin(theta_i) (and ones), so rank is judged on an absolute scale
    if np.linalg.svd(resid, compute_uv=False)[-1] <= tol:
        raise NearlyParallel("expression subspace is (numerically) inside span of the identity subspace")
    qexp = orthonormalize(resid, tol)
    if qexp.rank_deficient:
        raise NearlyParallel(
            f"combined basis rank {model.m + qexp.source_rank} < {model.m + model.k}"
        )
    q = np.hstack([uid.q, qexp.q])
    m = np.hstack([uid.q, uexp.q])
    return q, m, q.T @ m


def determinant_identity_check(model: ShapeModel, tol: float = DEFAULT_TOL) -> DeterminantCheck:
    """Compare ``|det(Q^T M)|`` against the product of principal-angle sines."""
    q, m, a = latent_map(model, tol)
    sign, logdet = np.linalg.slogdet(a)
    pa = principal_angles(
        OrthonormalBasis(m[:, : model.m], model.m), OrthonormalBasis(m[:, model.m :], model.k)
    )
    log_rhs = -pa.log_amplification
    lhs = math.exp(logdet) if sign != 0 else 0.0
    rhs = math.exp(log_rhs)
    rel = abs(math.expm1(logdet - log_rhs)) if sign != 0 else 1.0
    return DeterminantCheck(lhs, rhs, rel)


def _uniform_ball(gen: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    g = gen.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * gen.random(count) ** (1.0 / dim)
    return g * r[:, None]


def _log_cov_volume(points: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(np.cov(points, rowvar=False).reshape(points.shape[1], -1))
    return logdet if sign > 0 else -math.inf


def mc_measure_estimate(
    model: ShapeModel,
    epsilon: float,
    samples: int,
    seed: int,
    workers: int = 1,
    batches: int = 100,
    tol: float = DEFAULT_TOL,
) -> MeasureEstimate:
    """Monte Carlo estimate of the latent volume reached from an ``epsilon`` ball.

    Points are drawn uniformly in the ``epsilon`` ball of R^(m+k) (the
    orthonormal shape-noise coordinates) and mapped to latents with
    ``(Q^T M)^-1``. The volume ratio image/source equals the square root of
    the ratio of covariance determinants. ``mc_alpha_measure`` uses the image
    cloud's sample covariance against the exact covariance of the uniform
    ball, ``eps^2 / (d + 2) * I``, so it carries genuine sampling error; its
    relative standard error comes from ``batches`` contiguous batch means.
    ``cov_ratio_measure`` uses the source cloud's sample covariance instead,
    which cancels the sampling error and must equal the direct determinant.

    Worker ``w`` draws its share from substream ``w`` of ``seed``; the result
    is deterministic for fixed ``(seed, samples, workers)``.
    """
    if samples < 1000:
        raise RangeError(f"samples must be >= 1000, got {samples}")
    if workers < 1:
        raise RangeError(f"workers must be >= 1, got {workers}")
    seed = rng.check_seed(seed)
    try:
        q, m, a = latent_map(model, tol)
    except NearlyParallel:
        a = None
    pa = principal_angles(orthonormalize(model.id_basis, tol), orthonormalize(model.exp_basis, tol))
    est = amplification(pa, epsilon, model.m, model.k)
    est.samples, est.seed, est.workers = samples, seed, workers
    if a is None or est.unbounded or np.linalg.cond(a) > COND_LIMIT:
        est.unbounded = True
        est.analytic_alpha_measure = est.direct_det_measure = math.inf
        est.mc_alpha_measure = est.cov_ratio_measure = math.inf
        est.mc_rel_stderr = 0.0
        return est

    dim = a.shape[0]
    _, logdet = np.linalg.slogdet(a)
    log_mu0 = log_ball_volume(dim, epsilon)
    est.direct_det_measure = math.exp(log_mu0 - logdet)

    shares = [samples // workers + (w < samples % workers) for w in range(workers)]

    def draw(w):
        src = _uniform_ball(rng.generator(seed, w), shares[w], dim, epsilon)
        return src, np.linalg.solve(a, src.T).T

    if workers == 1:
        parts = [draw(0)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(draw, range(workers)))
    source = np.vstack([p[0] for p in parts])
    image = np.vstack([p[1] for p in parts])

    log_src_exact = dim * math.log(epsilon**2 / (dim + 2))

    def volume(img, log_src):
        return math.exp(log_mu0 + 0.5 * (_log_cov_volume(img) - log_src))

    est.mc_alpha_measure = volume(image, log_src_exact)
    est.cov_ratio_measure = volume(image, _log_cov_volume(source))
    batches = max(2, min(batches, samples // (10 * dim)))
    per_batch = np.array([volume(chunk, log_src_exact) for chunk in np.array_split(image, batches)])
    est.mc_rel_stderr = float(per_batch.std(ddof=1) / math.sqrt(batches) / per_batch.mean())
    return est
