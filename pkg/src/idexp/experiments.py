"""Scripted identity/expression cross-explanation experiments.

Each ``run_*`` function returns an :class:`ExperimentReport` whose ``config``
echoes every parameter (including the seed and a digest of the model), so
``rerun(report.config, model)`` regenerates the rows bit for bit.
"""

from __future__ import annotations

import enum
import hashlib
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import DegenerateSubspace, RangeError
from .model import Block, ShapeModel, restrict, synthesize
from .projection import project
from .subspace import (
    DEFAULT_TOL,
    determinant_identity_check,
    mc_measure_estimate,
    smallest_angle_curve,
)
from .synthetic import first_pc_latents, sample_latents


class ExperimentId(str, enum.Enum):
    CROSS_EXPLAIN = "cross-explain"
    PC_CROSS = "pc-cross"
    ANGLE_CURVE = "angle-curve"
    ERROR_VS_PARAMS = "error-vs-params"
    MEASURE = "measure"


# Column order of each experiment's CSV output.
COLUMNS = {
    ExperimentId.CROSS_EXPLAIN: [
        "trial", "source", "projection", "mean_vertex_error_mm", "param_magnitude", "residual_norm_mm",
    ],
    ExperimentId.PC_CROSS: [
        "trial", "source", "projection", "mean_vertex_error_mm", "param_magnitude", "residual_norm_mm",
    ],
    ExperimentId.ANGLE_CURVE: ["components", "smallest_angle_rad", "smallest_angle_deg"],
    ExperimentId.ERROR_VS_PARAMS: [
        "components", "projection", "trials", "mean_vertex_error_mm", "param_magnitude", "residual_norm_mm",
    ],
    ExperimentId.MEASURE: ["check", "value", "reference", "ratio", "rel_error", "rel_stderr", "unbounded"],
}

METRICS = ("mean_vertex_error_mm", "param_magnitude", "residual_norm_mm")


@dataclass
class ExperimentReport:
    experiment_id: ExperimentId
    config: dict
    rows: list[dict]
    summary: dict = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        return COLUMNS[self.experiment_id]

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id.value,
            "config": self.config,
            "columns": self.columns,
            "rows": self.rows,
            "summary": self.summary,
        }


def model_digest(model: ShapeModel) -> str:
    h = hashlib.sha256()
    for arr in model._arrays():
        h.update(np.asarray(arr.shape, dtype="<i8").tobytes())
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes(order="F"))
    return h.hexdigest()


def _config(experiment: ExperimentId, model: ShapeModel, **params) -> dict:
    return {
        "experiment": experiment.value,
        "model": {"name": model.name, "n": model.n, "m": model.m, "k": model.k,
                  "sha256": model_digest(model)},
        **params,
    }


def _summarize(rows, keys) -> dict:
    groups = defaultdict(list)
    for row in rows:
        groups["/".join(str(row[k]) for k in keys)].append(row)
    out = {}
    for name, group in groups.items():
        stats = {}
        for metric in METRICS:
            vals = np.array([r[metric] for r in group], dtype=float)
            stats[metric] = {"mean": float(vals.mean()), "std": float(vals.std())}
        stats["count"] = len(group)
        out[name] = stats
    return out


def _projection_row(trial, source, which, result) -> dict:
    return {
        "trial": trial,
        "source": source,
        "projection": which.value,
        "mean_vertex_error_mm": result.mean_vertex_error,
        "param_magnitude": result.param_magnitude,
        "residual_norm_mm": result.residual_norm,
    }


def _check_trials(trials):
    if trials < 1:
        raise RangeError(f"trials must be >= 1, got {trials}")


def run_cross_explain(model: ShapeModel, trials: int, seed: int, scaled: bool = True,
                      tol: float = DEFAULT_TOL) -> ExperimentReport:
    """Random full faces explained by identity only, expression only, and both."""
    _check_trials(trials)
    rows = []
    for t, lat in enumerate(sample_latents(model, Block.FULL, trials, seed)):
        face = synthesize(model, lat, scaled)
        for which in (Block.IDENTITY, Block.EXPRESSION, Block.FULL):
            rows.append(_projection_row(t, "full", which, project(model, face, which, scaled, tol)))
    config = _config(ExperimentId.CROSS_EXPLAIN, model, trials=trials, seed=seed, scaled=scaled, tol=tol)
    return ExperimentReport(ExperimentId.CROSS_EXPLAIN, config, rows, _summarize(rows, ["projection"]))


def run_pc_cross(model: ShapeModel, trials: int, seed: int, n_active: int = 2, scaled: bool = True,
                 tol: float = DEFAULT_TOL) -> ExperimentReport:
    """Faces varying only the leading components of one block, explained by the other."""
    _check_trials(trials)
    child = rng.generator(seed).integers(0, 2**63, size=(trials, 2), dtype=np.uint64)
    rows = []
    for t in range(trials):
        for s, (source, target) in enumerate(((Block.IDENTITY, Block.EXPRESSION),
                                              (Block.EXPRESSION, Block.IDENTITY))):
            active = min(n_active, model.block_size(source))
            lat = first_pc_latents(model, source, active, int(child[t, s]))
            face = synthesize(model, lat, scaled)
            rows.append(_projection_row(t, source.value, target, project(model, face, target, scaled, tol)))
    config = _config(ExperimentId.PC_CROSS, model, trials=trials, seed=seed, n_active=n_active,
                     scaled=scaled, tol=tol)
    return ExperimentReport(ExperimentId.PC_CROSS, config, rows, _summarize(rows, ["source", "projection"]))


def run_angle_curve(model: ShapeModel, tol: float = DEFAULT_TOL) -> ExperimentReport:
    """Smallest principal angle for j = 1 .. min(m, k) leading components."""
    curve = smallest_angle_curve(model, min(model.m, model.k), tol)
    rows = [{"components": j, "smallest_angle_rad": theta, "smallest_angle_deg": math.degrees(theta)}
            for j, theta in curve]
    thetas = [theta for _, theta in curve]
    summary = {"first": thetas[0], "last": thetas[-1], "min": min(thetas), "max": max(thetas)}
    return ExperimentReport(ExperimentId.ANGLE_CURVE, _config(ExperimentId.ANGLE_CURVE, model, tol=tol),
                            rows, summary)


def run_error_vs_params(model: ShapeModel, trials: int = 100, seed: int = 0, scaled: bool = True,
                        tol: float = DEFAULT_TOL) -> ExperimentReport:
    """Mean reconstruction error of one fixed face sample against truncated models.

    For parameter count ``j`` the identity and expression projections use the
    first ``min(j, m)`` / ``min(j, k)`` columns of their block; the full
    projection truncates both blocks to ``j`` at once.
    """
    _check_trials(trials)
    faces = [synthesize(model, lat, scaled).coords
             for lat in sample_latents(model, Block.FULL, trials, seed)]
    rows = []
    for j in range(1, max(model.m, model.k) + 1):
        jid, jexp = min(j, model.m), min(j, model.k)
        truncated = {
            Block.IDENTITY: restrict(model, Block.IDENTITY, jid),
            Block.EXPRESSION: restrict(model, Block.EXPRESSION, jexp),
            Block.FULL: restrict(restrict(model, Block.IDENTITY, jid), Block.EXPRESSION, jexp),
        }
        for which, sub in truncated.items():
            results = [project(sub, face, which, scaled, tol) for face in faces]
            rows.append({
                "components": j,
                "projection": which.value,
                "trials": trials,
                "mean_vertex_error_mm": float(np.mean([r.mean_vertex_error for r in results])),
                "param_magnitude": float(np.mean([r.param_magnitude for r in results])),
                "residual_norm_mm": float(np.mean([r.residual_norm for r in results])),
            })
    config = _config(ExperimentId.ERROR_VS_PARAMS, model, trials=trials, seed=seed, scaled=scaled, tol=tol)
    return ExperimentReport(ExperimentId.ERROR_VS_PARAMS, config, rows, _summarize(rows, ["projection"]))


def run_measure_check(model: ShapeModel, epsilon: float = 1.0, samples: int = 10**6, seed: int = 0,
                      workers: int = 1, tol: float = DEFAULT_TOL) -> ExperimentReport:
    """Determinant identity plus Monte Carlo latent-volume estimate for one model."""
    config = _config(ExperimentId.MEASURE, model, epsilon=epsilon, samples=samples, seed=seed,
                     workers=workers, tol=tol)
    try:
        det = determinant_identity_check(model, tol)
        est = mc_measure_estimate(model, epsilon, samples, seed, workers=workers, tol=tol)
    except DegenerateSubspace as exc:
        row = {"check": "degenerate", "value": math.inf, "reference": math.nan, "ratio": math.nan,
               "rel_error": math.nan, "rel_stderr": math.nan, "unbounded": True}
        return ExperimentReport(ExperimentId.MEASURE, config, [row], {"unbounded": True, "reason": str(exc)})

    def row(check, value, reference, rel_stderr=math.nan, unbounded=False):
        ratio = value / reference if reference and math.isfinite(reference) else math.nan
        return {
            "check": check,
            "value": value,
            "reference": reference,
            "ratio": ratio,
            "rel_error": abs(ratio - 1) if math.isfinite(ratio) else math.nan,
            "rel_stderr": rel_stderr,
            "unbounded": unbounded,
        }

    rows = [{**row("determinant", det.lhs, det.rhs), "rel_error": det.rel_error}]
    u = est.unbounded
    rows.append(row("mc_measure", est.mc_alpha_measure, est.analytic_alpha_measure, est.mc_rel_stderr, u))
    rows.append(row("cov_ratio_measure", est.cov_ratio_measure, est.direct_det_measure, unbounded=u))
    rows.append(row("direct_det_measure", est.direct_det_measure, est.analytic_alpha_measure, unbounded=u))
    rows.append(row("lower_bound", est.mc_alpha_measure, est.lower_bound, est.mc_rel_stderr, u))
    summary = est.to_dict()
    summary["determinant_rel_error"] = det.rel_error
    return ExperimentReport(ExperimentId.MEASURE, config, rows, summary)


_RUNNERS = {
    ExperimentId.CROSS_EXPLAIN: (run_cross_explain, ("trials", "seed", "scaled", "tol")),
    ExperimentId.PC_CROSS: (run_pc_cross, ("trials", "seed", "n_active", "scaled", "tol")),
    ExperimentId.ANGLE_CURVE: (run_angle_curve, ("tol",)),
    ExperimentId.ERROR_VS_PARAMS: (run_error_vs_params, ("trials", "seed", "scaled", "tol")),
    ExperimentId.MEASURE: (run_measure_check, ("epsilon", "samples", "seed", "workers", "tol")),
}


def run_experiment(experiment, model: ShapeModel, **params) -> ExperimentReport:
    """Dispatch by experiment id; unknown keyword parameters are ignored."""
    experiment = ExperimentId(experiment)
    func, accepted = _RUNNERS[experiment]
    return func(model, **{k: v for k, v in params.items() if k in accepted})


def rerun(config: dict, model: ShapeModel) -> ExperimentReport:
    """Regenerate a report from its echoed config; the model must match the digest."""
    digest = config["model"]["sha256"]
    if model_digest(model) != digest:
        raise ValueError("model does not match the digest recorded in the report config")
    params = {k: v for k, v in config.items() if k not in ("experiment", "model")}
    return run_experiment(config["experiment"], model, **params)
