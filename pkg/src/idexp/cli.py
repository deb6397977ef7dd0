"""Command-line interface.

Exit codes: 0 success, 1 runtime error, 2 usage error. All randomness is
driven by ``--seed`` (default 0), so identical command lines write identical
files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .container import (
    atomic_write,
    load_model,
    load_model_with_manifest,
    load_shape,
    rows_to_csv,
    save_model,
    save_shape,
    to_json,
    write_report,
)
from .errors import IdExpError
from .experiments import ExperimentId, run_angle_curve, run_experiment
from .model import Block, synthesize
from .projection import project
from .subspace import DEFAULT_TOL, orthonormalize, principal_angles
from .synthetic import SyntheticSpec, first_pc_latents, generate, sample_latents

WHICH_CHOICES = [b.value for b in Block]


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common() -> argparse.ArgumentParser:
    # Accepted before or after the subcommand; SUPPRESS keeps the later one from clobbering.
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="PRNG seed (default 0)")
    p.add_argument("--tolerance", type=float, default=argparse.SUPPRESS,
                   help=f"relative rank tolerance (default {DEFAULT_TOL:g})")
    p.add_argument("--format", choices=["csv", "json"], default=argparse.SUPPRESS,
                   help="output format (experiment default: both)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(
        prog="idexp", parents=[common],
        description="Identity/expression ambiguity analysis for linear 3D morphable models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    gen = sub.add_parser("gen", parents=[common], help="generate a synthetic model file")
    gen.add_argument("--config", type=Path, help="JSON file with SyntheticSpec fields")
    gen.add_argument("--n", type=int)
    gen.add_argument("--m", type=int)
    gen.add_argument("--k", type=int)
    gen.add_argument("--angles", type=_float_list, help="prescribed principal angles, radians")
    gen.add_argument("--id-spectrum", type=_float_list)
    gen.add_argument("--exp-spectrum", type=_float_list)
    gen.add_argument("--name")
    gen.add_argument("-o", "--out", type=Path, required=True, help="model file to write")

    info = sub.add_parser("info", parents=[common], help="dimensions, spectra and rank diagnostics")
    info.add_argument("model", type=Path)

    angles = sub.add_parser("angles", parents=[common], help="smallest-angle curve of a model")
    angles.add_argument("model", type=Path)
    angles.add_argument("-o", "--out", type=Path, help="write here instead of stdout")

    sample = sub.add_parser("sample", parents=[common], help="write a random shape file from a model")
    sample.add_argument("model", type=Path)
    sample.add_argument("--which", choices=WHICH_CHOICES, default="full")
    sample.add_argument("--n-active", type=int, help="vary only the first N components of --which")
    sample.add_argument("--noise", type=float, default=0.0, help="norm of added Gaussian noise, mm")
    sample.add_argument("--raw-coords", action="store_true")
    sample.add_argument("-o", "--out", type=Path, required=True)

    proj = sub.add_parser("project", parents=[common], help="recover latents for a shape file")
    proj.add_argument("model", type=Path)
    proj.add_argument("shape", type=Path)
    proj.add_argument("--which", choices=WHICH_CHOICES, default="full")
    proj.add_argument("--raw-coords", action="store_true", help="coefficients multiply unscaled columns")
    proj.add_argument("-o", "--out", type=Path, help="write here instead of stdout")

    exp = sub.add_parser("experiment", parents=[common], help="run a scripted experiment")
    exp.add_argument("name", choices=[e.value for e in ExperimentId])
    exp.add_argument("model", type=Path)
    exp.add_argument("--trials", type=int, default=100)
    exp.add_argument("--epsilon", type=float, default=1.0)
    exp.add_argument("--samples", type=int, default=10**6)
    exp.add_argument("--workers", type=int, default=1)
    exp.add_argument("--n-active", type=int, default=2)
    exp.add_argument("--raw-coords", action="store_true")
    exp.add_argument("--out", type=Path, required=True, help="directory for the report files")
    return parser


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(out, text.encode("utf-8"))


def cmd_gen(args):
    fields = {}
    if args.config is not None:
        fields.update(json.loads(args.config.read_text()))
    for key, value in (("n", args.n), ("m", args.m), ("k", args.k), ("prescribed_angles", args.angles),
                       ("id_spectrum", args.id_spectrum), ("exp_spectrum", args.exp_spectrum),
                       ("name", args.name)):
        if value is not None:
            fields[key] = value
    if args.seed_given or "seed" not in fields:
        fields["seed"] = args.seed
    missing = [key for key in ("n", "m", "k") if key not in fields]
    if missing:
        raise IdExpError(f"gen needs {', '.join(missing)} (flags or --config)")
    spec = SyntheticSpec(**fields)
    save_model(generate(spec), args.out, extra={"synthetic_spec": spec.to_dict()})


def cmd_info(args):
    model, manifest = load_model_with_manifest(args.model)
    uid = orthonormalize(model.id_basis, args.tolerance)
    uexp = orthonormalize(model.exp_basis, args.tolerance)
    combined = orthonormalize(np.hstack([model.id_basis, model.exp_basis]), args.tolerance)
    pa = principal_angles(uid, uexp)
    info = {
        "name": model.name,
        "n": model.n,
        "m": model.m,
        "k": model.k,
        "vertices": model.n_vertices,
        "id_stddev": model.id_stddev.tolist(),
        "exp_stddev": model.exp_stddev.tolist(),
        "rank": {"id": uid.source_rank, "exp": uexp.source_rank, "combined": combined.source_rank},
        "smallest_angle_rad": pa.smallest,
        "log_amplification": pa.log_amplification,
        "synthetic_spec": manifest.get("synthetic_spec"),
    }
    sys.stdout.write(to_json(info))


def cmd_angles(args):
    report = run_angle_curve(load_model(args.model), args.tolerance)
    if args.format == "json":
        _emit(to_json(report.to_dict()), args.out)
    else:
        _emit(rows_to_csv(report.columns, report.rows), args.out)


def cmd_sample(args):
    model = load_model(args.model)
    if args.n_active is not None:
        lat = first_pc_latents(model, args.which, args.n_active, args.seed)
    else:
        lat = sample_latents(model, args.which, 1, args.seed)[0]
    coords = synthesize(model, lat, scaled=not args.raw_coords).coords
    if args.noise > 0:
        from .rng import generator

        g = generator(args.seed, 1).standard_normal(model.n)
        coords = coords + args.noise * g / np.linalg.norm(g)
    save_shape(coords, args.out)


def cmd_project(args):
    model = load_model(args.model)
    shape = load_shape(args.shape)
    result = project(model, shape, args.which, scaled=not args.raw_coords, tol=args.tolerance)
    _emit(to_json(result.to_dict()), args.out)


def cmd_experiment(args):
    model = load_model(args.model)
    report = run_experiment(
        args.name, model,
        trials=args.trials, seed=args.seed, epsilon=args.epsilon, samples=args.samples,
        workers=args.workers, n_active=args.n_active, scaled=not args.raw_coords, tol=args.tolerance,
    )
    formats = (args.format,) if args.format else ("csv", "json")
    for path in write_report(report, args.out, formats):
        print(path)


COMMANDS = {
    "gen": cmd_gen,
    "info": cmd_info,
    "angles": cmd_angles,
    "sample": cmd_sample,
    "project": cmd_project,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    explicit = vars(args)
    args.seed_given = "seed" in explicit
    for key, default in (("seed", 0), ("tolerance", DEFAULT_TOL), ("format", None)):
        explicit.setdefault(key, default)
    try:
        COMMANDS[args.command](args)
    except (IdExpError, ValueError, OSError) as exc:
        message = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"idexp: error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
