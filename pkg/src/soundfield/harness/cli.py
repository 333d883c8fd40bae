"""Command line entry point.

Subcommands::

    simulate  --config scene.yaml --out DIR         true field and noisy observations
    estimate  --config scene.yaml --estimator NAME  fitted solution files
    evaluate  --config scene.yaml SOLUTION...       NMSE of solution files
    sweep     --config experiment.yaml --out DIR    full frequency sweep
    export    --config scene.yaml [SOLUTION]        heatmap slice CSV and PNG

Exit status is 0 on success, 2 for configuration errors and 3 for
numerical failures.
"""
import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np
import yaml
from threadpoolctl import threadpool_limits

from ..errors import ConfigError, DomainError, NumericalError
from . import io
from .config import load_experiment, load_scene
from .estimators import ESTIMATORS, FitContext, fit_estimator, validate_params
from .experiment import noise_seed, run_experiment
from .export import PlaneSpec, export_heatmap
from .metrics import nmse

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

log = logging.getLogger("soundfield")


def _fmt(x):
    return repr(float(x))


def _frequencies(args, scene_file):
    freqs = args.frequency or scene_file.frequencies
    if not freqs:
        raise ConfigError("no frequencies: add 'frequencies' to the scene or pass --frequency", scene_file.path)
    return freqs


def _seed(args, default):
    return default if args.seed is None else args.seed


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_params(items):
    params = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}", "--param")
        key, value = item.split("=", 1)
        params[key] = yaml.safe_load(value)
    return params


def cmd_simulate(args):
    sf = load_scene(args.config)
    scene = sf.scene
    seed = _seed(args, scene.seed)
    out = _out_dir(args)
    points = scene.region.grid(sf.grid.points_per_axis, sf.grid.shrink)
    truth_rows, obs_rows = [], []
    for f in _frequencies(args, sf):
        k = scene.wavenumber(f)
        for p, u in zip(points, scene.field(points, k)):
            truth_rows.append([_fmt(f), *map(_fmt, p), _fmt(u.real), _fmt(u.imag)])
        obs = scene.observe(k, seed=noise_seed(seed, f))
        for m, (p, y) in enumerate(zip(obs.positions, obs.pressures)):
            obs_rows.append([_fmt(f), m, *map(_fmt, p), _fmt(y.real), _fmt(y.imag)])
    for name, header, rows in [("truth.csv", ["frequency_hz", "x", "y", "z", "re", "im"], truth_rows),
                               ("observations.csv", ["frequency_hz", "mic", "x", "y", "z", "re", "im"], obs_rows)]:
        with open(out / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    print(f"wrote {out / 'truth.csv'} and {out / 'observations.csv'}")


def cmd_estimate(args):
    if not args.estimator:
        raise ConfigError("--estimator is required", "estimate")
    if args.estimator not in ESTIMATORS:
        raise ConfigError(f"unknown estimator {args.estimator!r}; choose from {', '.join(ESTIMATORS)}",
                          "--estimator")
    params = _parse_params(args.param)
    validate_params(args.estimator, params, "--param")
    sf = load_scene(args.config)
    scene = sf.scene
    seed = _seed(args, scene.seed)
    out = _out_dir(args)
    points = scene.region.grid(sf.grid.points_per_axis, sf.grid.shrink)
    with threadpool_limits(limits=args.threads):
        for f in _frequencies(args, sf):
            k = scene.wavenumber(f)
            obs = scene.observe(k, seed=noise_seed(seed, f))
            ctx = FitContext(scene=scene, k=k, freq_hz=f, seed=seed, eval_points=points)
            fitted = fit_estimator(args.estimator, obs, ctx, params)
            path = out / f"{args.estimator}_{f:g}Hz.json"
            io.save_solution(path, fitted.payload)
            print(f"wrote {path}")


def cmd_evaluate(args):
    if not args.solutions:
        raise ConfigError("no solution files given", "evaluate")
    sf = load_scene(args.config)
    scene = sf.scene
    points = scene.region.grid(sf.grid.points_per_axis, sf.grid.shrink)
    rows = []
    for path in args.solutions:
        payload = io.load_solution(path)
        k = io.solution_wavenumber(payload)
        freq = payload.get("frequency_hz", k * scene.room.c / (2 * np.pi))
        value = nmse(io.predictor(payload)(points), scene.field(points, k))
        rows.append([_fmt(freq), payload.get("estimator", Path(path).stem), _fmt(value)])
    out = _out_dir(args)
    with open(out / "nmse.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency_hz", "estimator", "nmse_db"])
        writer.writerows(rows)
    for row in rows:
        print(",".join(map(str, row)))


def cmd_sweep(args):
    config = load_experiment(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.estimator:
        config.estimators = [e for e in config.estimators if e.name == args.estimator or e.label == args.estimator]
        if not config.estimators:
            raise ConfigError(f"no estimator {args.estimator!r} in the experiment", "--estimator")
    bundle = run_experiment(config, threads=args.threads, out_dir=args.out or config.output,
                            figures=False if args.no_figures else None, timing=True if args.timing else None)
    for f, label, value in bundle.rows:
        print(f"{f:g} Hz  {label:24s} {value:8.2f} dB")
    print(f"results in {bundle.out_dir}")


def cmd_export(args):
    sf = load_scene(args.config)
    scene = sf.scene
    plane = PlaneSpec(args.axis, args.offset, args.points)
    if args.solution:
        payload = io.load_solution(args.solution)
        sampler = io.predictor(payload)
    else:
        k = scene.wavenumber(_frequencies(args, sf)[0])
        sampler = lambda pts: scene.field(pts, k)  # noqa: E731
    out = Path(args.out)
    if out.suffix.lower() != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "heatmap.csv"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    pts, values = export_heatmap(sampler, scene.region, plane, out)
    if not args.no_figures:
        from .plots import plot_heatmaps

        uv = np.delete(pts, "xyz".index(args.axis), axis=1)
        plot_heatmaps(uv, {out.stem: values}, out.with_suffix(".png"))
    print(f"wrote {out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="soundfield", description="Sound field estimation toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress and diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default="results"):
        p.add_argument("--config", required=True, help="scene or experiment YAML file")
        p.add_argument("--seed", type=int, default=None, help="override the random seed (u64)")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--estimator", default=None, help="estimator name")
        p.add_argument("--frequency", type=float, action="append", help="frequency in Hz (repeatable)")
        return p

    common(sub.add_parser("simulate", help="true field on the evaluation grid and noisy observations"))
    p = common(sub.add_parser("estimate", help="fit an estimator and write solution files"))
    p.add_argument("--param", action="append", help="estimator parameter as key=value (repeatable)")
    p = common(sub.add_parser("evaluate", help="NMSE of solution files against the simulated truth"))
    p.add_argument("solutions", nargs="*", help="solution JSON files")
    p = common(sub.add_parser("sweep", help="run an experiment file"), out_default=None)
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.add_argument("--timing", action="store_true", help="also write wall-clock fit times to timing.csv")
    p = common(sub.add_parser("export", help="write a heatmap slice CSV"), out_default="heatmap.csv")
    p.add_argument("solution", nargs="?", help="solution file (default: true field)")
    p.add_argument("--axis", choices=["x", "y", "z"], default="z")
    p.add_argument("--offset", type=float, default=0.0, help="plane offset from the region centre (m)")
    p.add_argument("--points", type=int, default=41, help="lattice points per axis")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    return parser


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "evaluate": cmd_evaluate,
            "sweep": cmd_sweep, "export": cmd_export}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, DomainError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
