"""Command-line surface: verification suites, collision search, contour grids, training.

One entrypoint (setlab) with four subcommands. Exit codes are a stable
contract: 0 success, 1 verification check failed, 2 configuration or search
error, 3 training divergence. Every command takes --seed and is deterministic
given it; every output file carries a schema field and 17-significant-digit
floats.
"""

import argparse
import os
import sys

import numpy as np

from ._jsonio import SCHEMA_VERSION, dump_file, dumps, format_float, load_file
from .approx import (
    emit_contour_grid,
    find_collision,
    load_phispec,
    lse_max,
    save_certificate,
    save_phispec,
    write_contour_csv,
)
from .errors import ConfigError, DivergenceError, SearchExhausted, SetlabError
from .nnet import TrainConfig, deepsets_eval, load_checkpoint, save_checkpoint, train
from .sets import f_star
from .verify import SUITES, run_suite


def cmd_verify(suite="all", seed=0, out_path=None, tol=None, budget=1.0):
    """Run one verification suite; writes the JSON report when out_path is given."""
    report = run_suite(suite, seed=seed, tol=tol, scale=budget)
    if out_path is not None:
        dump_file(report, out_path)
    return report


def cmd_collide(phi_path, M=None, tol=1e-8, budget=None, out_path=None, seed=0):
    """Certify a pooled-encoding collision for the encoder stored at phi_path.

    M defaults to the only feasible value, one more than the encoder's output
    dimension; passing any other M is a configuration error.
    """
    phi = load_phispec(phi_path)
    if M is not None and int(M) != phi.N + 1:
        raise ConfigError(
            f"encoder output dim {phi.N} requires M = {phi.N + 1}, got M={int(M)}"
        )
    cert = find_collision(phi, M=M, tol_zero=tol, budget=budget, seed=seed)
    if out_path is not None:
        save_certificate(cert, out_path, seed=seed)
    return cert


def _contour_fn(name, params):
    if name == "max":
        return lambda v: float(np.max(v))
    if name == "lse_max":
        if "a" not in params:
            raise ConfigError("lse_max contours need params {\"a\": sharpness} via --config")
        a = float(params["a"])
        return lambda v: lse_max(v, a)
    if name == "f_star":
        return f_star
    if os.path.exists(name):
        model, _ = load_checkpoint(name)
        return lambda v: deepsets_eval(model, v)
    raise ConfigError(
        f"unknown contour function {name!r}; expected max, lse_max, f_star, or a checkpoint path"
    )


def cmd_contours(fn, M=2, resolution=201, params=None, out_path=None):
    """Planar contour grid of a named function or a trained checkpoint, as CSV rows."""
    rows = emit_contour_grid(_contour_fn(fn, params or {}), M=M, resolution=resolution)
    if out_path is not None:
        write_contour_csv(rows, out_path)
    return rows


def cmd_train(config_path, out_dir, seed=None):
    """Train from a JSON config; writes checkpoint, metrics, and the exported encoder.

    seed, when given, overrides the config file's seed. Returns
    (model, metrics, paths).
    """
    cfg = load_file(config_path)
    if not isinstance(cfg, dict):
        raise ConfigError(f"train config must be a JSON object, got {type(cfg).__name__}")
    if seed is not None:
        cfg = {**cfg, "seed": int(seed)}
    config = TrainConfig.from_config(cfg)
    model, metrics = train(config)
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "checkpoint": os.path.join(out_dir, "checkpoint.json"),
        "metrics": os.path.join(out_dir, "metrics.json"),
        "encoder": os.path.join(out_dir, "encoder.json"),
    }
    save_checkpoint(model, config, paths["checkpoint"], metrics=metrics)
    dump_file({"schema": SCHEMA_VERSION, **metrics}, paths["metrics"])
    save_phispec(model.encoder_spec, paths["encoder"])
    return model, metrics, paths


def _run_verify(args):
    report = cmd_verify(
        args.suite, seed=args.seed, out_path=args.out, tol=args.tol, budget=args.budget
    )
    for row in report["checks"]:
        print(
            f"{row['status']:<4s} {row['name']}"
            f"  residual={format_float(row['residual'])}"
            f"  tol={format_float(row['tolerance'])}"
        )
    s = report["summary"]
    print(f"{s['pass']} passed, {s['fail']} failed, {s['skip']} skipped")
    if args.out:
        print(f"report written to {args.out}")
    return 0 if s["fail"] == 0 else 1


def _run_collide(args):
    try:
        cert = cmd_collide(
            args.phi, tol=args.tol, budget=args.budget, out_path=args.out, seed=args.seed
        )
    except SearchExhausted as exc:
        if args.out:
            dump_file(
                {
                    "schema": SCHEMA_VERSION,
                    "error": "SearchExhausted",
                    "message": str(exc),
                    "best_residual": exc.best_residual,
                    "trace": exc.trace,
                },
                args.out,
            )
            print(f"search exhausted; trace written to {args.out}", file=sys.stderr)
        else:
            print(f"search exhausted: {exc}", file=sys.stderr)
        return 2
    print(
        f"collision certified at M={cert.M}:"
        f" phi_residual={format_float(cert.phi_residual)}"
        f" f_gap={format_float(cert.f_gap)}"
    )
    if args.out:
        print(f"certificate written to {args.out}")
    else:
        print(dumps(cert.to_config()))
    return 0


def _run_contours(args):
    params = {}
    if args.config:
        params = load_file(args.config)
        if not isinstance(params, dict):
            raise ConfigError("contour params file must hold a JSON object")
    rows = cmd_contours(args.fn, resolution=args.resolution, params=params, out_path=args.out)
    print(f"{len(rows)} grid points written to {args.out}")
    return 0


def _run_train(args):
    _, metrics, paths = cmd_train(args.config, args.out, seed=args.seed)
    print(
        f"final loss {format_float(metrics['final_loss'])},"
        f" grid max error {format_float(metrics['grid_max_error'])}"
    )
    for name in ("checkpoint", "metrics", "encoder"):
        print(f"{name} written to {paths[name]}")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(prog="setlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run a seeded verification suite")
    p.add_argument("--suite", default="all", help="one of: " + ", ".join(SUITES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None, help="override every check's tolerance")
    p.add_argument(
        "--budget", type=float, default=1.0, help="sample-count multiplier in (0, 1]"
    )
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.set_defaults(run=_run_verify)

    p = sub.add_parser("collide", help="search for a pooled-encoding collision")
    p.add_argument("phi", help="path to an encoder spec JSON file")
    p.add_argument("--tol", type=float, default=1e-8, help="zero tolerance for the residual")
    p.add_argument("--budget", type=int, default=None, help="number of search starts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the certificate (or failure trace) here")
    p.set_defaults(run=_run_collide)

    p = sub.add_parser("contours", help="emit a planar contour grid as CSV")
    p.add_argument("fn", help="max, lse_max, f_star, or a checkpoint path")
    p.add_argument("--resolution", type=int, default=201)
    p.add_argument("--config", default=None, help="JSON file of function params, e.g. {\"a\": 2}")
    p.add_argument("--seed", type=int, default=0, help="accepted for interface parity; grids are deterministic")
    p.add_argument("--out", required=True, help="write the CSV grid here")
    p.set_defaults(run=_run_contours)

    p = sub.add_parser("train", help="train a sum-decomposition model from a JSON config")
    p.add_argument("--config", required=True, help="path to a training config JSON file")
    p.add_argument("--seed", type=int, default=None, help="override the config file's seed")
    p.add_argument("--out", required=True, help="directory for checkpoint, metrics, and encoder")
    p.set_defaults(run=_run_train)

    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.run(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SetlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
