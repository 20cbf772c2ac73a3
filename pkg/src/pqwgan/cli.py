"""Command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import critic as C
from . import data as D
from . import generator as G
from . import trainer as T
from ._backend import kernels
from .config import RunConfig, load_config, load_params, parse_config, save_params
from .errors import ConfigError, ParseError, PostSelectionError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    train, data = cfg.train, cfg.data
    if getattr(args, "seed", None) is not None:
        train = dataclasses.replace(train, seed=args.seed)
    updates = {}
    if getattr(args, "dataset_images", None):
        updates["dataset_images"] = args.dataset_images
    if getattr(args, "dataset_labels", None):
        updates["dataset_labels"] = args.dataset_labels
    if getattr(args, "classes", None):
        updates["classes"] = tuple(int(c) for c in args.classes.split(","))
    if updates:
        data = dataclasses.replace(data, **updates)
    return RunConfig(cfg.generator, train, data)


def load_run_dataset(cfg: RunConfig, seed: int) -> D.LabeledDataset:
    d = cfg.data
    g = cfg.generator
    if d.dataset == "bars":
        if g.image_height != g.image_width:
            raise ConfigError("bars dataset needs a square image")
        return D.synthetic_bars(g.image_height, d.bars_per_class, np.random.default_rng(seed))
    for p, flag in ((d.dataset_images, "--dataset-images"), (d.dataset_labels, "--dataset-labels")):
        if not p:
            raise UsageError(f"{flag} is required for the idx dataset")
        if not os.path.exists(p):
            raise UsageError(f"dataset path not found: {p}")
    return D.load_dataset(d.dataset_images, d.dataset_labels, d.classes, d.per_class)


def _grid_shape(n: int) -> tuple[int, int]:
    cols = math.ceil(math.sqrt(n))
    return max(n // cols, 1), cols


def _manifest(command, args, cfg: RunConfig) -> dict:
    return {
        "command": command,
        "config": os.path.abspath(args.config) if getattr(args, "config", None) else None,
        "out": os.path.abspath(args.out),
        "seed": cfg.train.seed,
        "config_snapshot": cfg.to_dict(),
        "quantum_parameter_count": G.count_parameters(cfg.generator),
        "critic_parameter_count": C.mlp_param_count(
            C.critic_sizes(cfg.generator.image_height * cfg.generator.image_width)
        ),
        "kernel_backend": kernels.NAME,
    }


def run_training(cfg: RunConfig, out: str, manifest: dict) -> T.TrainResult:
    """Train one configuration, writing manifest, log, grids and parameters to ``out``."""
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    dataset = load_run_dataset(cfg, cfg.train.seed)
    g = cfg.generator
    # fixed latents so successive grids are comparable
    preview = T.sample_prior(cfg.train.prior_kind, g.n_qubits, np.random.default_rng(cfg.train.seed), 25)
    log_path = os.path.join(out, "log.csv")

    def checkpoint(it, theta, w):
        D.write_image_grid(G.generate_batch(theta, preview, g), 5, 5,
                           os.path.join(out, f"samples_{it:05d}.pgm"))
        save_params(theta, os.path.join(out, f"params_{it:05d}.pqwg"))

    try:
        result = T.train(cfg.train, g, dataset, checkpoint=checkpoint)
    except T.TrainingAborted as exc:
        D.write_csv_log(exc.log, log_path)
        raise
    D.write_csv_log(result.log, log_path)
    save_params(result.theta, os.path.join(out, "generator.pqwg"))
    np.savez(os.path.join(out, "critic.npz"), *result.critic.arrays())
    return result


def cmd_train(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    run_training(cfg, args.out, _manifest("train", args, cfg))
    print(f"wrote run to {args.out}")
    return EXIT_OK


def _load_model(args):
    cfg = _apply_overrides(load_config(args.config), args)
    theta = load_params(args.params, cfg.generator)
    return cfg, theta


def cmd_generate(args) -> int:
    cfg, theta = _load_model(args)
    rng = np.random.default_rng(cfg.train.seed)
    zs = T.sample_prior(cfg.train.prior_kind, cfg.generator.n_qubits, rng, size=args.n)
    images = G.generate_batch(theta, zs, cfg.generator)
    rows, cols = _grid_shape(args.n)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "samples.pgm")
    D.write_image_grid(images, rows, cols, path)
    print(f"wrote {rows}x{cols} grid to {path}")
    return EXIT_OK


def _parse_vector(text, dim, name):
    vals = [float(v) for v in text.split(",")]
    if len(vals) != dim:
        raise ConfigError(f"{name} has {len(vals)} components, generator needs {dim}")
    return np.array(vals)


def cmd_interpolate(args) -> int:
    cfg, theta = _load_model(args)
    n = cfg.generator.n_qubits
    rng = np.random.default_rng(cfg.train.seed)
    z_a = T.sample_prior(cfg.train.prior_kind, n, rng)
    z_b = T.sample_prior(cfg.train.prior_kind, n, rng)
    if args.z_a:
        z_a = _parse_vector(args.z_a, n, "--z-a")
    if args.z_b:
        z_b = _parse_vector(args.z_b, n, "--z-b")
    frames = T.interpolate(theta, cfg.generator, z_a, z_b, args.segments)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "interpolation.pgm")
    D.write_image_grid(frames, 1, len(frames), path)
    print(f"wrote {len(frames)} frames to {path}")
    return EXIT_OK


def _load_sweep(path) -> tuple[dict, list]:
    try:
        with open(path) as f:
            spec = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    unknown = set(spec) - {"base", "runs"}
    if unknown:
        raise ConfigError(f"unknown sweep keys: {', '.join(sorted(unknown))}")
    runs = spec.get("runs") or []
    if not runs:
        raise ConfigError("sweep spec lists no runs")
    return spec.get("base", {}), runs


def cmd_sweep(args) -> int:
    base, runs = _load_sweep(args.sweep_spec)
    resolved = []
    # validate every configuration before the first run starts
    for k, run in enumerate(runs):
        run = dict(run)
        name = str(run.pop("name", f"run{k:02d}"))
        try:
            cfg = _apply_overrides(parse_config({**base, **run}), args)
        except ConfigError as exc:
            raise ConfigError(f"sweep run {name!r}: {exc}") from exc
        resolved.append((name, cfg))
    names = [n for n, _ in resolved]
    if len(set(names)) != len(names):
        raise ConfigError("sweep run names must be unique")

    os.makedirs(args.out, exist_ok=True)
    rows = []
    for name, cfg in resolved:
        count = G.count_parameters(cfg.generator)
        final_wd = math.nan
        if not args.dry_run:
            sub = argparse.Namespace(config=args.sweep_spec, out=os.path.join(args.out, name))
            result = run_training(cfg, sub.out, _manifest("sweep", sub, cfg))
            series = result.log.wasserstein()
            final_wd = float(series[-1]) if series.size else math.nan
        g = cfg.generator
        rows.append([name, g.n_patches, g.n_data, g.n_ancilla, g.n_layers, g.patch_height,
                     g.patch_width, count, "" if math.isnan(final_wd) else format(final_wd, ".17g")])
        print(f"{name}: {count} parameters")
    with open(os.path.join(args.out, "summary.csv"), "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["name", "n_patches", "n_data", "n_ancilla", "n_layers", "patch_height",
                         "patch_width", "parameter_count", "final_wasserstein"])
        writer.writerows(rows)
    return EXIT_OK


def cmd_count_params(args) -> int:
    cfg = load_config(args.config)
    g = cfg.generator
    pixels = g.image_height * g.image_width
    counts = {
        "quantum_generator": G.count_parameters(g),
        "critic": C.mlp_param_count(C.critic_sizes(pixels)),
        "baseline_generator": C.mlp_param_count(C.baseline_sizes(g.n_qubits, pixels)),
    }
    for k, v in counts.items():
        print(f"{k}: {v}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqwgan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def data_flags(p):
        p.add_argument("--dataset-images")
        p.add_argument("--dataset-labels")
        p.add_argument("--classes", help="comma-separated class labels, e.g. 0,1")

    p = sub.add_parser("train", help="train a generator/critic pair")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    data_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="sample a grid from trained parameters")
    p.add_argument("--config", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=25)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("interpolate", help="render a latent-space walk")
    p.add_argument("--config", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--segments", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.add_argument("--z-a", help="comma-separated start latent vector")
    p.add_argument("--z-b", help="comma-separated end latent vector")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("sweep", help="run a list of configurations")
    p.add_argument("--sweep-spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--dry-run", action="store_true", help="validate and count parameters only")
    data_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("count-params", help="print parameter counts")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_count_params)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (T.TrainingAborted, PostSelectionError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
