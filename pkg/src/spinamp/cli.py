"""Command-line entry point: ideal runs, Monte Carlo experiments, spectra.

Every command writes its data files plus a manifest JSON that echoes the
fully materialized configuration, RNG seeds, timestamps, and output paths, so
runs are self-describing.  Exit codes: 0 success, 2 usage, 3 config parse,
4 capacity/sizing, 5 I/O.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .automaton import run_ideal
from .errors import CapacityError, SizingError
from .geometry import GEOMETRY_PRESETS, LatticeGeometry
from .lattice import Site, build_pyramid, site_count
from .noise import (
    ExperimentConfig,
    NoiseModel,
    eps0_from_polarization,
    run_experiment,
)
from .spectrum import MODELS, SpectrumConfig, compare_models, stick_spectrum

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_CAPACITY = 4
EXIT_IO = 5

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _manifest(out_dir: Path, command: str, config: dict, seeds, outputs, started: str) -> Path:
    path = out_dir / "manifest.json"
    _write_json(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "tool_version": __version__,
            "command": command,
            "config": config,
            "rng_seeds": seeds,
            "started_utc": started,
            "finished_utc": _utcnow(),
            "outputs": [str(p) for p in outputs],
        },
    )
    return path


def _parse_seed(text: str) -> int:
    if text in ("+1", "1", "up"):
        return 1
    if text in ("-1", "down"):
        return -1
    raise argparse.ArgumentTypeError("seed must be +1 or -1")


def cmd_ideal(args) -> int:
    if args.phases > args.layers - 1:
        print(
            f"error: phases ({args.phases}) must be at most layers-1 ({args.layers - 1})",
            file=sys.stderr,
        )
        return EXIT_USAGE
    started = _utcnow()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    state, trace = run_ideal(
        args.layers,
        args.seed,
        args.phases,
        boundary=args.boundary,
        full_scan=args.verify,
    )
    trace_path = out_dir / "trace.csv"
    with open(trace_path, "w", encoding="utf-8", newline="") as fp:
        trace.write_csv(fp)
    config = {
        "layers": args.layers,
        "phases": args.phases,
        "seed": args.seed,
        "boundary": args.boundary,
        "verify": args.verify,
        "final_up_count": state.up_count(),
    }
    _manifest(out_dir, "ideal", config, [], [trace_path], started)
    print(f"up_count={state.up_count()} flips={trace.total_flips}")
    return EXIT_OK


def _as_list(value) -> list:
    return value if isinstance(value, list) else [value]


def _layers_for_size(size: int) -> int:
    L = max(1, round((6 * size) ** (1 / 3)))
    while site_count(L) < size:
        L += 1
    while L > 1 and site_count(L - 1) >= size:
        L -= 1
    return L


def _load_mc_config(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"field 'schema_version' must equal {SCHEMA_VERSION}")
    if ("sizes" in raw) == ("L" in raw):
        raise ConfigError("exactly one of 'sizes' or 'L' is required")
    if "eps0" in raw and "polarization" in raw:
        raise ConfigError("give either 'eps0' or 'polarization', not both")
    return raw


def _materialize_mc_configs(raw: dict) -> list[dict]:
    """Expand the JSON document into one fully-defaulted dict per configuration."""
    if "sizes" in raw:
        ls = [(_layers_for_size(int(s)), int(s)) for s in _as_list(raw["sizes"])]
    else:
        ls = [(int(L), site_count(int(L))) for L in _as_list(raw["L"])]
    if "polarization" in raw:
        pol = raw["polarization"]
        if not isinstance(pol, dict) or "value" not in pol:
            raise ConfigError("field 'polarization' must be {'value': p, 'convention': ...}")
        eps0s = [
            eps0_from_polarization(
                float(pol["value"]), pol.get("convention", "population")
            )
        ]
    else:
        eps0s = [float(v) for v in _as_list(raw.get("eps0", 0.0))]
    eps1s = [float(v) for v in _as_list(raw.get("eps1", 0.0))]
    rule = raw.get("rule", "default")
    if rule not in ("default", "extended"):
        raise ConfigError("field 'rule' must be 'default' or 'extended'")

    configs = []
    for (L, size), eps0, eps1 in itertools.product(ls, eps0s, eps1s):
        phases = raw.get("phases", "max")
        phases = L - 2 if phases == "max" else int(phases)
        try:
            cfg = ExperimentConfig(
                L=L,
                phases=phases,
                noise=NoiseModel(eps0=eps0, eps1=eps1, rng_seed=int(raw.get("rng_seed", 0))),
                seed_value=raw.get("seed_value", 1),
                extended_rule=rule == "extended",
                diffusion_steps=int(raw.get("diffusion_steps", 0)),
                trials=int(raw.get("trials", 1)),
                boundary=raw.get("boundary", "embedded"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc))
        configs.append({"size": size, "config": cfg})
    return configs


def cmd_mc(args) -> int:
    started = _utcnow()
    raw = _load_mc_config(args.config)
    if args.seed is not None:
        raw["rng_seed"] = args.seed
    runs = _materialize_mc_configs(raw)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    csv_path = out_dir / "experiment.csv"
    bundle_path = out_dir / "results.json"
    bundle = []
    with open(csv_path, "w", encoding="utf-8", newline="") as fp:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(
            ["size", "L", "eps0", "eps1", "rule_set", "diffusion_steps",
             "trials", "mean_signal", "std_err", "contrast"]
        )
        for run in runs:
            cfg = run["config"]
            result = run_experiment(cfg, workers=args.threads)
            contrast = result.contrast
            w.writerow(
                [
                    run["size"], cfg.L, repr(cfg.noise.eps0), repr(cfg.noise.eps1),
                    "extended" if cfg.extended_rule else "default",
                    cfg.diffusion_steps, cfg.trials,
                    repr(result.mean_signal), repr(result.std_err),
                    "" if contrast is None else repr(contrast),
                ]
            )
            bundle.append(
                {
                    "size": run["size"],
                    "L": cfg.L,
                    "eps0": cfg.noise.eps0,
                    "eps1": cfg.noise.eps1,
                    "rng_seed": cfg.noise.rng_seed,
                    "rule_set": "extended" if cfg.extended_rule else "default",
                    "diffusion_steps": cfg.diffusion_steps,
                    "seed_value": cfg.seed_value,
                    "boundary": cfg.boundary,
                    "up_counts": result.up_counts.tolist(),
                    "up_counts_down_seed": (
                        None
                        if result.up_counts_down_seed is None
                        else result.up_counts_down_seed.tolist()
                    ),
                    "mean_signal": result.mean_signal,
                    "std_err": result.std_err,
                    "contrast": contrast,
                }
            )
    _write_json(bundle_path, {"schema_version": SCHEMA_VERSION, "runs": bundle})
    _manifest(
        out_dir,
        "mc",
        raw,
        [raw.get("rng_seed", 0)],
        [csv_path, bundle_path],
        started,
    )
    print(f"wrote {len(runs)} configuration rows to {csv_path}")
    return EXIT_OK


def _parse_probe(text: str) -> Site:
    if text.startswith("layer"):
        layer = int(text[len("layer"):])
        if layer < 1:
            raise argparse.ArgumentTypeError("layer must be >= 1")
        return Site(layer - 1, 0, 0)
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("probe must be 'x,y,z' or 'layerN'")
    return Site(*(int(p) for p in parts))


def _spectrum_files(out_dir: Path, name: str, spec) -> list[Path]:
    sticks_path = out_dir / f"sticks_{name}.json"
    curve_path = out_dir / f"curve_{name}.csv"
    _write_json(
        sticks_path,
        {
            "schema_version": SCHEMA_VERSION,
            "sticks": [
                {"frequency_hz": float(f), "weight": float(w)}
                for f, w in zip(spec.freqs, spec.weights)
            ],
        },
    )
    with open(curve_path, "w", encoding="utf-8", newline="") as fp:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["frequency_hz", "intensity"])
        for f, i in zip(spec.grid, spec.curve):
            w.writerow([repr(float(f)), repr(float(i))])
    return [sticks_path, curve_path]


def cmd_spectrum(args) -> int:
    started = _utcnow()
    if args.geometry == "custom":
        if args.angle is None:
            print("error: --angle is required with --geometry custom", file=sys.stderr)
            return EXIT_USAGE
        geometry = LatticeGeometry(args.angle, args.angle, args.angle)
    else:
        geometry = LatticeGeometry.preset(args.geometry)
    try:
        geometry = geometry.with_nn_coupling(args.nn_hz)
    except ValueError:
        pass  # magic-angle cubic cell: couplings vanish, keep unit g

    lattice = build_pyramid(args.layers)
    probe = args.probe
    if probe not in lattice:
        print(f"error: probe {tuple(probe)} outside pyramid of {args.layers} layers", file=sys.stderr)
        return EXIT_USAGE
    config = SpectrumConfig(
        model="ideal-nn" if args.model == "compare" else args.model,
        suppress_homonuclear=args.suppress,
        cutoff=args.cutoff,
        d0=args.nn_hz,
        broadening_hz=args.broadening,
        mc_seed=args.seed or 0,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    outputs = []
    scores = {}
    if args.model == "compare":
        report = compare_models(
            probe, geometry, lattice, config=config, target_field=args.target_field
        )
        for name, model in report.models.items():
            outputs += _spectrum_files(out_dir, name.replace("-", "_"), model.spectrum)
            scores[name] = model.score
    else:
        spec = stick_spectrum(probe, geometry, config, lattice=lattice)
        outputs += _spectrum_files(out_dir, args.model.replace("-", "_"), spec)

    cfg_echo = {
        "geometry": args.geometry,
        "angle": args.angle,
        "layers": args.layers,
        "probe": list(probe),
        "model": args.model,
        "suppress": args.suppress,
        "cutoff": args.cutoff,
        "nn_hz": args.nn_hz,
        "broadening_hz": args.broadening,
        "target_field": args.target_field,
        "addressability_scores": scores,
    }
    _manifest(out_dir, "spectrum", cfg_echo, [args.seed or 0], outputs, started)
    for name, score in scores.items():
        print(f"{name}: addressability score {score:.6f}")
    print(f"wrote {len(outputs)} spectrum files to {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinamp", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    ideal = sub.add_parser("ideal", help="noiseless automaton run")
    ideal.add_argument("--layers", "-L", type=int, required=True)
    ideal.add_argument("--phases", "-p", type=int, required=True)
    ideal.add_argument("--seed", type=_parse_seed, default=1, help="apex spin, +1 or -1")
    ideal.add_argument("--boundary", choices=("embedded", "open"), default="embedded")
    ideal.add_argument("--verify", action="store_true", help="force naive full-layer scans")
    ideal.add_argument("--out-dir", default=".")
    ideal.set_defaults(func=cmd_ideal)

    mc = sub.add_parser("mc", help="noisy Monte Carlo experiment from a JSON config")
    mc.add_argument("--config", required=True)
    mc.add_argument("--seed", type=int, default=None, help="override the config rng_seed")
    mc.add_argument("--threads", type=int, default=1)
    mc.add_argument("--out-dir", default=".")
    mc.set_defaults(func=cmd_mc)

    spec = sub.add_parser("spectrum", help="dipolar stick spectra for a probed site")
    spec.add_argument("--geometry", choices=tuple(GEOMETRY_PRESETS) + ("custom",),
                      default="rhombo60")
    spec.add_argument("--angle", type=float, default=None, help="custom Bravais angle, radians")
    spec.add_argument("--layers", "-L", type=int, default=8)
    spec.add_argument("--probe", type=_parse_probe, default=Site(1, 0, 0))
    spec.add_argument("--model", choices=MODELS + ("compare",), default="compare")
    spec.add_argument("--suppress", action="store_true", help="suppress homonuclear couplings")
    spec.add_argument("--cutoff", type=float, default=2.5, help="in lattice constants")
    spec.add_argument("--nn-hz", type=float, default=1000.0)
    spec.add_argument("--broadening", type=float, default=50.0)
    spec.add_argument("--target-field", type=int, default=-2)
    spec.add_argument("--seed", type=int, default=None)
    spec.add_argument("--out-dir", default=".")
    spec.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SizingError, CapacityError) as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
