"""Batch command-line interface.

Subcommands: synth, prep, train, ablate, fusion-grid, loso, gradcheck.
Config files are flat key=value documents; any key can be overridden with
a trailing --key=value flag. Failures exit nonzero with a JSON error
record on stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import dataio, featprep
from .config import ConfigError, build_config


def _synth_spec_from(path: str | None, overrides: list[str]) -> dataio.SyntheticSpec:
    fields = {f.name: f for f in dataclasses.fields(dataio.SyntheticSpec)}
    values: dict = {}

    def convert(key, raw):
        if key not in fields:
            raise ConfigError(f"unknown synthetic spec key: {key}")
        typ = fields[key].type
        return int(raw) if typ in ("int", int) else float(raw)

    if path:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, raw = (p.strip() for p in line.split("=", 1))
            values[key] = convert(key, raw)
    for item in overrides:
        token = item.lstrip("-")
        if "=" not in token:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, raw = token.split("=", 1)
        values[key.strip()] = convert(key.strip(), raw.strip())
    return dataio.SyntheticSpec(**values)


def cmd_synth(args, overrides):
    spec = _synth_spec_from(args.spec, overrides)
    cohort = dataio.generate_synthetic_cohort(spec)
    manifest = dataio.save_cohort(cohort, args.out)
    print(f"wrote {len(cohort.subjects)} subjects to {manifest}")
    return 0


def cmd_prep(args, overrides):
    if overrides:
        raise ConfigError(f"unexpected arguments: {overrides}")
    cohort = dataio.load_cohort(args.cohort)
    X = featprep.cohort_feature_matrix(cohort.subjects, args.modality)
    pipeline = featprep.fit_pipeline(
        X, cohort.labels(), args.modality,
        min(args.target_dim, X.shape[1]), args.alpha, args.drop_fraction)
    pipeline.to_json(args.out)
    print(f"fitted {args.modality} pipeline: {pipeline.selected_indices.size} "
          f"features -> {args.out}")
    return 0


def _run(args, overrides, runner, force: dict | None = None):
    config = build_config(args.config, overrides)
    if force:
        config = dataclasses.replace(config, **force)
    report = runner(config)
    print(f"artifacts written to {config.out_dir}")
    return 0 if report is not None else 1


def cmd_train(args, overrides):
    from .harness import run_experiment
    return _run(args, overrides, run_experiment)


def cmd_loso(args, overrides):
    from .harness import run_experiment
    return _run(args, overrides, run_experiment, force={"scheme": "loso"})


def cmd_ablate(args, overrides):
    from .harness import run_modality_grid
    return _run(args, overrides, run_modality_grid)


def cmd_fusion_grid(args, overrides):
    from .harness import run_fusion_grid
    return _run(args, overrides, run_fusion_grid)


def cmd_gradcheck(args, overrides):
    if overrides:
        raise ConfigError(f"unexpected arguments: {overrides}")
    from .verify import run_suite
    return 0 if run_suite(verbose=True) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="popfuse",
        description="Multimodal population-graph learning engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort directory")
    p.add_argument("--spec", help="key=value spec file for the generator")
    p.add_argument("--out", required=True, help="output cohort directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prep", help="fit and inspect a feature pipeline")
    p.add_argument("--cohort", required=True)
    p.add_argument("--modality", choices=["func", "struct"], default="func")
    p.add_argument("--target-dim", type=int, default=2400)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--drop-fraction", type=float, default=0.1)
    p.add_argument("--out", required=True, help="pipeline JSON path")
    p.set_defaults(func=cmd_prep)

    for name, fn, help_text in [
        ("train", cmd_train, "run a single experiment"),
        ("ablate", cmd_ablate, "run the modality-mode grid"),
        ("fusion-grid", cmd_fusion_grid, "run the fusion-strategy grid"),
        ("loso", cmd_loso, "leave-one-site-out evaluation"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value config file")
        p.set_defaults(func=fn)

    p = sub.add_parser("gradcheck", help="run the numerical verification suite")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        return args.func(args, extra)
    except Exception as exc:  # noqa: BLE001 - single reporting point
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
