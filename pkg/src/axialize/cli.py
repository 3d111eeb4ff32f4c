"""Command-line entry point: ``axialize <experiment> [options]``.

Precedence, highest first: explicit flags (``--seed``, ``--out``,
``--analytic``, ``--jobs``, ``--set``), then the config file, then built-in
defaults. The subcommand selects the experiment and overrides any
``experiment`` key in the file.

Exit codes: 0 success, 2 configuration error, 3 physics error (unstable
trap, divergence, no steady state), 4 fit failure, 1 anything else.
"""
import argparse
import os
import sys

from .config import EXPERIMENTS, load_config_text
from .exceptions import ConfigError, FitError, PhysicsError
from .experiments import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_FIT = 4


def build_parser():
    p = argparse.ArgumentParser(prog="axialize",
                                description="Axialization of a laser-cooled ion in a Penning trap.")
    sub = p.add_subparsers(dest="experiment", required=True, metavar="experiment")
    helps = {
        "modes": "mode frequencies, cooling rates and dressed-mode table",
        "amplitude-sweep": "magnetron damping rate versus drive amplitude",
        "phase-scan": "photon-correlation phase scan across one resonance",
        "avoided-crossing": "branch frequencies versus drive frequency, with fit",
        "trajectory": "integrate and write one radial trajectory",
    }
    for name in EXPERIMENTS:
        s = sub.add_parser(name, help=helps[name])
        s.add_argument("--config", help="TOML configuration file")
        s.add_argument("--seed", type=_u64, help="base RNG seed (unsigned 64-bit)")
        s.add_argument("--out", help="output directory")
        s.add_argument("--analytic", action="store_true", default=None,
                       help="skip the photon pipeline and use closed-form results")
        s.add_argument("--jobs", type=int, help="worker processes (default: all processors)")
        s.add_argument("--dat", action="store_true", help="also write gnuplot .dat tables")
        s.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one config field (repeatable)")
    return p


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(argv)
    overrides = list(args.set) + [f'experiment="{args.experiment}"']
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"out={_toml_str(args.out)}")
    if args.analytic:
        overrides.append("analytic=true")
    try:
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from None
            source = args.config
        else:
            text, source = "", "<defaults>"
        cfg = load_config_text(text, source, overrides)
        jobs = args.jobs if args.jobs is not None else (cfg.jobs or os.cpu_count() or 1)
        result = run_experiment(cfg, cfg.out, jobs=max(1, jobs), dat=args.dat, argv=argv,
                                config_text=text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicsError as exc:
        print(f"physics error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except FitError as exc:
        print(f"fit failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_FIT
    sys.stdout.write(result.text)
    print(f"wrote {len(result.files)} file(s) and manifest.json to {cfg.out}")
    return EXIT_OK


def _toml_str(s):
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


if __name__ == "__main__":
    sys.exit(main())
