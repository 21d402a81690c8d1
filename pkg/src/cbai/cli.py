"""Command-line entry point."""
from __future__ import annotations

import argparse
import json
import sys

from .core import InstanceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cbai", description="Constrained linear best-arm identification experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="override the configured output path")
    r.add_argument("--workers", type=int)

    d = sub.add_parser("diag", help="hardness diagnostics of an instance file")
    d.add_argument("--instance", required=True)

    g = sub.add_parser("gen", help="generate an instance file")
    g.add_argument("--family", required=True,
                   choices=["irrelevant-dimensions", "unit-sphere", "line-1d", "orthonormal"])
    g.add_argument("--d", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--eps", type=float)
    g.add_argument("--margin", type=float)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--noise-sigma", type=float)
    g.add_argument("--out", required=True)

    dg = sub.add_parser("driver-gen", help="export a driving policy set as an instance file")
    dg.add_argument("--scenario", required=True)
    dg.add_argument("--k", type=int, required=True)
    dg.add_argument("--seed", type=int, default=0)
    dg.add_argument("--out", required=True)

    s = sub.add_parser("sweep", help="run a named preset")
    s.add_argument("--preset", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seeds", type=int, help="number of seeds (default 5)")
    s.add_argument("--workers", type=int)
    return p


def _gen(args):
    from .instances import InstanceSpec, build_instance, save_instance
    params = {k: getattr(args, k) for k in ("d", "n", "eps", "margin") if getattr(args, k) is not None}
    if args.noise_sigma is not None:
        params["noise_sigma"] = args.noise_sigma
    if args.family == "unit-sphere":
        params["seed"] = args.seed
    from .harness import ConfigError
    try:
        spec = InstanceSpec(args.family, params)
    except ValueError as exc:
        raise ConfigError(f"--family {args.family}: {exc}") from None
    save_instance(build_instance(spec, args.seed), args.out)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    from . import harness
    try:
        if args.command == "run":
            cfg = harness.load_config(args.config)
            if args.out:
                cfg = harness.ExperimentConfig(cfg.instances, cfg.algorithms, cfg.seeds, args.out,
                                               cfg.parallelism)
            rows = harness.run_experiment(cfg, workers=args.workers)
            if not cfg.output:
                sys.stdout.write(harness.rows_to_csv(rows))
            for s in harness.summarize(rows):
                print(f"# {s.instance} {s.algorithm}: median {s.median:g} "
                      f"[{s.p25:g}, {s.p75:g}] correct {s.correct_rate:.2f}", file=sys.stderr)
        elif args.command == "diag":
            from .instances import load_instance
            diag = harness.diagnostics(load_instance(args.instance))
            print(json.dumps(diag._asdict(), indent=1))
        elif args.command == "gen":
            _gen(args)
        elif args.command == "driver-gen":
            from .driver import SCENARIO_IDS, build_policy_set, load_scenario
            from .instances import save_instance
            if args.scenario not in SCENARIO_IDS:
                raise harness.ConfigError(f"--scenario: expected one of {SCENARIO_IDS}")
            if args.k < 2:
                raise harness.ConfigError("--k: must be at least 2")
            save_instance(build_policy_set(load_scenario(args.scenario), args.k, args.seed), args.out)
        elif args.command == "sweep":
            seeds = None if args.seeds is None else range(args.seeds)
            path = harness.run_preset(args.preset, args.out, seeds, workers=args.workers)
            print(path)
    except (harness.ConfigError, InstanceError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
