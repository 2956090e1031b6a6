"""``torsion`` command line: run experiments, list presets, run the acceptance suite."""

from __future__ import annotations

import argparse
import sys

from .config import KINDS, ConfigError, load_config
from .geometry import NAMED_FORMS, PRESETS
from .overdetermined import F_FORMS


def _run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    from .experiments import run_experiment

    report = run_experiment(cfg, args.out_dir)
    for key, value in report.results.items():
        print(f"{key} = {value}")
    for key, value in report.flags.items():
        print(f"[{'PASS' if value else 'FAIL'}] {key}")
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
    print(f"wrote {len(report.manifest)} files to {args.out_dir or cfg.out_dir}")
    return 0 if report.ok else 1


def _presets(args) -> int:
    print("profiles:")
    for name in PRESETS:
        print(f"  {name}")
    for name in NAMED_FORMS:
        print(f"  {name}: a=<positive>")
    print("f forms (f = phi * g):")
    for name in F_FORMS:
        print(f"  phi-multiple: {name}")
    print("domains:")
    print("  disk: r=<radius>")
    print("  fourier: a0=<mean> c<k>=<cos coeff> s<k>=<sin coeff>")
    print("  random: a0=<mean> modes=<K> amplitude=<relative>   (needs seed)")
    print("experiment kinds: " + ", ".join(KINDS))
    return 0


def _verify(args) -> int:
    from .acceptance import CRITERIA, run_criterion

    failed = 0
    for number, _, _ in CRITERIA:
        if args.only and number not in args.only:
            continue
        result = run_criterion(number)
        print(result.line(), flush=True)
        failed += not result.passed
    print(f"{'all criteria passed' if not failed else f'{failed} criteria failed'}")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="torsion", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a key = value config file")
    run.add_argument("--config", required=True)
    run.add_argument("--out-dir", default=None)
    run.set_defaults(func=_run)
    sub.add_parser("presets", help="list profiles, f forms and domain forms").set_defaults(
        func=_presets)
    verify = sub.add_parser("verify", help="run the acceptance suite")
    verify.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    verify.set_defaults(func=_verify)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
