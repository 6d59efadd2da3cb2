"""Command-line entry point ``r1``.

Exit codes: 0 when every bound assertion in the output passes, 1 when one
fails, 2 for usage, configuration or file-format errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import designs, experiments, verify
from .errors import ConfigError, DesignConstructionError, DomainError, FormatError, ResourceGuardError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

_RUNNERS = {
    "phase": ("phase_diagram", experiments.run_phase_diagram),
    "noise": ("noise_sweep", experiments.run_noise_sweep),
    "tomo": ("tomography", experiments.run_tomography),
}


def _summary_passes(summary):
    checks = [summary.get("minimality_witness", {}).get("pass", True)]
    checks.append(summary.get("monotone_in_m", {}).get("pass", True))
    checks.extend(item["pass"] for item in summary.get("noise_scaling", []))
    return all(checks)


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=experiments._json_default) + "\n"
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _run_experiment(args):
    kind, runner = _RUNNERS[args.command]
    overrides = {"seed": args.seed, "kind": kind}
    if args.timing:
        overrides["timing"] = True
    cfg = experiments.load_config(args.config, **overrides)
    result = runner(cfg)
    csv_path, json_path = experiments.write_outputs(result, args.out, args.command)
    ok = _summary_passes(result.summary)
    print(f"wrote {csv_path} and {json_path}; assertions {'passed' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_FAIL


def _design_build(args):
    rng = np.random.default_rng(args.seed)
    design = designs.construct_weighted_design(args.n, args.t, args.candidates, rng, tol=args.tol)
    designs.save_design(design, args.out, seed=args.seed)
    print(f"wrote {args.out}: {design.size} vectors, theta_inf = {design.meta['theta_inf']:.3e}")
    return EXIT_OK


def _design_certify(args):
    report = experiments.run_design_report(args.file, args.k_max, tol=args.tol)
    _dump(report, args.out)
    return EXIT_OK if report["pass"] else EXIT_FAIL


def _verify(args):
    report = verify.run_verify_suite(seed=args.seed or 0, quick=args.quick)
    _dump(report, args.out)
    for entry in report["checks"]:
        flag = {True: "PASS", False: "FAIL", None: "INFO"}[entry["pass"]]
        print(f"{flag} {entry['quantity']}: {entry['estimate']:.6g}", file=sys.stderr)
    return EXIT_OK if report["pass"] else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog="r1", description="Low-rank recovery from rank-one measurements.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [("phase", "success-rate phase diagram"), ("noise", "noise sweep"),
                            ("tomo", "density-matrix recovery")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config JSON")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", default="r1_out", help="output directory (default: r1_out)")
        p.add_argument("--timing", action="store_true", help="fill the wall_ms column (breaks byte-identity)")
        p.set_defaults(func=_run_experiment)

    design = sub.add_parser("design", help="build or certify weighted designs")
    dsub = design.add_subparsers(dest="design_command", required=True)
    b = dsub.add_parser("build", help="fit a weighted t-design to random candidates")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--t", type=int, default=4)
    b.add_argument("--candidates", type=int, required=True)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--tol", type=float, default=1e-8)
    b.add_argument("--out", required=True, help="design JSON to write")
    b.set_defaults(func=_design_build)
    c = dsub.add_parser("certify", help="accuracy report for a design file")
    c.add_argument("file")
    c.add_argument("--k-max", type=int, default=4)
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--out", help="write the JSON report here instead of stdout")
    c.set_defaults(func=_design_certify)

    v = sub.add_parser("verify", help="run every invariant check")
    v.add_argument("--quick", action="store_true", help="smaller trial counts")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", help="write the JSON report here instead of stdout")
    v.set_defaults(func=_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError, DomainError, ResourceGuardError) as exc:
        print(f"r1: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DesignConstructionError as exc:
        print(f"r1: error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"r1: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
