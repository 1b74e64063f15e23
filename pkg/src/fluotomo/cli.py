"""Command-line interface.

Subcommands: selftest | oracle | run | sweep | wigner. A JSON config file
supplies the experiment description; any leaf key can be overridden on the
command line with a flag mirroring its dotted path, e.g.

    fluotomo run -c experiment.json --trajectory.seed 7 --filter.T 4

Exit codes: 0 success, 2 configuration or provenance error, 3 completed with
warnings, 4 numerical failure.
"""

import argparse
import sys

from .config import ExperimentConfig
from .errors import ArtifactMismatchError, ConfigError, FluotomoError
from .runner import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    cmd_oracle,
    cmd_run,
    cmd_sweep,
    cmd_wigner,
    selftest_rows,
)


def _parse_overrides(extra) -> dict:
    """Turn leftover ['--a.b.c', 'value', ...] tokens into an override map."""
    overrides = {}
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--") or "." not in token:
            raise ConfigError(
                f"unrecognized argument {token!r}; overrides look like "
                "--section.key value"
            )
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            if i + 1 >= len(extra):
                raise ConfigError(f"override {token!r} is missing a value")
            i += 1
            value = extra[i]
        overrides[key] = value
        i += 1
    return overrides


def _load_config(args, extra) -> ExperimentConfig:
    overrides = _parse_overrides(extra)
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    if args.config is not None:
        return ExperimentConfig.from_file(
            args.config, profile=args.profile, overrides=overrides
        )
    return ExperimentConfig.from_dict(profile=args.profile, overrides=overrides)


def _run_selftest(args) -> int:
    rows = selftest_rows(full=not args.fast)
    width = max(len(name) for name, _, _ in rows)
    all_ok = True
    for name, ok, detail in rows:
        all_ok &= ok
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    print("selftest:", "all checks passed" if all_ok else "FAILURES above")
    return EXIT_OK if all_ok else EXIT_NUMERICAL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fluotomo",
        description=(
            "Homodyne simulation, maximum-likelihood tomography, and Wigner "
            "negativity of the filtered resonance fluorescence of a driven "
            "two-level emitter."
        ),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", default=None,
                        help="JSON config file (defaults used when omitted)")
    common.add_argument("--profile", default=None, choices=("desk", "paper"),
                        help="sample-count profile applied before overrides")
    common.add_argument("-o", "--output-dir", default=None,
                        help="override output_dir")

    sub = parser.add_subparsers(dest="command", required=True)
    p_self = sub.add_parser("selftest", help="verify quadrature/phase-space conventions")
    p_self.add_argument("--fast", action="store_true",
                        help="skip the iterative reconstruction check")
    sub.add_parser("oracle", parents=[common],
                   help="write analytic reference tables for the sweep grid")
    sub.add_parser("run", parents=[common],
                   help="one point: simulate, reconstruct, analyze")
    sub.add_parser("sweep", parents=[common],
                   help="full (omega, T) sweep with summary.csv")
    p_wig = sub.add_parser("wigner", help="re-analyze a saved state.json")
    p_wig.add_argument("state", help="path to a state.json artifact")
    p_wig.add_argument("--extent", type=float, default=5.0)
    p_wig.add_argument("--step", type=float, default=0.025)
    p_wig.add_argument("-o", "--output-dir", default=None)

    args, extra = parser.parse_known_args(argv)

    try:
        if args.command == "selftest":
            if extra:
                raise ConfigError(f"unrecognized arguments: {' '.join(extra)}")
            return _run_selftest(args)
        if args.command == "wigner":
            if extra:
                raise ConfigError(f"unrecognized arguments: {' '.join(extra)}")
            code, payload = cmd_wigner(
                args.state, extent=args.extent, step=args.step,
                output_dir=args.output_dir,
            )
            print(
                f"negativity={payload['negativity']:.6f} "
                f"relative={payload['relative_negativity']:.6f} "
                f"purity={payload['purity']:.6f}"
            )
            for w in payload["warnings"]:
                print("warning:", w, file=sys.stderr)
            return code

        config = _load_config(args, extra)
        if args.command == "oracle":
            code, oracle_dir = cmd_oracle(config)
            print(f"oracle tables written to {oracle_dir}")
            return code
        if args.command == "run":
            code, result = cmd_run(config)
            print(
                f"omega={result.omega:.6g} T={result.T:g}: "
                f"rho0={result.populations[0]:.4f} rho1={result.populations[1]:.4f} "
                f"rho2={result.populations[2]:.4f} purity={result.purity:.4f} "
                f"N_rel={result.relative_negativity:.4f} -> {result.point_dir}"
            )
            for w in result.warnings:
                print("warning:", w, file=sys.stderr)
            return code
        if args.command == "sweep":
            code, sweep = cmd_sweep(config)
            print(
                f"{len(sweep.points)} points completed, "
                f"{len(sweep.failures)} failed; summary.csv in "
                f"{config.output_dir}"
            )
            for fail in sweep.failures:
                print(
                    f"failed omega={fail['omega']:.6g} T={fail['T']:g}: "
                    f"{fail['error_type']}: {fail['error']}",
                    file=sys.stderr,
                )
            return code
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ArtifactMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FluotomoError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
