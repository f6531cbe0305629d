"""Command-line entry point: ``upfsim --bs-file ... --trace-file ...``."""

from __future__ import annotations

import argparse
import logging
import sys

from .allocation import ALGORITHMS
from .association import PathLossModel
from .harness import ConfigError, SweepConfig, emit_results, run_sweep
from .mobility import TraceParseError
from .topology import DeploymentParseError

EXIT_USAGE = 1
EXIT_DATA = 2

_defaults = PathLossModel()


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _csv_list(cast):
    def parse(text: str):
        try:
            return [cast(part) for part in text.split(",") if part.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid list {text!r}") from None
    return parse


def _columns(text: str) -> tuple[int, int]:
    parts = _csv_list(int)(text)
    if len(parts) != 2 or min(parts) < 0:
        raise argparse.ArgumentTypeError("expected two non-negative column indices, e.g. 0,1")
    return parts[0], parts[1]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="upfsim",
        description="Time-slotted simulation of dynamic UPF placement over a base-station graph.",
    )
    p.add_argument("--bs-file", required=True, help="base-station deployment file")
    p.add_argument("--trace-file", required=True, help="mobility trace ('-' reads stdin)")
    p.add_argument("--bs-columns", type=_columns, default=(0, 1),
                   help="x,y column indices in the deployment file (default: 0,1)")
    p.add_argument("--link-threshold", type=float, default=500.0, help="meters (default: 500)")
    p.add_argument("--slot-duration", type=float, default=5.0, help="seconds, >= 1 (default: 5)")
    p.add_argument("--max-slots", type=int, default=None, help="stop after this many slots")
    p.add_argument("--algorithms", type=_csv_list(str), default=list(ALGORITHMS),
                   help="comma list from: " + ",".join(ALGORITHMS))
    p.add_argument("--upf-fractions", type=_csv_list(float), default=[0.02, 0.05, 0.10],
                   help="comma list of UPF fractions in (0,1] (default: 0.02,0.05,0.1)")
    p.add_argument("--eval-mode", choices=["same_slot", "next_slot"], default="same_slot")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pl-alpha", type=float, default=_defaults.alpha, help="path-loss intercept, dB")
    p.add_argument("--pl-beta", type=float, default=_defaults.beta, help="path-loss slope")
    p.add_argument("--pl-sigma", type=float, default=_defaults.sigma, help="shadowing std-dev, dB")
    p.add_argument("--epsilon-db", type=float, default=_defaults.hysteresis_eps, help="handover hysteresis, dB")
    p.add_argument("--hysteresis-literal", action="store_true",
                   help="roam when PL(nearest) < PL(serving) + eps")
    p.add_argument("--benchmark-mode", action="store_true",
                   help="time allocations one at a time with no concurrent work")
    p.add_argument("--output", default="results", help="output directory (default: results)")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return p


def parse_cli(argv=None) -> SweepConfig:
    args = build_parser().parse_args(argv)
    try:
        pathloss = PathLossModel(
            alpha=args.pl_alpha,
            beta=args.pl_beta,
            sigma=args.pl_sigma,
            hysteresis_eps=args.epsilon_db,
            seed=args.seed,
            hysteresis_literal=args.hysteresis_literal,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    config = SweepConfig(
        bs_file=args.bs_file,
        trace_file=args.trace_file,
        link_threshold=args.link_threshold,
        slot_duration=args.slot_duration,
        max_slots=args.max_slots,
        algorithms=args.algorithms,
        upf_fractions=args.upf_fractions,
        eval_mode=args.eval_mode,
        seed=args.seed,
        pathloss=pathloss,
        bs_columns=args.bs_columns,
        benchmark_mode=args.benchmark_mode,
        output=args.output,
        format=args.format,
        verbose=args.verbose,
    )
    try:
        config.validate()
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    return config


def main(argv=None) -> int:
    try:
        config = parse_cli(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if config.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        table = run_sweep(config)
        paths = emit_results(table, config.output, config.format)
    except ConfigError as exc:
        print(f"upfsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DeploymentParseError, TraceParseError, ValueError) as exc:
        print(f"upfsim: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for path in paths:
        logging.getLogger("upfsim").info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
