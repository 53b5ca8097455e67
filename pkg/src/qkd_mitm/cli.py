"""Command line entry point: ``qkd-mitm run | sweep | basis``.

Exit status is 0 on success, 1 for a bad configuration and 2 when the
simulator trips one of its own invariants.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .adversary import AttackInvariantError
from .channels import ChannelError
from .config import ConfigError, ExperimentConfig, load_config_file
from .experiment import run_basis_estimation, run_experiment, run_sweep, serialize_report
from .quantum import QuantumError

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2

# flag dest -> config field
_FLAG_FIELDS = {
    "protocol": "protocol",
    "adversary": "adversary",
    "bits": "bits",
    "sessions": "sessions",
    "seed": "seed",
    "control_prob": "control_prob",
    "loss": "loss_prob",
    "eve_removal": "eve_removal_rate",
    "basis_offset": "basis_offset",
    "basis_theta": "basis_theta",
    "intercept_leg": "intercept_leg",
    "abort_policy": "abort_policy",
    "retry_cap": "retry_cap",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    # defaults are None so that only explicit flags override a config file
    p.add_argument("--config", type=Path, help="JSON file with config fields; flags win")
    p.add_argument("--protocol", choices=["li", "pingpong", "cai"])
    p.add_argument("--adversary", choices=["passive", "intercept", "cnot", "mitm"])
    p.add_argument("--bits", type=int, metavar="N", help="message bits per session")
    p.add_argument("--sessions", type=int, metavar="M")
    p.add_argument("--seed", type=int, metavar="S")
    p.add_argument("--control-prob", type=float, metavar="C", help="ping-pong control-mode probability")
    p.add_argument("--loss", type=float, metavar="P", help="channel loss per quantum crossing")
    p.add_argument("--eve-removal", type=float, metavar="P", help="extra rate at which Eve drops qubits")
    p.add_argument("--basis-offset", type=float, metavar="RAD", help="parties' basis in Eve's frame")
    p.add_argument("--basis-theta", type=float, metavar="RAD", help="intercept-resend measurement angle")
    p.add_argument("--intercept-leg", choices=["forward", "return", "both"])
    p.add_argument("--abort-policy", choices=["first", "end"])
    p.add_argument("--retry-cap", type=int)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--transcript", action="store_true", help="include per-session event logs")
    p.add_argument("--out", type=Path, help="write here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qkd-mitm", description="Entanglement-based QKD protocols under attack")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one experiment")
    _experiment_flags(run)

    sweep = sub.add_parser("sweep", help="run one experiment per value of a parameter")
    _experiment_flags(sweep)
    sweep.add_argument("--param", required=True, help="config field to vary, e.g. bits, control_prob")
    sweep.add_argument("--values", required=True, help="comma separated values")

    basis = sub.add_parser("basis", help="estimate the parties' basis from probe statistics")
    basis.add_argument("--basis-offset", type=float, required=True, metavar="RAD")
    basis.add_argument("--samples", type=int, default=10_000)
    basis.add_argument("--seed", type=int, default=0)
    basis.add_argument("--format", choices=["json", "csv"], default="json")
    basis.add_argument("--out", type=Path)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = load_config_file(args.config) if args.config else {}
    for dest, name in _FLAG_FIELDS.items():
        flag = getattr(args, dest)
        if flag is not None:
            values[name] = flag
    try:
        return ExperimentConfig.from_dict(values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "basis":
            report = run_basis_estimation(args.basis_offset, args.samples, args.seed)
        elif args.command == "run":
            report = run_experiment(config_from_args(args), args.transcript)
        else:
            config = config_from_args(args)
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            if not values:
                raise ConfigError("--values is empty")
            report = run_sweep(config, args.param, values, args.transcript)
        _emit(serialize_report(report, args.format), args.out)
    except ConfigError as exc:
        print(f"qkd-mitm: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuantumError, ChannelError, AttackInvariantError) as exc:
        print(f"qkd-mitm: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
