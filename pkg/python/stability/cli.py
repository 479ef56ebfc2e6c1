"""
Command-line interface.

Every subcommand prints machine-parsable `key=value` lines on stdout. When a
payload is written to stdout (`--out -`) those lines move to stderr with the
rest of the diagnostics.

Exit codes: 0 success, 1 invalid input or usage, 2 I/O failure.
"""

import argparse
import logging
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence, TextIO

from shared.logs import configure_logging

from .bitstream import BitSequence, SourceSpec, decode_bits, encode_bits, generate, sniff_format
from .complexity import DEFAULT_BLOCK, ESTIMATORS, estimate, ml_prefix_curve
from .errors import StabilityError
from .experiment import (
    calibrate_c,
    crystal_stability_check,
    emit,
    envelope_check,
    load_config,
    resolve_rule_ref,
    run_experiment,
    write_records,
)
from .metrics import bias, bound_report
from .rule_dsl import load_rule
from .rulevm import SelectionRule, admissibility, rule_complexity, run_rule

logger = logging.getLogger(__name__)

STDIO = "-"


class UsageError(StabilityError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def format_value(value) -> str:
    """Integral numbers print without a fraction part; bools as true/false."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Fraction):
        return str(value.numerator) if value.denominator == 1 else repr(float(value))
    if isinstance(value, float):
        return str(int(value)) if value.is_integer() else repr(value)
    return str(value)


def _emit_pairs(pairs: Sequence[tuple[str, object]], stream: Optional[TextIO] = None) -> None:
    stream = stream or sys.stdout
    for key, value in pairs:
        print(f"{key}={format_value(value)}", file=stream)


def _read_input(path: str, fmt: str) -> BitSequence:
    data = sys.stdin.buffer.read() if path == STDIO else Path(path).read_bytes()
    return decode_bits(data, sniff_format(data) if fmt == "auto" else fmt)


def _write_output(seq: BitSequence, path: str, fmt: str) -> None:
    payload = encode_bits(seq, fmt)
    if path == STDIO:
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()
    else:
        Path(path).write_bytes(payload)


def _rule_from_arg(ref: str) -> SelectionRule:
    # file references read directly so a missing file stays an I/O error
    if ref.startswith("file:"):
        return replace(load_rule(ref.removeprefix("file:")), name=ref)
    if ref.endswith(".rule") or Path(ref).is_file():
        return load_rule(ref)
    rules = resolve_rule_ref(ref)
    if len(rules) != 1:
        raise UsageError(f"rule reference {ref!r} names {len(rules)} rules, expected one")
    return rules[0]


def cmd_generate(args) -> int:
    spec = SourceSpec(
        kind=args.source,
        seed=args.seed,
        p=args.p,
        pattern=args.pattern,
        path=args.path,
        path_format=args.path_format,
    )
    seq = generate(spec, args.n)
    _write_output(seq, args.out, args.format)
    if args.out != STDIO:
        _emit_pairs([("n", seq.length), ("ones", seq.count_ones()), ("out", args.out)])
    return 0


def cmd_select(args) -> int:
    rule = _rule_from_arg(args.rule)
    x = _read_input(args.input, args.in_format)
    result = run_rule(rule, x)
    if args.out:
        _write_output(result.selected, args.out, args.format)
    _emit_pairs(
        [
            ("sub_len", result.sub_len),
            ("halt_reason", result.halt_reason),
            ("examined", result.examined_count),
        ],
        sys.stderr if args.out == STDIO else None,
    )
    return 0


def cmd_complexity(args) -> int:
    x = _read_input(args.input, args.in_format)
    est = estimate(x, args.estimator, args.block)
    _emit_pairs([("k_hat", est.k_hat), ("n", est.n), ("estimator", est.estimator)])
    return 0


def cmd_deficiency(args) -> int:
    x = _read_input(args.input, args.in_format)
    est = estimate(x, args.estimator, args.block)
    _emit_pairs([("deficiency", est.deficiency), ("n", est.n), ("estimator", est.estimator)])
    return 0


def cmd_bias(args) -> int:
    x = _read_input(args.input, args.in_format)
    _emit_pairs([("bias", bias(x, args.p))])
    return 0


def cmd_bound(args) -> int:
    rule = _rule_from_arg(args.rule)
    x = _read_input(args.input, args.in_format)
    report = bound_report(x, rule, args.estimator, args.c, args.block)
    _emit_pairs(
        [
            ("bias", report.bias),
            ("bound", report.bound),
            ("satisfied", report.satisfied),
            ("c_used", report.c_used),
            ("delta_hat", report.delta_hat),
            ("k_rule", report.k_rule),
            ("sub_len", report.sub_len),
        ]
    )
    return 0


def cmd_curve(args) -> int:
    x = _read_input(args.input, args.in_format)
    for n_i, value in ml_prefix_curve(x, args.estimator, args.stride, args.block):
        print(f"point={n_i}:{format_value(value)}")
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    fmt = args.format or cfg.format
    out = args.out or (str(cfg.output) if cfg.output else STDIO)
    records = run_experiment(cfg)
    if out == STDIO:
        write_records(records, sys.stdout, fmt)
        sys.stdout.flush()
    else:
        emit(records, out, fmt)
    _emit_pairs(
        [("records", len(records)), ("output", out), ("format", fmt)],
        sys.stderr if out == STDIO else None,
    )
    return 0


def cmd_calibrate(args) -> int:
    _emit_pairs([("c_hat", calibrate_c(load_config(args.config)))])
    return 0


def cmd_validate_rule(args) -> int:
    rule = load_rule(args.rule)
    _emit_pairs(
        [
            ("valid", True),
            ("states", len(rule)),
            ("k_rule_bits", rule_complexity(rule)),
            ("admissibility", admissibility(rule)),
        ]
    )
    return 0


def cmd_crystal(args) -> int:
    summary = crystal_stability_check(args.n, args.replicates, seed=args.seed)
    _emit_pairs(
        [
            ("crystal_mean_bias", summary.crystal.mean_bias),
            ("crystal_sem", summary.crystal.sem),
            ("groups", len(summary.groups)),
            ("excluded", len(summary.excluded)),
            ("low_power", summary.low_power),
            ("passed", summary.passed),
        ]
    )
    for group in summary.groups:
        print(f"group={group.group}:{format_value(group.mean_bias)}:{format_value(group.sem)}")
    return 0


def cmd_envelope(args) -> int:
    report = envelope_check(load_config(args.config_a), load_config(args.config_b))
    _emit_pairs(
        [
            ("c_hat_a", report.c_hat_a),
            ("c_hat_b", report.c_hat_b),
            ("records_b", report.records_b),
            ("violations", report.violations),
            ("within_factor", report.within_factor),
            ("passed", report.passed),
        ]
    )
    return 0


def _add_input(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="input", required=True, help="bit file, or - for stdin")
    p.add_argument("--in-format", choices=["auto", "ascii01", "packed"], default="auto")


def _add_estimator(p: argparse.ArgumentParser) -> None:
    p.add_argument("--estimator", choices=ESTIMATORS, default="lz78")
    p.add_argument("--block", type=int, default=DEFAULT_BLOCK, help="block size for block_entropy")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stability", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--log-level", help="overrides LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write the first n bits of a source")
    p.add_argument("--source", choices=["uniform", "bernoulli", "periodic", "file"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=Fraction, help="bernoulli probability, e.g. 1/4")
    p.add_argument("--pattern", help="periodic pattern, e.g. 01")
    p.add_argument("--path", type=Path, help="bit file for the file source")
    p.add_argument("--path-format", choices=["ascii01", "packed"], default="packed")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["ascii01", "packed"], default="packed")
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("select", help="run a rule and write R(x)")
    p.add_argument("--rule", required=True, help="built-in reference or rule file")
    _add_input(p)
    p.add_argument("--out")
    p.add_argument("--format", choices=["ascii01", "packed"], default="packed")
    p.set_defaults(handler=cmd_select)

    p = sub.add_parser("complexity", help="estimate K(x|n)")
    _add_input(p)
    _add_estimator(p)
    p.set_defaults(handler=cmd_complexity)

    p = sub.add_parser("deficiency", help="estimate n - K(x|n)")
    _add_input(p)
    _add_estimator(p)
    p.set_defaults(handler=cmd_deficiency)

    p = sub.add_parser("bias", help="|frequency of ones - p|")
    _add_input(p)
    p.add_argument("--p", type=Fraction, default=Fraction(1, 2))
    p.set_defaults(handler=cmd_bias)

    p = sub.add_parser("bound", help="measured bias against the bound")
    _add_input(p)
    p.add_argument("--rule", required=True)
    _add_estimator(p)
    p.add_argument("--c", type=float, help="defaults to STABILITY_DEFAULT_C")
    p.set_defaults(handler=cmd_bound)

    p = sub.add_parser("curve", help="K(prefix) - prefix length at every stride")
    _add_input(p)
    _add_estimator(p)
    p.add_argument("--stride", type=int, default=1024)
    p.set_defaults(handler=cmd_curve)

    p = sub.add_parser("experiment", help="run an experiment config")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", help="overrides the config's output")
    p.add_argument("--format", choices=["csv", "json"])
    p.set_defaults(handler=cmd_experiment)

    p = sub.add_parser("calibrate", help="calibrate c on an experiment config")
    p.add_argument("--config", type=Path, required=True)
    p.set_defaults(handler=cmd_calibrate)

    p = sub.add_parser("validate-rule", help="parse and check a rule file")
    p.add_argument("--rule", type=Path, required=True)
    p.set_defaults(handler=cmd_validate_rule)

    p = sub.add_parser("crystal", help="crystal rule against a random-rule ensemble")
    p.add_argument("--n", type=int, default=2**20)
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(handler=cmd_crystal)

    p = sub.add_parser("envelope", help="calibrate on A, check held-out B")
    p.add_argument("--config-a", type=Path, required=True)
    p.add_argument("--config-b", type=Path, required=True)
    p.set_defaults(handler=cmd_envelope)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.log_level)
        return args.handler(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
