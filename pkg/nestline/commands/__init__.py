"""
Command-line subcommands. Each module exposes register(subparsers), which
adds its parser and sets `handler` to a function taking the parsed args and
returning an exit code.
"""
from __future__ import annotations

import argparse
from fractions import Fraction
from pathlib import Path

from nestline import config
from nestline.circuit import Circuit, GateKind, NestClass, load_circuit

CLASS_CHOICES = ("primal", "dual", "both")


def gate_scale(value: str) -> tuple[GateKind, Fraction]:
    """argparse type for KIND=FACTOR, e.g. CNOT=2 or IDENTITY=1/10."""
    kind, sep, factor = value.partition("=")
    try:
        if not sep:
            raise ValueError
        return GateKind(kind.strip().upper()), Fraction(factor.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected KIND=FACTOR with a known gate kind, got {value!r}") from None


def add_circuit_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("circuit", type=Path, help="circuit document")
    parser.add_argument("--gate-scale", type=gate_scale, action="append", default=[], metavar="KIND=FACTOR",
                        help="multiply one gate kind's error coefficients (repeatable)")


def add_workers_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: NESTLINE_WORKERS or 1)")


def add_class_argument(parser: argparse.ArgumentParser, default: str = "both", choices=CLASS_CHOICES) -> None:
    parser.add_argument("--class", dest="nest_class", choices=choices, default=default)


def selected_classes(value: str) -> list[NestClass]:
    return list(NestClass) if value == "both" else [NestClass(value)]


def open_circuit(args: argparse.Namespace) -> Circuit:
    """Load the circuit named on the command line and apply any --gate-scale factors."""
    c = load_circuit(args.circuit)
    if args.gate_scale:
        c = c.with_error_model(c.error_model.scaled(dict(args.gate_scale)))
    return c


def workers(args: argparse.Namespace) -> int:
    return config.get_workers(args.workers)


def default_out(args: argparse.Namespace, suffix: str) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(args.circuit).with_suffix(suffix)


def write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
