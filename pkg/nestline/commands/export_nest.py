"""
export-nest: write one class's nest as a document or as 3-D line segments.
"""
from pathlib import Path

from nestline.circuit import NestClass
from nestline.commands import (
    add_circuit_argument,
    add_class_argument,
    add_workers_argument,
    open_circuit,
    workers,
    write_text,
)
from nestline.manifest import RunManifest
from nestline.nest_builder import EXPORT_FORMATS, build_nests, export_nest


def register(subparsers) -> None:
    parser = subparsers.add_parser("export-nest", help="write a nest for inspection or 3-D viewing")
    add_circuit_argument(parser)
    add_class_argument(parser, default="primal", choices=("primal", "dual"))
    add_workers_argument(parser)
    parser.add_argument("--format", choices=EXPORT_FORMATS, default="json")
    parser.add_argument("--window", type=int, default=None, help="rounds in the nest (default: 2d+4)")
    parser.add_argument("--out", type=Path, default=None,
                        help="output path (default: <circuit>.<class>.nest.json or .segments.txt)")
    parser.set_defaults(handler=cmd_export_nest)


def cmd_export_nest(args) -> int:
    manifest = RunManifest("export-nest", {
        "class": args.nest_class,
        "format": args.format,
        "window": args.window,
        "gate_scale": {kind.value: str(factor) for kind, factor in args.gate_scale},
    })
    manifest.add_input(args.circuit)
    primal, dual = build_nests(open_circuit(args), W=args.window, workers=workers(args))
    n = primal if NestClass(args.nest_class) is NestClass.PRIMAL else dual

    suffix = ".nest.json" if args.format == "json" else ".segments.txt"
    out = args.out or Path(args.circuit).with_suffix(f".{n.cls.value}{suffix}")
    write_text(out, export_nest(n, args.format))
    manifest.add_output(out)
    manifest.write(out)
    print(f"Wrote {n.cls.value} nest ({len(n.sticks)} sticks, {n.window} rounds) to {out}")
    return 0
