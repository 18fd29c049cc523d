"""
analytic: per-round failure coefficients B for each class of a circuit.
"""
from pathlib import Path

from nestline.commands import (
    add_circuit_argument,
    add_class_argument,
    add_workers_argument,
    default_out,
    open_circuit,
    selected_classes,
    workers,
    write_text,
)
from nestline.fault_enum import IMPROVED_POLICIES, compute_all, dump_results
from nestline.manifest import RunManifest
from nestline.reports import render_template


def register(subparsers) -> None:
    parser = subparsers.add_parser("analytic", help="compute the analytic coefficients B")
    add_circuit_argument(parser)
    add_class_argument(parser)
    add_workers_argument(parser)
    parser.add_argument("--d", type=int, default=None, help="expected distance (default: measured)")
    parser.add_argument("--window", type=int, default=None, help="nest window in rounds (default: 2d+4)")
    parser.add_argument("--improved-policy", choices=IMPROVED_POLICIES, default="remove",
                        help="what later rounds do to step faults they improve")
    parser.add_argument("--out", type=Path, default=None, help="results document (default: <circuit>.results.json)")
    parser.set_defaults(handler=cmd_analytic)


def cmd_analytic(args) -> int:
    manifest = RunManifest("analytic", {
        "class": args.nest_class,
        "d": args.d,
        "window": args.window,
        "improved_policy": args.improved_policy,
        "gate_scale": {kind.value: str(factor) for kind, factor in args.gate_scale},
    })
    manifest.add_input(args.circuit)
    c = open_circuit(args)
    results = compute_all(
        c,
        classes=selected_classes(args.nest_class),
        d=args.d,
        window=args.window,
        workers=workers(args),
        improved=args.improved_policy,
    )

    out = default_out(args, ".results.json")
    write_text(out, dump_results(results.values()))
    manifest.add_output(out)
    manifest.write(out)
    print(render_template("analytic_summary.txt.j2", {"circuit": args.circuit, "results": list(results.values())}))
    return 0
