"""
simulate: Monte Carlo logical error rates with the matching decoder.
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
from nestline.decoder_sim import SimConfig, run_simulation, write_csv
from nestline.manifest import RunManifest
from nestline.reports import render_template


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="estimate per-round logical error rates by sampling")
    add_circuit_argument(parser)
    add_class_argument(parser)
    add_workers_argument(parser)
    parser.add_argument("--p", type=float, required=True, help="physical error rate")
    parser.add_argument("--runs", type=int, default=1000)
    parser.add_argument("--rounds-per-run", type=int, default=None, help="noisy rounds per run (default: 4d)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=None, help="CSV output (default: <circuit>.sim.csv)")
    parser.set_defaults(handler=cmd_simulate)


def cmd_simulate(args) -> int:
    manifest = RunManifest("simulate", {
        "class": args.nest_class,
        "p": args.p,
        "runs": args.runs,
        "rounds_per_run": args.rounds_per_run,
        "seed": args.seed,
        "gate_scale": {kind.value: str(factor) for kind, factor in args.gate_scale},
    })
    manifest.add_input(args.circuit)
    cfg = SimConfig(
        open_circuit(args),
        args.p,
        args.runs,
        rounds=args.rounds_per_run,
        seed=args.seed,
        classes=tuple(selected_classes(args.nest_class)),
        workers=workers(args),
    )
    results = run_simulation(cfg)

    out = default_out(args, ".sim.csv")
    write_text(out, write_csv(results))
    manifest.add_output(out)
    manifest.write(out)
    print(render_template("simulate_summary.txt.j2", {
        "circuit": args.circuit,
        "p": args.p,
        "runs": args.runs,
        "rounds": results[0].rounds,
        "seed": args.seed,
        "results": results,
        "seconds": results[0].seconds,
    }))
    return 0
