"""
distance: code distance of each class, counted in sticks.
"""
import json
from pathlib import Path

from nestline.commands import (
    add_circuit_argument,
    add_class_argument,
    default_out,
    open_circuit,
    selected_classes,
    write_text,
)
from nestline.errors import BoundariesDisconnectedError
from nestline.manifest import RunManifest
from nestline.nest_analysis import code_distance
from nestline.nest_builder import build_nests
from nestline.reports import render_template

DISTANCE_HEADER = "nestline-distance v1"


def register(subparsers) -> None:
    parser = subparsers.add_parser("distance", help="print the code distance of each class")
    add_circuit_argument(parser)
    add_class_argument(parser)
    parser.add_argument("--window", type=int, default=3, help="rounds in the nests used for counting")
    parser.add_argument("--out", type=Path, default=None, help="distance document (default: <circuit>.distance.json)")
    parser.set_defaults(handler=cmd_distance)


def cmd_distance(args) -> int:
    manifest = RunManifest("distance", {"class": args.nest_class, "window": args.window})
    manifest.add_input(args.circuit)
    primal, dual = build_nests(open_circuit(args), W=args.window)
    nests = {n.cls: n for n in (primal, dual)}

    distances = {}
    for cls in selected_classes(args.nest_class):
        try:
            distances[cls.value] = code_distance(nests[cls])
        except BoundariesDisconnectedError:
            distances[cls.value] = None

    out = default_out(args, ".distance.json")
    doc = {"format": DISTANCE_HEADER, "window": args.window, "distances": distances}
    write_text(out, json.dumps(doc, indent=1) + "\n")
    manifest.add_output(out)
    manifest.write(out)
    print(render_template("distance_summary.txt.j2", {
        "circuit": args.circuit, "window": args.window, "distances": distances,
    }))
    return 0
