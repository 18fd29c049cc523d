"""
generate: write the standard distance-d surface code circuit.
"""
from pathlib import Path

from nestline.circuit import generate_surface_code, serialize_circuit
from nestline.commands import write_text
from nestline.manifest import RunManifest


def register(subparsers) -> None:
    parser = subparsers.add_parser("generate", help="write the distance-d planar surface code circuit")
    parser.add_argument("--d", type=int, required=True, help="even code distance")
    parser.add_argument("--out", type=Path, default=None, help="output path (default: surface-d<d>.json)")
    parser.set_defaults(handler=cmd_generate)


def cmd_generate(args) -> int:
    circuit, _ = generate_surface_code(args.d)
    out = args.out or Path(f"surface-d{args.d}.json")
    manifest = RunManifest("generate", {"d": args.d})
    write_text(out, serialize_circuit(circuit))
    manifest.add_output(out)
    manifest.write(out)
    print(f"Wrote distance-{args.d} surface code ({len(circuit.qubits)} qubits) to {out}")
    return 0
