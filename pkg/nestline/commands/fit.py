"""
fit: closed-form expressions from analytic results, optionally compared with simulation.
"""
import json
from collections import defaultdict
from pathlib import Path

from nestline.asymptotics import extract_sim_asymptote, fit_expression, fit_least_squares
from nestline.commands import write_text
from nestline.decoder_sim import read_csv
from nestline.errors import MissingDistanceError
from nestline.fault_enum import load_results
from nestline.manifest import RunManifest
from nestline.reports import render_template

FIT_HEADER = "nestline-fit v1"


def register(subparsers) -> None:
    parser = subparsers.add_parser("fit", help="fit C (R p)^(d/2) from analytic results")
    parser.add_argument("results", type=Path, nargs="+", help="results documents from `analytic`")
    parser.add_argument("--sim", type=Path, nargs="*", default=[], help="simulation CSV files to compare against")
    parser.add_argument("--out", type=Path, default=Path("fit.json"), help="expression document")
    parser.set_defaults(handler=cmd_fit)


def coefficients_by_class(paths) -> dict[str, dict[int, object]]:
    B = defaultdict(dict)
    for path in paths:
        with open(path, "r", encoding="utf-8") as f:
            for result in load_results(f.read()):
                if result.B > 0:
                    B[result.cls.value][result.d] = result.B
    return B


def compare(sim_paths, B: dict[str, dict[int, object]]) -> list[dict]:
    """Simulated asymptote per (class, d) next to the analytic coefficient."""
    points = defaultdict(list)
    for path in sim_paths:
        with open(path, "r", encoding="utf-8") as f:
            for row in read_csv(f.read()):
                points[(row.cls.value, row.d)].append((row.p, row.p_L, row.stderr))

    comparisons = []
    for (cls, d), rows in sorted(points.items()):
        analytic = B.get(cls, {}).get(d)
        if analytic is None:
            continue
        asymptote = extract_sim_asymptote(rows, d)
        b = float(analytic)
        comparisons.append({
            "cls": cls,
            "d": d,
            "A": asymptote.A,
            "stderr": asymptote.stderr,
            "B": b,
            "discrepancy": (asymptote.A - b) / b,
            "converged": asymptote.converged,
            "points_used": len(asymptote.used),
        })
    return comparisons


def cmd_fit(args) -> int:
    manifest = RunManifest("fit", {})
    for path in [*args.results, *args.sim]:
        manifest.add_input(path)

    B = coefficients_by_class(args.results)
    short = [f"{cls} (d={', '.join(map(str, sorted(B[cls])))})" for cls in sorted(B) if len(B[cls]) < 2]
    if short:
        raise MissingDistanceError(f"need non-zero coefficients for two distances per class: {'; '.join(short)}")
    expressions = []
    for cls in sorted(B):
        expressions.append({
            "pair": fit_expression(B[cls], cls=cls),
            "least_squares": fit_least_squares(B[cls], cls=cls) if len(B[cls]) > 2 else None,
        })
    if not expressions:
        raise MissingDistanceError("every class needs non-zero coefficients for at least two distances")
    comparisons = compare(args.sim, B)

    doc = {
        "format": FIT_HEADER,
        "expressions": [e["pair"].to_dict() for e in expressions],
        "least_squares": [e["least_squares"].to_dict() for e in expressions if e["least_squares"]],
        "comparisons": comparisons,
    }
    write_text(args.out, json.dumps(doc, indent=1) + "\n")
    manifest.add_output(args.out)
    manifest.write(args.out)
    print(render_template("fit_summary.txt.j2", {"expressions": expressions, "comparisons": comparisons}))
    return 0
