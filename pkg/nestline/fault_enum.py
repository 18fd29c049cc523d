"""
Analytic per-round logical failure coefficients.

Every d-stick logical operator anchored on one round of boundary sticks is
enumerated, split into all d/2-stick faults, and each fault keeps the most
probable complement it has been seen with. A base set from round r0 and a
step set from round r0+1, trimmed by later rounds, assign every fault to a
single round; summing the step faults gives B such that the logical failure
rate per round is B p^(d/2) at low p.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Iterator

from nestline.circuit import Circuit, ErrorModel, NestClass
from nestline.errors import (
    BoundariesDisconnectedError,
    DistanceMismatchError,
    InvalidDistanceError,
    NestFormatError,
    WindowExhaustedError,
)
from nestline.nest_analysis import code_distance, distance_table, nest_graph
from nestline.nest_builder import BoundaryId, DetectionEventId, Nest, Stick, boundary_sticks, build_nests
from nestline.parallel import parallel_map

logger = logging.getLogger(__name__)

RESULTS_HEADER = "nestline-results v1"
IMPROVED_POLICIES = ("remove", "update")
MAX_WINDOW_RETRIES = 3

FaultKey = tuple[int, ...]


@dataclass(frozen=True)
class LogicalOperator:
    """A self-avoiding path of sticks from one boundary to the other."""

    sticks: tuple[Stick, ...]

    @property
    def p_op(self) -> Fraction:
        return math.prod((s.coefficient for s in self.sticks), start=Fraction(1))

    @property
    def key(self) -> tuple[int, ...]:
        return tuple(s.sid for s in self.sticks)


@dataclass(frozen=True)
class Fault:
    key: FaultKey
    p_f: Fraction
    p_c: Fraction


@dataclass
class FaultSet:
    """
    Faults by canonical key.

    Weights are held as integers scaled by `scale` (the common denominator of
    the nest's coefficients raised to d/2); `fault()` returns exact rationals.
    """

    label: str
    scale: int
    entries: dict[FaultKey, tuple[int, int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: FaultKey) -> bool:
        return key in self.entries

    def keys(self):
        return self.entries.keys()

    def fault(self, key: FaultKey) -> Fault:
        p_f, p_c = self.entries[key]
        return Fault(key, Fraction(p_f, self.scale), Fraction(p_c, self.scale))

    def faults(self) -> list[Fault]:
        return [self.fault(key) for key in sorted(self.entries)]


@dataclass
class AnalyticResult:
    cls: NestClass
    d: int
    B: Fraction
    counts: dict[str, int]
    rounds_consumed: int
    window: int
    wall_time: float = 0.0
    base_size: int = 0
    step_size: int = 0

    @property
    def B_float(self) -> float:
        return float(self.B)

    def to_dict(self) -> dict:
        return {
            "class": self.cls.value,
            "d": self.d,
            "B_numerator": self.B.numerator,
            "B_denominator": self.B.denominator,
            "B_float": self.B_float,
            "counts": dict(self.counts),
            "rounds_consumed": self.rounds_consumed,
            "window": self.window,
            "base_size": self.base_size,
            "step_size": self.step_size,
            "wall_time": round(self.wall_time, 6),
        }

    @classmethod
    def from_dict(cls, entry: dict) -> "AnalyticResult":
        return cls(
            NestClass(entry["class"]),
            int(entry["d"]),
            Fraction(entry["B_numerator"], entry["B_denominator"]),
            dict(entry.get("counts", {})),
            int(entry.get("rounds_consumed", 0)),
            int(entry.get("window", 0)),
            float(entry.get("wall_time", 0.0)),
            int(entry.get("base_size", 0)),
            int(entry.get("step_size", 0)),
        )


def scale_factor(p_f, p_c) -> Fraction:
    """0 when the fault is likelier than its complement, 1/2 at a tie, 1 otherwise."""
    if p_f > p_c:
        return Fraction(0)
    if p_f == p_c:
        return Fraction(1, 2)
    return Fraction(1)


def faults_of(op: LogicalOperator) -> list[tuple[FaultKey, Fraction, Fraction]]:
    """Every choice of half the operator's sticks with its probability and complement probability."""
    d = len(op.sticks)
    faults = []
    for chosen in combinations(range(d), d // 2):
        rest = [i for i in range(d) if i not in chosen]
        key = tuple(sorted(op.sticks[i].sid for i in chosen))
        p_f = math.prod((op.sticks[i].coefficient for i in chosen), start=Fraction(1))
        p_c = math.prod((op.sticks[i].coefficient for i in rest), start=Fraction(1))
        faults.append((key, p_f, p_c))
    return faults


class _Search:
    """Pruned depth-first search for d-stick operators between the two boundaries of a nest."""

    def __init__(self, n: Nest, boundary: BoundaryId, d: int, margin: int | None = 1):
        graph = nest_graph(n)
        self.nest = n
        self.d = d
        self.margin = margin
        self.source = n.boundary(boundary)
        self.target = n.opposite(self.source)
        self.remaining = distance_table(n, graph).to[self.target]
        self.neighbours = {
            node: tuple(sorted((s.sid, s.other(node)) for s in n.incident(node)))
            for node in n.nodes
        }
        denominator = math.lcm(*(s.coefficient.denominator for s in n.sticks)) if n.sticks else 1
        self.weights = [int(s.coefficient * denominator) for s in n.sticks]
        self.scale = denominator ** (d // 2)

    def _admit(self, node, used: int) -> bool:
        left = self.remaining.get(node)
        if left is None or used + left > self.d:
            return False
        if self.margin is not None and not self.margin <= node.t <= self.nest.window - 1 - self.margin:
            raise WindowExhaustedError(
                f"operators of length {self.d} reach round {node.t} of a {self.nest.window}-round window"
            )
        return True

    def paths(self, anchor: int) -> Iterator[tuple[int, ...]]:
        """Stick-id sequences of every operator starting with the anchor stick."""
        stick = self.nest.sticks[anchor]
        if self.source not in stick.endpoints:
            raise ValueError(f"stick {anchor} does not touch boundary {self.source.name!r}")
        start = stick.other(self.source)
        if isinstance(start, BoundaryId) or not self._admit(start, 1):
            return
        yield from self._extend(start, [anchor], {start})

    def _extend(self, node, path: list[int], visited: set) -> Iterator[tuple[int, ...]]:
        used = len(path) + 1
        for sid, following in self.neighbours[node]:
            if following == self.target:
                if used == self.d:
                    yield tuple(path) + (sid,)
                continue
            if not isinstance(following, DetectionEventId) or following in visited:
                continue
            if not self._admit(following, used):
                continue
            path.append(sid)
            visited.add(following)
            yield from self._extend(following, path, visited)
            path.pop()
            visited.discard(following)

    def anchor_faults(self, anchor: int) -> tuple[dict[FaultKey, tuple[int, int]], int]:
        """Faults of all operators on one anchor, keeping the largest complement per key."""
        half = self.d // 2
        found = {}
        operators = 0
        for path in self.paths(anchor):
            operators += 1
            w = [self.weights[sid] for sid in path]
            total = math.prod(w)
            for chosen in combinations(range(self.d), half):
                key = tuple(sorted(path[i] for i in chosen))
                p_f = math.prod(w[i] for i in chosen)
                p_c = total // p_f
                known = found.get(key)
                if known is None or p_c > known[1]:
                    found[key] = (p_f, p_c)
        return found, operators

    def round_faults(self, r: int, workers: int = 1) -> tuple[dict[FaultKey, tuple[int, int]], int]:
        anchors = [s.sid for s in boundary_sticks(self.nest, self.source, r)]
        merged = {}
        operators = 0
        for found, count in parallel_map(_anchor_task, anchors, workers, shared=self):
            operators += count
            for key, (p_f, p_c) in found.items():
                known = merged.get(key)
                if known is None or p_c > known[1]:
                    merged[key] = (p_f, p_c)
        logger.debug("round %d: %d anchors, %d operators, %d faults", r, len(anchors), operators, len(merged))
        return merged, operators


def _anchor_task(search: _Search, anchor: int):
    return search.anchor_faults(anchor)


def enumerate_operators(n: Nest, anchors: Iterable[Stick], d: int, margin: int | None = None) -> Iterator[LogicalOperator]:
    """
    Yield every self-avoiding d-stick path that starts with one of the anchor sticks and ends on the opposite boundary.

    Args:
        n: Nest
        anchors: Boundary sticks, all on the same boundary
        d: Code distance of the nest
        margin: Rounds at each window edge the search may not enter; None disables the check

    Returns:
        Iterator: LogicalOperator per path, anchors in the given order
    """
    anchors = list(anchors)
    if not anchors:
        return
    boundaries = {s.boundary for s in anchors}
    if len(boundaries) != 1 or None in boundaries:
        raise ValueError("anchor sticks must all touch the same boundary")
    search = _Search(n, boundaries.pop(), d, margin)
    for anchor in anchors:
        for path in search.paths(anchor.sid):
            yield LogicalOperator(tuple(n.sticks[sid] for sid in path))


def _check_policy(improved: str) -> None:
    if improved not in IMPROVED_POLICIES:
        raise ValueError(f"improved policy must be one of {IMPROVED_POLICIES}, got {improved!r}")


def build_base_set(n: Nest, boundary: BoundaryId | str, r0: int, d: int, *,
                   margin: int | None = 1, workers: int = 1) -> FaultSet:
    """Faults of every operator anchored on the boundary sticks of round r0."""
    search = _Search(n, n.boundary(boundary), d, margin)
    found, _ = search.round_faults(r0, workers)
    return FaultSet("base", search.scale, found)


def build_step_set(n: Nest, boundary: BoundaryId | str, r0: int, d: int, *,
                   base: FaultSet | None = None, margin: int | None = 1, workers: int = 1,
                   improved: str = "remove") -> tuple[FaultSet, int]:
    """
    Faults best associated with round r0+1.

    Round r0+1 faults enter the step set unless the base set already holds
    them with an equal or larger complement. Every later round then takes
    out (or, with improved="update", raises) step faults it sees with a
    strictly larger complement, until a round changes nothing.

    Args:
        n: Nest
        boundary: Anchor boundary
        r0: Base round
        d: Code distance
        base: Base set of round r0, built when omitted

    Returns:
        tuple: (step FaultSet, number of rounds enumerated including r0)
    """
    _check_policy(improved)
    search = _Search(n, n.boundary(boundary), d, margin)
    if base is None:
        base = FaultSet("base", search.scale, search.round_faults(r0, workers)[0])
    base_entries = dict(base.entries)

    step = {}
    for key, (p_f, p_c) in search.round_faults(r0 + 1, workers)[0].items():
        known = base_entries.get(key)
        if known is None or p_c > known[1]:
            base_entries.pop(key, None)
            step[key] = (p_f, p_c)

    r = r0 + 2
    while True:
        changed = 0
        for key, (p_f, p_c) in search.round_faults(r, workers)[0].items():
            known = step.get(key)
            if known is None or p_c <= known[1]:
                continue
            changed += 1
            if improved == "remove":
                del step[key]
            else:
                step[key] = (p_f, p_c)
        if not changed:
            break
        logger.debug("round %d moved %d faults out of the step set", r, changed)
        r += 1
    return FaultSet("step", search.scale, step), r - r0 + 1


def _sum_step(step: FaultSet) -> tuple[Fraction, dict[str, int]]:
    counts = {"scale0": 0, "scaleHalf": 0, "scale1": 0}
    total = Fraction(0)
    for p_f, p_c in step.entries.values():
        factor = scale_factor(p_f, p_c)
        if factor == 0:
            counts["scale0"] += 1
        elif factor == 1:
            counts["scale1"] += 1
            total += p_f
        else:
            counts["scaleHalf"] += 1
            total += Fraction(p_f, 2)
    return total / step.scale, counts


def _empty_result(n: Nest, d: int | None, started: float) -> AnalyticResult:
    return AnalyticResult(n.cls, d or 0, Fraction(0), {"scale0": 0, "scaleHalf": 0, "scale1": 0},
                          0, n.window, time.perf_counter() - started)


def analyze_nest(n: Nest, d: int | None = None, boundary: BoundaryId | str | None = None,
                 r0: int | None = None, *, workers: int = 1, margin: int | None = 1,
                 improved: str = "remove") -> AnalyticResult:
    """
    Run the base/step pipeline on a built nest and sum B.

    The window is exhausted when an operator enters one of the `margin`
    rounds at either edge, not the last d rounds: sticks are complete one
    round in from the edge, so margin=1 already keeps every counted
    operator inside the fully built part of the nest.

    Args:
        n: Nest
        d: Expected code distance, measured when omitted
        boundary: Anchor boundary, defaults to the first declared one
        r0: Base round, defaults to d+2
        workers: Processes used for enumeration
        margin: Window-edge rounds the search may not enter; None disables the check
        improved: "remove" or "update" for faults improved after round r0+1

    Returns:
        AnalyticResult: B with fault counts by scale factor
    """
    _check_policy(improved)
    started = time.perf_counter()
    try:
        distance = code_distance(n)
    except BoundariesDisconnectedError:
        logger.warning("%s nest has no path between its boundaries; B is 0", n.cls.value)
        return _empty_result(n, d, started)
    if d is None:
        d = distance
    if d % 2:
        raise InvalidDistanceError(f"{n.cls.value} nest has odd distance {d}")
    if d != distance:
        raise DistanceMismatchError(f"{n.cls.value} nest has distance {distance}, expected {d}")

    r0 = d + 2 if r0 is None else r0
    anchor = n.boundaries[0] if boundary is None else n.boundary(boundary)
    base = build_base_set(n, anchor, r0, d, margin=margin, workers=workers)
    step, rounds = build_step_set(n, anchor, r0, d, base=base, margin=margin, workers=workers, improved=improved)
    B, counts = _sum_step(step)
    result = AnalyticResult(n.cls, d, B, counts, rounds, n.window, time.perf_counter() - started,
                            len(base), len(step))
    logger.info("%s d=%d: B=%s (%.6g) from %d step faults over %d rounds",
                n.cls.value, d, B, float(B), len(step), rounds)
    return result


def compute_all(c: Circuit, em: ErrorModel | None = None, classes: Iterable[NestClass] = tuple(NestClass),
                d: int | None = None, *, window: int | None = None, workers: int = 1,
                margin: int | None = 1, improved: str = "remove") -> dict[NestClass, AnalyticResult]:
    """
    B for several classes of one circuit, building the nests once per window.

    The window defaults to 2d+4 rounds and grows by d whenever the search
    reaches its edges.
    """
    classes = [NestClass(cls) for cls in classes]
    if d is not None and (d < 2 or d % 2):
        raise InvalidDistanceError(f"distance must be an even integer >= 2, got {d!r}")
    em = em or c.error_model
    W = window if window is not None else (2 * d + 4 if d is not None else None)

    for attempt in range(MAX_WINDOW_RETRIES + 1):
        primal, dual = build_nests(c, em, W, workers=workers)
        nests = {NestClass.PRIMAL: primal, NestClass.DUAL: dual}
        W = primal.window
        try:
            return {
                cls: analyze_nest(nests[cls], d, workers=workers, margin=margin, improved=improved)
                for cls in classes
            }
        except WindowExhaustedError as e:
            if attempt == MAX_WINDOW_RETRIES:
                raise
            grow = d or max((_safe_distance(nests[cls]) for cls in classes), default=2)
            logger.warning("%s; rebuilding with %d rounds", e, W + grow)
            W += grow


def _safe_distance(n: Nest) -> int:
    try:
        return code_distance(n)
    except BoundariesDisconnectedError:
        return 2


def compute_B(c: Circuit, em: ErrorModel | None, cls: NestClass, d: int | None = None, **options) -> AnalyticResult:
    return compute_all(c, em, [cls], d, **options)[NestClass(cls)]


def dump_results(results: Iterable[AnalyticResult]) -> str:
    doc = {"format": RESULTS_HEADER, "results": [r.to_dict() for r in results]}
    return json.dumps(doc, indent=1) + "\n"


def load_results(text: str) -> list[AnalyticResult]:
    try:
        doc = json.loads(text)
        if doc.get("format") != RESULTS_HEADER:
            raise NestFormatError(f"results document must carry format header {RESULTS_HEADER!r}")
        return [AnalyticResult.from_dict(entry) for entry in doc["results"]]
    except (json.JSONDecodeError, AttributeError, KeyError, TypeError, ValueError) as e:
        raise NestFormatError(f"malformed results document: {e}") from e
