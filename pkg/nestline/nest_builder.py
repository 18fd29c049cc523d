"""
Nest construction.

Every Pauli term of every gate in one period is inserted into a Pauli frame and
propagated forward until its effect on the stabilizer measurements settles.
The resulting detection events are translated across the window, and terms
that hit the same pair of space-time locations are summed into one stick.
"""
from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Union

from nestline.circuit import Circuit, ErrorModel, GateKind, NestClass, PauliTerm, Position, Timing
from nestline.errors import (
    BoundariesDisconnectedError,
    InvalidTQECCircuitError,
    NestError,
    NestFormatError,
    UnknownBoundaryError,
    UnknownFormatError,
)
from nestline.parallel import parallel_map

logger = logging.getLogger(__name__)

NEST_HEADER = "nestline-nest v1"
GEOMETRY_HEADER = "nestline-nest-geometry v1"
EXPORT_FORMATS = ("json", "segments")

# Rounds a single term is followed for; its measurement flips must be
# identical in the last two.
PROPAGATION_HORIZON = 4


@dataclass(frozen=True, order=True)
class DetectionEventId:
    t: int
    x: int
    y: int
    cls: NestClass

    @property
    def position(self) -> Position:
        return (self.x, self.y)


@dataclass(frozen=True, order=True)
class BoundaryId:
    name: str
    cls: NestClass


NodeId = Union[DetectionEventId, BoundaryId]


def node_sort_key(node: NodeId) -> tuple:
    if isinstance(node, BoundaryId):
        return (0, node.name, 0, 0, 0)
    return (1, "", node.t, node.x, node.y)


def node_label(node: NodeId) -> str:
    if isinstance(node, BoundaryId):
        return f"b:{node.name}"
    return f"e:{node.t}:{node.x}:{node.y}"


@dataclass(frozen=True, order=True)
class TermLocation:
    """A Pauli term of one gate instance: round, step, gate within the step, term within the gate's model."""

    round: int
    step: int
    gate_index: int
    term_index: int


@dataclass(frozen=True, order=True)
class ContributingTerm:
    location: TermLocation
    coefficient: Fraction


@dataclass(frozen=True)
class Stick:
    sid: int
    a: NodeId
    b: NodeId
    coefficient: Fraction
    round: int
    terms: tuple[ContributingTerm, ...] = ()
    flips_observable: bool = False

    @property
    def endpoints(self) -> tuple[NodeId, NodeId]:
        return (self.a, self.b)

    @property
    def boundary(self) -> BoundaryId | None:
        for node in self.endpoints:
            if isinstance(node, BoundaryId):
                return node
        return None

    def other(self, node: NodeId) -> NodeId:
        if node == self.a:
            return self.b
        if node == self.b:
            return self.a
        raise NestError(f"{node} is not an endpoint of stick {self.sid}")

    def probability(self, p: float) -> float:
        """Probability that an odd number of the contributing terms occur at physical rate p."""
        if not self.terms:
            return float(self.coefficient) * p
        q = 0.0
        for term in self.terms:
            c = float(term.coefficient) * p
            q = q + c - 2 * q * c
        return q


@dataclass
class Nest:
    """
    All sticks of one class over a window of rounds.

    Stick ids equal their position in `sticks`. The two boundaries are kept in
    declaration order; the first one carries the logical observable.
    """

    cls: NestClass
    window: int
    boundaries: tuple[BoundaryId, BoundaryId]
    nodes: tuple[NodeId, ...]
    sticks: tuple[Stick, ...]
    boundary_positions: dict[str, tuple[Position, ...]] = field(default_factory=dict)
    dropped_terms: int = field(default=0, compare=False)
    adjacency: dict[NodeId, tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.boundaries = tuple(self.boundaries)
        self.nodes = tuple(self.nodes)
        self.sticks = tuple(self.sticks)
        if len(self.boundaries) != 2:
            raise NestError("a nest needs exactly two boundaries")
        known = set(self.nodes)
        for boundary in self.boundaries:
            if boundary not in known:
                raise NestError(f"boundary {boundary.name} is not a node")

        incident = defaultdict(list)
        self._pairs = {}
        self._layers = defaultdict(list)
        for position, stick in enumerate(self.sticks):
            if stick.sid != position:
                raise NestError(f"stick id {stick.sid} stored at position {position}")
            if stick.a == stick.b:
                raise NestError(f"stick {stick.sid} joins a node to itself")
            if stick.coefficient <= 0:
                raise NestError(f"stick {stick.sid} has non-positive coefficient")
            if isinstance(stick.a, BoundaryId) and isinstance(stick.b, BoundaryId):
                raise NestError(f"stick {stick.sid} joins two boundaries")
            for node in stick.endpoints:
                if node not in known:
                    raise NestError(f"stick {stick.sid} ends at unknown node {node}")
                if node.cls is not self.cls:
                    raise NestError(f"stick {stick.sid} leaves the {self.cls.value} class")
                incident[node].append(stick.sid)
            pair = frozenset(stick.endpoints)
            if pair in self._pairs:
                raise NestError(f"sticks {self._pairs[pair]} and {stick.sid} share endpoints")
            self._pairs[pair] = stick.sid
            if stick.boundary is not None:
                self._layers[(stick.boundary, stick.round)].append(stick.sid)
        self.adjacency = {node: tuple(incident.get(node, ())) for node in self.nodes}

    def boundary(self, name: str | BoundaryId) -> BoundaryId:
        for boundary in self.boundaries:
            if boundary == name or boundary.name == name:
                return boundary
        raise UnknownBoundaryError(f"{self.cls.value} nest has no boundary {name!r}")

    def opposite(self, boundary: BoundaryId) -> BoundaryId:
        first, second = self.boundaries
        return second if self.boundary(boundary) == first else first

    def stick_between(self, a: NodeId, b: NodeId) -> Stick | None:
        sid = self._pairs.get(frozenset((a, b)))
        return None if sid is None else self.sticks[sid]

    def incident(self, node: NodeId) -> list[Stick]:
        return [self.sticks[sid] for sid in self.adjacency.get(node, ())]

    def layer(self, boundary: BoundaryId, r: int) -> list[Stick]:
        return [self.sticks[sid] for sid in self._layers.get((boundary, r), ())]

    @property
    def event_nodes(self) -> list[DetectionEventId]:
        return [node for node in self.nodes if isinstance(node, DetectionEventId)]

    @classmethod
    def assemble(
        cls,
        nest_class: NestClass,
        window: int,
        boundaries: tuple[BoundaryId, BoundaryId],
        specs: Iterable[tuple],
        nodes: Iterable[NodeId] | None = None,
        boundary_positions: dict[str, tuple[Position, ...]] | None = None,
    ) -> "Nest":
        """
        Build a nest from (a, b, coefficient) or (a, b, coefficient, flips_observable) tuples.

        Stick ids follow the order of specs. Nodes default to the boundaries plus
        every stick endpoint.
        """
        sticks = []
        for sid, spec in enumerate(specs):
            a, b, coefficient = spec[:3]
            flips = bool(spec[3]) if len(spec) > 3 else False
            sticks.append(Stick(sid, a, b, Fraction(coefficient), stick_round(a, b), (), flips))
        if nodes is None:
            seen = set(boundaries)
            for stick in sticks:
                seen.update(stick.endpoints)
            nodes = sorted(seen, key=node_sort_key)
        return cls(nest_class, window, tuple(boundaries), tuple(nodes), tuple(sticks), boundary_positions or {})


def stick_round(a: NodeId, b: NodeId) -> int:
    """The minimum round over the real endpoints."""
    rounds = [node.t for node in (a, b) if isinstance(node, DetectionEventId)]
    if not rounds:
        raise NestError("a stick needs at least one detection-event endpoint")
    return min(rounds)


# ---------------------------------------------------------------------------
# Propagation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorResponse:
    """Effect of one term inserted in round 0; event rounds are relative."""

    events: dict[NestClass, tuple[tuple[int, int, int], ...]]
    boundary: dict[NestClass, str | None]
    observable_flips: dict[NestClass, bool]


def _apply_gate(kind: GateKind, operands: tuple[int, ...], frame: dict, flips: dict, r: int) -> None:
    if kind.is_init:
        frame.pop(operands[0], None)
    elif kind is GateKind.MEAS_Z:
        if frame.get(operands[0], (False, False))[0]:
            flips[operands[0]].add(r)
    elif kind is GateKind.MEAS_X:
        if frame.get(operands[0], (False, False))[1]:
            flips[operands[0]].add(r)
    elif kind is GateKind.CNOT:
        control, target = operands
        xc, zc = frame.get(control, (False, False))
        xt, zt = frame.get(target, (False, False))
        frame[control] = (xc, zc ^ zt)
        frame[target] = (xt ^ xc, zt)


def _manhattan(p: Position, q: Position) -> int:
    return abs(p[0] - q[0]) + abs(p[1] - q[1])


def _nearest_boundary(c: Circuit, cls: NestClass, support: tuple[Position, ...], event: Position) -> str:
    def score(positions: tuple[Position, ...]) -> tuple[int, int]:
        return (
            min(_manhattan(p, q) for p in support for q in positions),
            min(_manhattan(event, q) for q in positions),
        )

    first, second = c.boundaries[cls]
    return first.name if score(first.positions) <= score(second.positions) else second.name


def _settle(c: Circuit, step: int, gate_index: int, term: PauliTerm, timing: Timing, horizon: int):
    """Propagate a term from round 0; return (measurement flips per qubit, final frame)."""
    gate = c.schedule[step][gate_index]
    frame = {}
    for operand, x, z in zip(gate.operands, term.x_bits, term.z_bits):
        if x or z:
            frame[operand] = (x, z)
    flips = defaultdict(set)
    start = step if timing is Timing.BEFORE else step + 1
    for tick in range(start, horizon * c.period):
        if not frame:
            break
        r, s = divmod(tick, c.period)
        lookup = c.step_lookup[s]
        gates = c.schedule[s]
        for touched in sorted({lookup[q] for q in frame if q in lookup}):
            _apply_gate(gates[touched].kind, gates[touched].operands, frame, flips, r)
        frame = {q: bits for q, bits in frame.items() if bits[0] or bits[1]}
    return flips, frame


def _respond(c: Circuit, step: int, gate_index: int, term: PauliTerm, timing: Timing,
             horizon: int = PROPAGATION_HORIZON) -> ErrorResponse:
    flips, frame = _settle(c, step, gate_index, term, timing, horizon)

    events = {cls: [] for cls in NestClass}
    for qubit, rounds in sorted(flips.items()):
        if (horizon - 1 in rounds) != (horizon - 2 in rounds):
            raise InvalidTQECCircuitError(
                f"term {term.paulis} on step {step} gate {gate_index} does not settle "
                f"within {horizon} rounds"
            )
        x, y = c.position_of(qubit)
        cls = c.measured_qubits[qubit]
        for r in range(horizon):
            if (r in rounds) != (r - 1 in rounds):
                events[cls].append((r, x, y))

    support = tuple(sorted(c.position_of(q) for q in frame))
    if not support:
        gate = c.schedule[step][gate_index]
        support = tuple(sorted(c.position_of(q) for q in gate.operands))

    boundary, observable = {}, {}
    for cls in NestClass:
        found = events[cls]
        boundary[cls] = _nearest_boundary(c, cls, support, found[0][1:]) if len(found) == 1 else None
        component = 1 if cls.error_component == "Z" else 0
        watched = set(c.boundaries[cls][0].positions)
        parity = sum(1 for q, bits in frame.items() if bits[component] and c.position_of(q) in watched)
        observable[cls] = parity % 2 == 1

    return ErrorResponse({cls: tuple(found) for cls, found in events.items()}, boundary, observable)


def _respond_task(shared, key: tuple[int, int, int]) -> ErrorResponse:
    c, em, horizon = shared
    step, gate_index, term_index = key
    kind = c.schedule[step][gate_index].kind
    return _respond(c, step, gate_index, em.terms_for(kind)[term_index], em.timing_for(kind), horizon)


def period_responses(c: Circuit, em: ErrorModel, horizon: int = PROPAGATION_HORIZON,
                     workers: int = 1) -> dict[tuple[int, int, int], ErrorResponse]:
    """Responses of every (step, gate index, term index) of one period."""
    keys = [
        (step, gate_index, term_index)
        for step, gate_index, gate in c.gate_instances()
        for term_index in range(len(em.terms_for(gate.kind)))
    ]
    results = parallel_map(_respond_task, keys, workers, shared=(c, em, horizon))
    return dict(zip(keys, results))


def propagate_error(c: Circuit, location: TermLocation, W: int, em: ErrorModel | None = None) -> set[DetectionEventId]:
    """
    Detection events flipped by one error term.

    Args:
        c: Circuit
        location: Gate instance and term; location.round must lie inside the window
        W: Window length in rounds
        em: Error model, defaults to the circuit's own

    Returns:
        set: Flipped detection events of both classes; events may lie beyond the window
    """
    if not 0 <= location.round < W:
        raise ValueError(f"round {location.round} is outside the {W}-round window")
    em = em or c.error_model
    kind = c.schedule[location.step][location.gate_index].kind
    term = em.terms_for(kind)[location.term_index]
    response = _respond(c, location.step, location.gate_index, term, em.timing_for(kind))
    return {
        DetectionEventId(t + location.round, x, y, cls)
        for cls, found in response.events.items()
        for t, x, y in found
    }


def build_nests(
    c: Circuit,
    em: ErrorModel | None = None,
    W: int | None = None,
    *,
    noisy_rounds: int | None = None,
    workers: int = 1,
) -> tuple[Nest, Nest]:
    """
    Build the primal and dual nests of a circuit.

    Args:
        c: Circuit
        em: Error model, defaults to the circuit's own
        W: Window length in rounds, defaults to 2d+4
        noisy_rounds: Only terms in rounds [0, noisy_rounds) contribute, defaults to W
        workers: Processes used for propagation

    Returns:
        tuple: (primal Nest, dual Nest)
    """
    em = em or c.error_model
    responses = period_responses(c, em, workers=workers)
    for key, response in responses.items():
        for cls, found in response.events.items():
            if len(found) > 2:
                step, gate_index, term_index = key
                raise InvalidTQECCircuitError(
                    f"term {term_index} of gate {gate_index} in step {step} flips "
                    f"{len(found)} {cls.value} detection events"
                )

    if W is None:
        W = default_window(c, em, responses)
    if W < 1:
        raise ValueError("the window must hold at least one round")
    noisy_rounds = W if noisy_rounds is None else min(noisy_rounds, W)

    return tuple(_aggregate(c, em, cls, W, noisy_rounds, responses) for cls in NestClass)


def default_window(c: Circuit, em: ErrorModel, responses=None) -> int:
    """2d+4 rounds, d being the larger class distance measured on a short window."""
    # nest_analysis imports this module
    from nestline.nest_analysis import code_distance

    if responses is None:
        responses = period_responses(c, em)
    distances = []
    for cls in NestClass:
        try:
            distances.append(code_distance(_aggregate(c, em, cls, 3, 3, responses)))
        except BoundariesDisconnectedError:
            pass
    return 2 * max(distances, default=0) + 4


def _aggregate(c: Circuit, em: ErrorModel, cls: NestClass, W: int, noisy_rounds: int, responses) -> Nest:
    boundaries = tuple(BoundaryId(b.name, cls) for b in c.boundaries[cls])
    by_name = {b.name: b for b in boundaries}

    pending = {}
    dropped = 0
    for r in range(noisy_rounds):
        for key, response in responses.items():
            found = response.events[cls]
            if not found:
                continue
            if any(t + r >= W for t, _, _ in found):
                dropped += 1
                continue
            events = sorted(DetectionEventId(t + r, x, y, cls) for t, x, y in found)
            if len(events) == 2:
                a, b = events
            else:
                a, b = by_name[response.boundary[cls]], events[0]
            step, gate_index, term_index = key
            kind = c.schedule[step][gate_index].kind
            coefficient = em.terms_for(kind)[term_index].coefficient
            entry = pending.setdefault((a, b), [Fraction(0), [], defaultdict(Fraction)])
            entry[0] += coefficient
            entry[1].append(ContributingTerm(TermLocation(r, step, gate_index, term_index), coefficient))
            entry[2][response.observable_flips[cls]] += coefficient

    if dropped:
        logger.info("%s nest: dropped %d terms reaching past round %d", cls.value, dropped, W - 1)

    ordered = sorted(
        pending.items(),
        key=lambda item: (stick_round(*item[0]), node_sort_key(item[0][0]), node_sort_key(item[0][1])),
    )
    sticks = []
    mixed = 0
    for sid, ((a, b), (coefficient, terms, votes)) in enumerate(ordered):
        if len(votes) > 1:
            mixed += 1
        flips = votes.get(True, 0) > votes.get(False, 0)
        sticks.append(Stick(sid, a, b, coefficient, stick_round(a, b), tuple(sorted(terms)), flips))
    if mixed:
        logger.warning("%s nest: %d sticks mix terms with different logical effect", cls.value, mixed)

    nodes = list(boundaries)
    for t in range(W):
        nodes.extend(DetectionEventId(t, x, y, cls) for x, y in c.stabilizer_positions(cls))
    nodes.sort(key=node_sort_key)
    positions = {b.name: tuple(b.positions) for b in c.boundaries[cls]}
    return Nest(cls, W, boundaries, tuple(nodes), tuple(sticks), positions, dropped)


def boundary_sticks(n: Nest, boundary: BoundaryId | str, r: int) -> list[Stick]:
    """All sticks with one endpoint on `boundary` whose round is r."""
    return n.layer(n.boundary(boundary), r)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def _boundary_anchor(n: Nest, boundary: BoundaryId, event: DetectionEventId) -> Position:
    positions = n.boundary_positions.get(boundary.name)
    if not positions:
        return event.position
    return min(positions, key=lambda q: (_manhattan(event.position, q), q))


def export_nest(n: Nest, fmt: str = "json") -> str:
    """
    Render a nest as a structured document or as line segments for 3-D viewers.

    Args:
        n: Nest
        fmt: "json" or "segments"

    Returns:
        str: Document text
    """
    if fmt == "json":
        doc = {
            "format": NEST_HEADER,
            "class": n.cls.value,
            "window": n.window,
            "dropped_terms": n.dropped_terms,
            "boundaries": [
                {"id": node_label(b), "name": b.name, "positions": [list(p) for p in n.boundary_positions.get(b.name, ())]}
                for b in n.boundaries
            ],
            "nodes": [
                {"id": node_label(e), "x": e.x, "y": e.y, "t": e.t}
                for e in n.event_nodes
            ],
            "sticks": [
                {
                    "id": s.sid,
                    "endpoints": [node_label(s.a), node_label(s.b)],
                    "numerator": s.coefficient.numerator,
                    "denominator": s.coefficient.denominator,
                    "flips_observable": s.flips_observable,
                    "terms": [
                        [t.location.round, t.location.step, t.location.gate_index, t.location.term_index,
                         t.coefficient.numerator, t.coefficient.denominator]
                        for t in s.terms
                    ],
                }
                for s in n.sticks
            ],
        }
        return json.dumps(doc, indent=1) + "\n"

    if fmt == "segments":
        lines = [
            f"# {GEOMETRY_HEADER} class={n.cls.value} window={n.window} sticks={len(n.sticks)}",
            "# x1 y1 t1 x2 y2 t2 radius",
        ]
        largest = max((s.coefficient for s in n.sticks), default=Fraction(1))
        for s in n.sticks:
            ends = []
            event = s.b if isinstance(s.a, BoundaryId) else s.a
            for node in s.endpoints:
                if isinstance(node, BoundaryId):
                    x, y = _boundary_anchor(n, node, event)
                    ends.append((x, y, event.t))
                else:
                    ends.append((node.x, node.y, node.t))
            radius = 0.25 * float(s.coefficient / largest)
            (x1, y1, t1), (x2, y2, t2) = ends
            lines.append(f"{x1} {y1} {t1} {x2} {y2} {t2} {radius:.6g}")
        return "\n".join(lines) + "\n"

    raise UnknownFormatError(f"unknown nest export format {fmt!r}; use one of {', '.join(EXPORT_FORMATS)}")


def import_nest(text: str) -> Nest:
    """Inverse of export_nest(n, "json")."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise NestFormatError(f"{e.msg} (line {e.lineno}, column {e.colno})") from e
    if not isinstance(doc, dict) or doc.get("format") != NEST_HEADER:
        raise NestFormatError(f"document must carry format header {NEST_HEADER!r}")
    try:
        cls = NestClass(doc["class"])
        by_label = {}
        boundaries = []
        positions = {}
        for entry in doc["boundaries"]:
            boundary = BoundaryId(entry["name"], cls)
            by_label[entry["id"]] = boundary
            boundaries.append(boundary)
            positions[entry["name"]] = tuple((p[0], p[1]) for p in entry["positions"])
        for entry in doc["nodes"]:
            by_label[entry["id"]] = DetectionEventId(entry["t"], entry["x"], entry["y"], cls)
        sticks = []
        for entry in doc["sticks"]:
            a, b = (by_label[label] for label in entry["endpoints"])
            terms = tuple(
                ContributingTerm(TermLocation(r, s, g, k), Fraction(num, den))
                for r, s, g, k, num, den in entry["terms"]
            )
            sticks.append(Stick(
                entry["id"], a, b, Fraction(entry["numerator"], entry["denominator"]),
                stick_round(a, b), terms, entry["flips_observable"],
            ))
        nodes = sorted(by_label.values(), key=node_sort_key)
        return Nest(cls, doc["window"], tuple(boundaries), tuple(nodes), tuple(sticks),
                    positions, doc.get("dropped_terms", 0))
    except (KeyError, TypeError, ValueError) as e:
        raise NestFormatError(f"malformed nest document: {e}") from e
