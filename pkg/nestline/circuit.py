"""
Periodic error-detection circuits and their Pauli error models.

A circuit is a gate schedule of `period` steps on a 2-D lattice of qubits that
repeats forever. Each round of error detection is one period. This module also
reads and writes the versioned circuit document and generates the standard
distance-d planar surface code.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import cached_property
from itertools import product
from pathlib import Path
from typing import Iterator, Mapping

import jsonschema

from nestline import config
from nestline.errors import (
    CircuitError,
    CircuitSchemaError,
    CircuitSyntaxError,
    DuplicateQubitError,
    EmptyScheduleError,
    ErrorModelError,
    InvalidDistanceError,
    MissingBoundaryError,
    OperandCollisionError,
    UnknownGateKindError,
)

logger = logging.getLogger(__name__)

FORMAT_HEADER = "nestline-circuit v1"
SCHEMA_PATH = Path(__file__).parent / "schemas" / "nestline-circuit-v1.schema.json"

Position = tuple[int, int]


class GateKind(str, Enum):
    INIT_Z = "INIT_Z"
    INIT_X = "INIT_X"
    MEAS_Z = "MEAS_Z"
    MEAS_X = "MEAS_X"
    CNOT = "CNOT"
    IDENTITY = "IDENTITY"

    @property
    def arity(self) -> int:
        return 2 if self is GateKind.CNOT else 1

    @property
    def is_measurement(self) -> bool:
        return self in (GateKind.MEAS_Z, GateKind.MEAS_X)

    @property
    def is_init(self) -> bool:
        return self in (GateKind.INIT_Z, GateKind.INIT_X)


class QubitKind(str, Enum):
    DATA = "data"
    SYNDROME_Z = "syndrome-Z"
    SYNDROME_X = "syndrome-X"


class Timing(str, Enum):
    AFTER = "after-gate"
    BEFORE = "before-gate"


def default_timing(kind: GateKind) -> Timing:
    """Measurement errors precede the measurement; everything else follows its gate."""
    return Timing.BEFORE if kind.is_measurement else Timing.AFTER


class NestClass(str, Enum):
    """
    The two detection-event classes.

    X-basis stabilizer measurements give primal events (chains of Z errors
    between them implement logical Z); Z-basis measurements give dual events.
    """

    PRIMAL = "primal"
    DUAL = "dual"

    @property
    def measurement(self) -> GateKind:
        return GateKind.MEAS_X if self is NestClass.PRIMAL else GateKind.MEAS_Z

    @property
    def error_component(self) -> str:
        """Pauli component that flips measurements of this class."""
        return "Z" if self is NestClass.PRIMAL else "X"

    @classmethod
    def of_measurement(cls, kind: GateKind) -> "NestClass":
        return cls.PRIMAL if kind is GateKind.MEAS_X else cls.DUAL


@dataclass(frozen=True)
class Qubit:
    index: int
    x: int
    y: int
    kind: QubitKind

    @property
    def position(self) -> Position:
        return (self.x, self.y)


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    operands: tuple[int, ...]

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", GateKind(self.kind))
        except ValueError:
            raise UnknownGateKindError(f"unknown gate kind {self.kind!r}") from None
        object.__setattr__(self, "operands", tuple(self.operands))


@dataclass(frozen=True)
class PauliTerm:
    """One Pauli error of a gate, occurring with probability coefficient * p."""

    paulis: str
    coefficient: Fraction

    def __post_init__(self):
        object.__setattr__(self, "coefficient", Fraction(self.coefficient))
        if not self.paulis or any(c not in "IXYZ" for c in self.paulis):
            raise ErrorModelError(f"invalid Pauli string {self.paulis!r}")
        if set(self.paulis) == {"I"}:
            raise ErrorModelError("a Pauli term must act non-trivially on some operand")
        if self.coefficient <= 0:
            raise ErrorModelError(f"term {self.paulis} has non-positive coefficient {self.coefficient}")

    @property
    def x_bits(self) -> tuple[bool, ...]:
        return tuple(c in "XY" for c in self.paulis)

    @property
    def z_bits(self) -> tuple[bool, ...]:
        return tuple(c in "ZY" for c in self.paulis)


@dataclass(frozen=True)
class ErrorModel:
    """Per gate kind Pauli terms with their timing convention."""

    terms: Mapping[GateKind, tuple[PauliTerm, ...]]
    timing: Mapping[GateKind, Timing] = field(default_factory=dict)
    p_max: Fraction = field(default_factory=lambda: config.DEFAULT_P_MAX)

    def __post_init__(self):
        terms = {GateKind(kind): tuple(kind_terms) for kind, kind_terms in self.terms.items()}
        terms = {kind: terms[kind] for kind in GateKind if kind in terms}
        given = {GateKind(kind): Timing(value) for kind, value in self.timing.items()}
        # timing only matters where there are terms to place
        timing = {
            kind: given[kind] if kind in given and kind_terms else default_timing(kind)
            for kind, kind_terms in terms.items()
        }
        p_max = Fraction(self.p_max)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "timing", timing)
        object.__setattr__(self, "p_max", p_max)

        for kind, kind_terms in terms.items():
            for term in kind_terms:
                if len(term.paulis) != kind.arity:
                    raise ErrorModelError(
                        f"{kind.value} term {term.paulis} must have {kind.arity} Pauli(s)"
                    )
            total = sum((term.coefficient for term in kind_terms), Fraction(0))
            if total * p_max > 1:
                raise ErrorModelError(
                    f"{kind.value} coefficients sum to {total}, above 1/p_max at p_max={p_max}"
                )

    def covers(self, kind: GateKind) -> bool:
        return kind in self.terms

    def terms_for(self, kind: GateKind) -> tuple[PauliTerm, ...]:
        return self.terms.get(kind, ())

    def timing_for(self, kind: GateKind) -> Timing:
        return self.timing.get(kind, default_timing(kind))

    def total_coefficient(self, kind: GateKind) -> Fraction:
        return sum((term.coefficient for term in self.terms_for(kind)), Fraction(0))

    def scaled(self, factors: Mapping[GateKind, Fraction]) -> "ErrorModel":
        """Multiply the coefficients of selected gate kinds by exact factors."""
        terms = {}
        for kind, kind_terms in self.terms.items():
            factor = Fraction(factors.get(kind, 1))
            if factor < 0:
                raise ErrorModelError(f"negative scale factor for {kind.value}")
            if factor == 0:
                terms[kind] = ()
            else:
                terms[kind] = tuple(PauliTerm(t.paulis, t.coefficient * factor) for t in kind_terms)
        return ErrorModel(terms, self.timing, self.p_max)

    @classmethod
    def empty(cls, kinds=tuple(GateKind)) -> "ErrorModel":
        return cls({kind: () for kind in kinds})


@dataclass(frozen=True)
class Boundary:
    name: str
    positions: tuple[Position, ...]


@dataclass(frozen=True)
class Circuit:
    """
    A validated periodic circuit.

    The schedule is interpreted as repeating with period len(schedule). Each
    class declares exactly two spatial boundaries; the positions of the first
    one also carry that class's logical observable.
    """

    qubits: tuple[Qubit, ...]
    schedule: tuple[tuple[Gate, ...], ...]
    boundaries: Mapping[NestClass, tuple[Boundary, Boundary]]
    error_model: ErrorModel

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        object.__setattr__(self, "schedule", tuple(tuple(step) for step in self.schedule))
        object.__setattr__(
            self,
            "boundaries",
            {NestClass(cls): tuple(pair) for cls, pair in self.boundaries.items()},
        )
        validate_circuit(self)

    @property
    def period(self) -> int:
        return len(self.schedule)

    @cached_property
    def qubit_by_index(self) -> dict[int, Qubit]:
        return {q.index: q for q in self.qubits}

    def position_of(self, index: int) -> Position:
        return self.qubit_by_index[index].position

    @cached_property
    def step_lookup(self) -> tuple[dict[int, int], ...]:
        """For every step, qubit index -> index of the gate acting on it."""
        lookup = []
        for gates in self.schedule:
            acting = {}
            for gate_index, gate in enumerate(gates):
                for operand in gate.operands:
                    acting[operand] = gate_index
            lookup.append(acting)
        return tuple(lookup)

    @cached_property
    def measured_qubits(self) -> dict[int, NestClass]:
        """Stabilizer-measuring qubits and the class of their detection events."""
        measured = {}
        for gates in self.schedule:
            for gate in gates:
                if gate.kind.is_measurement:
                    measured[gate.operands[0]] = NestClass.of_measurement(gate.kind)
        return measured

    def stabilizer_positions(self, cls: NestClass) -> list[Position]:
        return sorted(self.position_of(q) for q, c in self.measured_qubits.items() if c is cls)

    def gate_instances(self) -> Iterator[tuple[int, int, Gate]]:
        """Yield (step, gate index, gate) for one period."""
        for step, gates in enumerate(self.schedule):
            for gate_index, gate in enumerate(gates):
                yield step, gate_index, gate

    def with_error_model(self, error_model: ErrorModel) -> "Circuit":
        return replace(self, error_model=error_model)


def validate_circuit(c: Circuit) -> None:
    """Check every structural invariant of a circuit, raising a named error on the first violation."""
    if not c.schedule:
        raise EmptyScheduleError("the schedule must contain at least one step")

    indices, positions = set(), set()
    for qubit in c.qubits:
        if qubit.index in indices:
            raise DuplicateQubitError(f"qubit index {qubit.index} declared twice")
        if qubit.position in positions:
            raise DuplicateQubitError(f"two qubits share position {qubit.position}")
        indices.add(qubit.index)
        positions.add(qubit.position)

    used_kinds = set()
    measured = set()
    for step, gates in enumerate(c.schedule):
        busy = set()
        for gate in gates:
            if len(gate.operands) != gate.kind.arity:
                raise CircuitSchemaError(
                    f"{gate.kind.value} in step {step} needs {gate.kind.arity} operand(s)"
                )
            if len(set(gate.operands)) != len(gate.operands):
                raise OperandCollisionError(f"CNOT in step {step} uses qubit {gate.operands[0]} twice")
            for operand in gate.operands:
                if operand not in indices:
                    raise CircuitSchemaError(f"step {step} refers to unknown qubit {operand}")
                if operand in busy:
                    raise OperandCollisionError(f"qubit {operand} is acted on twice in step {step}")
                busy.add(operand)
            if gate.kind.is_measurement:
                if gate.operands[0] in measured:
                    raise CircuitError(f"qubit {gate.operands[0]} is measured more than once per period")
                measured.add(gate.operands[0])
            used_kinds.add(gate.kind)

    for cls in NestClass:
        pair = c.boundaries.get(cls)
        if pair is None or len(pair) != 2:
            raise MissingBoundaryError(f"exactly two {cls.value} boundaries must be declared")
        if pair[0].name == pair[1].name:
            raise MissingBoundaryError(f"{cls.value} boundaries need distinct names")
        for boundary in pair:
            if not boundary.positions:
                raise MissingBoundaryError(f"{cls.value} boundary {boundary.name!r} has no positions")

    for kind in sorted(used_kinds, key=lambda k: k.value):
        if not c.error_model.covers(kind):
            raise ErrorModelError(f"error model has no entry for {kind.value}")


# ---------------------------------------------------------------------------
# Circuit document
# ---------------------------------------------------------------------------

def _load_schema() -> dict:
    with open(SCHEMA_PATH, "r", encoding="utf-8") as f:
        return json.load(f)


def _gate_kind(name: str) -> GateKind:
    try:
        return GateKind(name)
    except ValueError:
        raise UnknownGateKindError(f"unknown gate kind {name!r}") from None


def _fraction(entry: dict) -> Fraction:
    if entry["denominator"] == 0:
        raise CircuitSchemaError("a coefficient has zero denominator")
    return Fraction(entry["numerator"], entry["denominator"])


def parse_circuit(text: str) -> Circuit:
    """
    Parse a circuit document.

    Args:
        text: UTF-8 JSON document with the `nestline-circuit v1` header

    Returns:
        Circuit: Validated circuit including its error model
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CircuitSyntaxError(e.msg, e.lineno, e.colno) from e

    if not isinstance(doc, dict) or doc.get("format") != FORMAT_HEADER:
        raise CircuitSchemaError(f"document must start with format header {FORMAT_HEADER!r}")
    try:
        jsonschema.validate(instance=doc, schema=_load_schema())
    except jsonschema.ValidationError as e:
        where = "/".join(str(part) for part in e.absolute_path) or "<root>"
        raise CircuitSchemaError(f"{where}: {e.message}") from None

    qubits = tuple(Qubit(q["index"], q["x"], q["y"], QubitKind(q["kind"])) for q in doc["qubits"])
    schedule = tuple(
        tuple(Gate(_gate_kind(g["gate"]), tuple(g["operands"])) for g in step)
        for step in doc["schedule"]
    )
    if doc["period"] != len(schedule):
        raise CircuitSchemaError(f"period {doc['period']} does not match {len(schedule)} schedule steps")

    declared = doc.get("boundaries")
    if declared is None:
        raise MissingBoundaryError("document has no boundaries declaration")
    boundaries = {}
    for cls in NestClass:
        entries = declared.get(cls.value)
        if entries is None or len(entries) != 2:
            raise MissingBoundaryError(f"exactly two {cls.value} boundaries must be declared")
        boundaries[cls] = tuple(
            Boundary(entry["name"], tuple((p[0], p[1]) for p in entry["positions"]))
            for entry in entries
        )

    terms, timing = {}, {}
    for name, entries in doc["error_model"].items():
        kind = _gate_kind(name)
        timings = {entry.get("timing", default_timing(kind).value) for entry in entries}
        if len(timings) > 1:
            raise ErrorModelError(f"{name} terms disagree on timing")
        if timings:
            timing[kind] = Timing(timings.pop())
        terms[kind] = tuple(PauliTerm(entry["paulis"], _fraction(entry)) for entry in entries)
    p_max = _fraction(doc["p_max"]) if "p_max" in doc else config.DEFAULT_P_MAX

    return Circuit(qubits, schedule, boundaries, ErrorModel(terms, timing, p_max))


def serialize_circuit(c: Circuit) -> str:
    """Render a circuit as a byte-stable document; parse_circuit inverts it."""
    validate_circuit(c)
    em = c.error_model
    doc = {
        "format": FORMAT_HEADER,
        "qubits": [{"index": q.index, "x": q.x, "y": q.y, "kind": q.kind.value} for q in c.qubits],
        "period": c.period,
        "schedule": [
            [{"gate": g.kind.value, "operands": list(g.operands)} for g in step]
            for step in c.schedule
        ],
        "boundaries": {
            cls.value: [
                {"name": b.name, "positions": [list(p) for p in b.positions]}
                for b in c.boundaries[cls]
            ]
            for cls in NestClass
        },
        "error_model": {
            kind.value: [
                {
                    "paulis": term.paulis,
                    "numerator": term.coefficient.numerator,
                    "denominator": term.coefficient.denominator,
                    "timing": em.timing_for(kind).value,
                }
                for term in kind_terms
            ]
            for kind, kind_terms in em.terms.items()
        },
        "p_max": {"numerator": em.p_max.numerator, "denominator": em.p_max.denominator},
    }
    return json.dumps(doc, indent=1) + "\n"


def load_circuit(path: str | Path) -> Circuit:
    with open(path, "r", encoding="utf-8") as f:
        return parse_circuit(f.read())


# ---------------------------------------------------------------------------
# Standard surface code
# ---------------------------------------------------------------------------

# (dx, dy) with y growing downwards. The exact B values depend on this order.
Z_STABILIZER_ORDER = ((0, -1), (-1, 0), (1, 0), (0, 1))  # N, W, E, S
X_STABILIZER_ORDER = ((0, -1), (1, 0), (-1, 0), (0, 1))  # N, E, W, S


def surface_code_error_model(p_max: Fraction | None = None) -> ErrorModel:
    """Init/measurement flips of weight 1, depolarizing IDENTITY and CNOT."""
    single = tuple(PauliTerm(p, Fraction(1, 3)) for p in "XYZ")
    double = tuple(
        PauliTerm(a + b, Fraction(1, 15))
        for a, b in product("IXYZ", repeat=2)
        if a + b != "II"
    )
    terms = {
        GateKind.INIT_Z: (PauliTerm("X", 1),),
        GateKind.INIT_X: (PauliTerm("Z", 1),),
        GateKind.MEAS_Z: (PauliTerm("X", 1),),
        GateKind.MEAS_X: (PauliTerm("Z", 1),),
        GateKind.CNOT: double,
        GateKind.IDENTITY: single,
    }
    if p_max is None:
        return ErrorModel(terms)
    return ErrorModel(terms, p_max=Fraction(p_max))


def generate_surface_code(d: int) -> tuple[Circuit, ErrorModel]:
    """
    Build the standard distance-d planar surface code.

    The (2d-1)x(2d-1) lattice holds data qubits where x+y is even, X-syndrome
    qubits at (odd x, even y) and Z-syndrome qubits at (even x, odd y). One
    round is six steps: syndrome init, four CNOT layers, syndrome measurement,
    with IDENTITY on every otherwise idle qubit.

    Args:
        d: Even code distance, at least 2

    Returns:
        tuple: (Circuit, ErrorModel)
    """
    if not isinstance(d, int) or isinstance(d, bool) or d < 2 or d % 2:
        raise InvalidDistanceError(f"distance must be an even integer >= 2, got {d!r}")

    size = 2 * d - 1
    qubits = []
    for y in range(size):
        for x in range(size):
            if (x + y) % 2 == 0:
                kind = QubitKind.DATA
            elif x % 2 == 1:
                kind = QubitKind.SYNDROME_X
            else:
                kind = QubitKind.SYNDROME_Z
            qubits.append(Qubit(len(qubits), x, y, kind))
    at = {q.position: q.index for q in qubits}
    ancillas = [q for q in qubits if q.kind is not QubitKind.DATA]

    def fill_idle(gates: list[Gate]) -> tuple[Gate, ...]:
        busy = {operand for gate in gates for operand in gate.operands}
        idle = [Gate(GateKind.IDENTITY, (q.index,)) for q in qubits if q.index not in busy]
        return tuple(gates + idle)

    schedule = [
        fill_idle([
            Gate(GateKind.INIT_Z if a.kind is QubitKind.SYNDROME_Z else GateKind.INIT_X, (a.index,))
            for a in ancillas
        ])
    ]
    for layer in range(4):
        cnots = []
        for a in ancillas:
            is_z = a.kind is QubitKind.SYNDROME_Z
            dx, dy = (Z_STABILIZER_ORDER if is_z else X_STABILIZER_ORDER)[layer]
            neighbour = at.get((a.x + dx, a.y + dy))
            if neighbour is None:
                continue
            operands = (neighbour, a.index) if is_z else (a.index, neighbour)
            cnots.append(Gate(GateKind.CNOT, operands))
        schedule.append(fill_idle(cnots))
    schedule.append(
        fill_idle([
            Gate(GateKind.MEAS_Z if a.kind is QubitKind.SYNDROME_Z else GateKind.MEAS_X, (a.index,))
            for a in ancillas
        ])
    )

    edge = size - 1
    boundaries = {
        NestClass.PRIMAL: (
            Boundary("left", tuple((0, y) for y in range(0, size, 2))),
            Boundary("right", tuple((edge, y) for y in range(0, size, 2))),
        ),
        NestClass.DUAL: (
            Boundary("top", tuple((x, 0) for x in range(0, size, 2))),
            Boundary("bottom", tuple((x, edge) for x in range(0, size, 2))),
        ),
    }
    error_model = surface_code_error_model()
    circuit = Circuit(tuple(qubits), tuple(schedule), boundaries, error_model)
    logger.debug("generated distance-%d surface code with %d qubits", d, len(qubits))
    return circuit, error_model
