"""
Monte Carlo check of the analytic coefficients.

Runs of R noisy rounds (plus two noiseless rounds so every error settles) are
sampled with a Pauli frame, decoded per class by exact minimum-weight perfect
matching on the nest of the same circuit, and counted as failures when the
correction and the true errors differ by a logical operator.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from nestline.circuit import Circuit, ErrorModel, GateKind, NestClass, Timing
from nestline.errors import BoundariesDisconnectedError, DecodingError
from nestline.nest_analysis import code_distance, dijkstra_from, nest_graph, path_sticks, stick_weights
from nestline.nest_builder import DetectionEventId, Nest, Stick, TermLocation, build_nests, default_window
from nestline.parallel import parallel_map

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("class", "d", "p", "runs", "rounds_per_run", "failures", "p_L", "stderr", "seconds")
SETTLE_ROUNDS = 2
# Matching weights are integers in units of 2^-20 nats.
WEIGHT_RESOLUTION = 2 ** 20
# Rate used for weights when decoding at p=0 (forced errors only).
ZERO_RATE_WEIGHT_P = 1e-6


def _circuit_distance(c: Circuit, em: ErrorModel) -> int:
    """Larger class distance; 0 when neither class connects its boundaries."""
    return (default_window(c, em) - 4) // 2


@dataclass(frozen=True)
class SimConfig:
    circuit: Circuit
    p: float
    runs: int
    rounds: int | None = None
    seed: int = 0
    classes: tuple[NestClass, ...] = tuple(NestClass)
    error_model: ErrorModel | None = None
    forced: TermLocation | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(NestClass(c) for c in self.classes))
        em = self.error_model or self.circuit.error_model
        if not 0 <= self.p <= em.p_max:
            raise ValueError(f"p must lie in [0, {float(em.p_max):g}], got {self.p}")
        if self.runs < 1:
            raise ValueError("at least one run is required")
        if self.rounds is not None:
            d = _circuit_distance(self.circuit, em)
            if self.rounds < max(d, 1):
                raise ValueError(f"a run needs at least d={d} rounds, got {self.rounds}")

    @property
    def model(self) -> ErrorModel:
        return self.error_model or self.circuit.error_model


@dataclass
class RunRecord:
    events: dict[NestClass, set[DetectionEventId]]
    errors: list[TermLocation]
    observable: dict[NestClass, bool]


@dataclass
class SimResult:
    cls: NestClass
    d: int
    p: float
    runs: int
    rounds: int
    failures: int
    seconds: float = 0.0

    @property
    def fraction(self) -> float:
        return self.failures / self.runs

    @property
    def p_L(self) -> float:
        """Per-round rate solving f = 1 - (1 - p_L)^R."""
        return 1 - (1 - self.fraction) ** (1 / self.rounds)

    @property
    def stderr(self) -> float:
        f = self.fraction
        if f >= 1:
            return 0.0
        spread = math.sqrt(f * (1 - f) / self.runs)
        return spread * (1 - f) ** (1 / self.rounds - 1) / self.rounds

    def row(self) -> dict:
        return {
            "class": self.cls.value,
            "d": self.d,
            "p": f"{self.p:.10g}",
            "runs": self.runs,
            "rounds_per_run": self.rounds,
            "failures": self.failures,
            "p_L": f"{self.p_L:.10g}",
            "stderr": f"{self.stderr:.10g}",
            "seconds": f"{self.seconds:.3f}",
        }


@dataclass(frozen=True)
class MatchingInstance:
    """Detection events with integer pair weights and weights to the nearest boundary (None when unreachable)."""

    events: tuple[DetectionEventId, ...]
    pair_weights: dict[tuple[int, int], int]
    boundary_weights: tuple[int | None, ...]


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]
    to_boundary: tuple[int, ...]
    weight: int


def _quantize(w: float) -> int:
    return int(round(w * WEIGHT_RESOLUTION))


def solve_matching(instance: MatchingInstance) -> Matching:
    """
    Exact minimum-weight perfect matching where any event may instead go to the boundary.

    Each event gets a boundary companion; companions pair with each other at
    weight 0, so the matching is perfect on the doubled graph.
    """
    k = len(instance.events)
    if k == 0:
        return Matching((), (), 0)
    wb = instance.boundary_weights
    graph = nx.Graph()
    edges = []
    for (i, j), w in sorted(instance.pair_weights.items()):
        # two boundary matches are at least as good
        if wb[i] is not None and wb[j] is not None and w >= wb[i] + wb[j]:
            continue
        edges.append((("e", i), ("e", j), w))
    for i in range(k):
        if wb[i] is not None:
            edges.append((("e", i), ("b", i), wb[i]))
        for j in range(i + 1, k):
            edges.append((("b", i), ("b", j), 0))
    top = max((w for _, _, w in edges), default=0) + 1
    graph.add_weighted_edges_from((u, v, top - w) for u, v, w in edges)

    matched = nx.max_weight_matching(graph, maxcardinality=True)
    if len(matched) != k:
        raise DecodingError(f"no perfect matching for {k} detection events")

    pairs, to_boundary, weight = [], [], 0
    for u, v in matched:
        if u[0] == "b" and v[0] == "b":
            continue
        if u[0] == "e" and v[0] == "e":
            i, j = sorted((u[1], v[1]))
            pairs.append((i, j))
            weight += instance.pair_weights[(i, j)]
        else:
            i = u[1] if u[0] == "e" else v[1]
            to_boundary.append(i)
            weight += wb[i]
    return Matching(tuple(sorted(pairs)), tuple(sorted(to_boundary)), weight)


class Decoder:
    """Matching decoder over one nest at a fixed physical error rate."""

    def __init__(self, n: Nest, p: float):
        self.nest = n
        self.graph = nest_graph(n)
        self.weights = stick_weights(n, p if p > 0 else ZERO_RATE_WEIGHT_P)

    def decode(self, events: Iterable[DetectionEventId]) -> list[Stick]:
        events = tuple(sorted(events))
        if not events:
            return []
        distances, paths = [], []
        for e in events:
            dist, path = dijkstra_from(self.graph, e, self.weights)
            distances.append(dist)
            paths.append(path)

        boundary_weights, boundary_paths = [], []
        for dist, path in zip(distances, paths):
            reachable = [b for b in self.nest.boundaries if b in dist]
            if not reachable:
                boundary_weights.append(None)
                boundary_paths.append(None)
                continue
            nearest = min(reachable, key=lambda b: (dist[b], b.name))
            boundary_weights.append(_quantize(dist[nearest]))
            boundary_paths.append(path[nearest])

        pair_weights = {
            (i, j): _quantize(distances[i][events[j]])
            for i in range(len(events))
            for j in range(i + 1, len(events))
            if events[j] in distances[i]
        }
        matching = solve_matching(MatchingInstance(events, pair_weights, tuple(boundary_weights)))

        correction = set()
        for i, j in matching.pairs:
            correction ^= {s.sid for s in path_sticks(self.nest, paths[i][events[j]])}
        for i in matching.to_boundary:
            correction ^= {s.sid for s in path_sticks(self.nest, boundary_paths[i])}
        return [self.nest.sticks[sid] for sid in sorted(correction)]


def decode(n: Nest, events: Iterable[DetectionEventId], p: float) -> list[Stick]:
    return Decoder(n, p).decode(events)


@dataclass
class _KindTable:
    """Vectorized view of the gates of one kind in one step."""

    kind: GateKind
    gate_ids: np.ndarray
    operands: np.ndarray
    timing: Timing = Timing.AFTER
    columns: np.ndarray | None = None
    x_bits: np.ndarray | None = None
    z_bits: np.ndarray | None = None
    cumulative: np.ndarray | None = None


class _Simulator:
    def __init__(self, cfg: SimConfig):
        c, em = cfg.circuit, cfg.model
        self.cfg = cfg
        self.circuit = c
        self.slot = {q.index: i for i, q in enumerate(c.qubits)}
        self.measured = sorted(c.measured_qubits)
        self.column = {q: i for i, q in enumerate(self.measured)}

        if cfg.rounds is None:
            d = _circuit_distance(c, em)
            self.rounds = 4 * d if d else 4
        else:
            self.rounds = cfg.rounds
        self.total_rounds = self.rounds + SETTLE_ROUNDS

        self.steps = []
        for step, gates in enumerate(c.schedule):
            grouped = {}
            for gate_index, gate in enumerate(gates):
                grouped.setdefault(gate.kind, []).append(gate_index)
            tables = []
            for kind, ids in grouped.items():
                table = _KindTable(
                    kind,
                    np.array(ids, dtype=np.int64),
                    np.array([[self.slot[q] for q in gates[i].operands] for i in ids], dtype=np.int64),
                    timing=em.timing_for(kind),
                )
                if kind.is_measurement:
                    table.columns = np.array([self.column[gates[i].operands[0]] for i in ids], dtype=np.int64)
                terms = em.terms_for(kind)
                if terms:
                    table.x_bits = np.array([t.x_bits for t in terms], dtype=bool)
                    table.z_bits = np.array([t.z_bits for t in terms], dtype=bool)
                    table.cumulative = np.cumsum([float(t.coefficient) * cfg.p for t in terms])
                tables.append(table)
            self.steps.append(tables)

        self.watch = {}
        for cls in NestClass:
            positions = set(c.boundaries[cls][0].positions)
            self.watch[cls] = np.array(
                [self.slot[q.index] for q in c.qubits if q.position in positions], dtype=np.int64
            )

        primal, dual = build_nests(c, em, self.total_rounds, noisy_rounds=self.rounds, workers=1)
        self.nests = {NestClass.PRIMAL: primal, NestClass.DUAL: dual}
        self.distance = {}
        for cls, n in self.nests.items():
            try:
                self.distance[cls] = code_distance(n)
            except BoundariesDisconnectedError:
                self.distance[cls] = 0
        self.decoders = {cls: Decoder(self.nests[cls], cfg.p) for cls in cfg.classes}

    @staticmethod
    def _flip(x, z, table: _KindTable, hits: np.ndarray, terms: np.ndarray) -> None:
        for j in range(table.operands.shape[1]):
            qubits = table.operands[hits, j]
            x[qubits] ^= table.x_bits[terms, j]
            z[qubits] ^= table.z_bits[terms, j]

    def _apply_forced(self, x, z, r: int, step: int, timing: Timing) -> None:
        forced = self.cfg.forced
        if forced is None or forced.round != r or forced.step != step:
            return
        kind = self.circuit.schedule[step][forced.gate_index].kind
        if self.cfg.model.timing_for(kind) is not timing:
            return
        term = self.cfg.model.terms_for(kind)[forced.term_index]
        for q, bx, bz in zip(self.circuit.schedule[step][forced.gate_index].operands, term.x_bits, term.z_bits):
            x[self.slot[q]] ^= bx
            z[self.slot[q]] ^= bz

    def sample(self, run_index: int) -> RunRecord:
        rng = np.random.default_rng([self.cfg.seed, run_index])
        size = len(self.circuit.qubits)
        x = np.zeros(size, dtype=bool)
        z = np.zeros(size, dtype=bool)
        outcomes = np.zeros((self.total_rounds, len(self.measured)), dtype=bool)
        errors = []

        for r in range(self.total_rounds):
            noisy = r < self.rounds and self.cfg.p > 0
            for step, tables in enumerate(self.steps):
                sampled = []
                if noisy:
                    for table in tables:
                        if table.cumulative is None:
                            continue
                        u = rng.random(len(table.gate_ids))
                        hits = np.nonzero(u < table.cumulative[-1])[0]
                        if hits.size:
                            terms = np.searchsorted(table.cumulative, u[hits], side="right")
                            sampled.append((table, hits, terms))
                            errors.extend(
                                TermLocation(r, step, int(table.gate_ids[h]), int(k)) for h, k in zip(hits, terms)
                            )

                for table, hits, terms in sampled:
                    if table.timing is Timing.BEFORE:
                        self._flip(x, z, table, hits, terms)
                self._apply_forced(x, z, r, step, Timing.BEFORE)

                for table in tables:
                    ops = table.operands
                    if table.kind.is_init:
                        x[ops[:, 0]] = False
                        z[ops[:, 0]] = False
                    elif table.kind is GateKind.MEAS_Z:
                        outcomes[r, table.columns] = x[ops[:, 0]]
                    elif table.kind is GateKind.MEAS_X:
                        outcomes[r, table.columns] = z[ops[:, 0]]
                    elif table.kind is GateKind.CNOT:
                        control, target = ops[:, 0], ops[:, 1]
                        x[target] ^= x[control]
                        z[control] ^= z[target]

                for table, hits, terms in sampled:
                    if table.timing is Timing.AFTER:
                        self._flip(x, z, table, hits, terms)
                self._apply_forced(x, z, r, step, Timing.AFTER)

        flips = outcomes ^ np.vstack([np.zeros((1, len(self.measured)), dtype=bool), outcomes[:-1]])
        events = {cls: set() for cls in NestClass}
        for t, col in zip(*np.nonzero(flips)):
            qubit = self.measured[col]
            px, py = self.circuit.position_of(qubit)
            cls = self.circuit.measured_qubits[qubit]
            events[cls].add(DetectionEventId(int(t), px, py, cls))

        observable = {
            NestClass.PRIMAL: bool(np.count_nonzero(z[self.watch[NestClass.PRIMAL]]) % 2),
            NestClass.DUAL: bool(np.count_nonzero(x[self.watch[NestClass.DUAL]]) % 2),
        }
        return RunRecord(events, errors, observable)

    def failures(self, run_index: int) -> dict[NestClass, bool]:
        record = self.sample(run_index)
        failed = {}
        for cls in self.cfg.classes:
            correction = self.decoders[cls].decode(record.events[cls])
            corrected = sum(s.flips_observable for s in correction) % 2 == 1
            failed[cls] = record.observable[cls] != corrected
        return failed


def _run_task(sim: _Simulator, run_index: int) -> dict[NestClass, bool]:
    return sim.failures(run_index)


def sample_run(cfg: SimConfig, run_index: int) -> RunRecord:
    """Detection events, sampled errors and observable flips of one run; deterministic in (seed, run_index)."""
    return _Simulator(cfg).sample(run_index)


def run_simulation(cfg: SimConfig) -> list[SimResult]:
    """
    Sample and decode cfg.runs runs, one SimResult per tracked class.

    Args:
        cfg: Simulation settings

    Returns:
        list: SimResult per class in cfg.classes order
    """
    started = time.perf_counter()
    sim = _Simulator(cfg)
    outcomes = parallel_map(_run_task, range(cfg.runs), cfg.workers, shared=sim)
    seconds = time.perf_counter() - started
    results = []
    for cls in cfg.classes:
        failures = sum(failed[cls] for failed in outcomes)
        results.append(SimResult(cls, sim.distance[cls], cfg.p, cfg.runs, sim.rounds, failures, seconds))
        logger.info("%s p=%g: %d/%d runs failed", cls.value, cfg.p, failures, cfg.runs)
    return results


def write_csv(results: Sequence[SimResult]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for result in results:
        writer.writerow(result.row())
    return buffer.getvalue()


def read_csv(text: str) -> list[SimResult]:
    results = []
    for row in csv.DictReader(io.StringIO(text)):
        results.append(SimResult(
            NestClass(row["class"]), int(row["d"]), float(row["p"]), int(row["runs"]),
            int(row["rounds_per_run"]), int(row["failures"]), float(row["seconds"]),
        ))
    return results
