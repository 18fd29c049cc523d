import math
from fractions import Fraction
from itertools import combinations

import networkx as nx
import pytest

from nestline.circuit import ErrorModel, NestClass, generate_surface_code
from nestline.errors import (
    BoundariesDisconnectedError,
    DistanceMismatchError,
    InvalidDistanceError,
    NestFormatError,
    WindowExhaustedError,
)
from nestline.fault_enum import (
    AnalyticResult,
    LogicalOperator,
    analyze_nest,
    build_base_set,
    build_step_set,
    compute_all,
    compute_B,
    dump_results,
    enumerate_operators,
    faults_of,
    load_results,
    scale_factor,
)
from nestline.nest_analysis import code_distance, nest_graph
from nestline.nest_builder import Nest, Stick, boundary_sticks, build_nests

from conftest import A, B, event


def brute_force_operators(n: Nest, anchors, d):
    """Every simple d-stick boundary-to-boundary path through the anchors, without pruning."""
    graph = nest_graph(n)
    anchor_ids = {s.sid for s in anchors}
    found = set()
    for nodes in nx.all_simple_paths(graph, A, B, cutoff=d):
        if len(nodes) != d + 1:
            continue
        sids = tuple(n.stick_between(u, v).sid for u, v in zip(nodes, nodes[1:]))
        if sids[0] in anchor_ids:
            found.add(sids)
    return found


def brute_force_faults(n: Nest, operators, d):
    best = {}
    for sids in operators:
        coefficients = {sid: n.sticks[sid].coefficient for sid in sids}
        p_op = math.prod(coefficients.values())
        for chosen in combinations(sids, d // 2):
            key = tuple(sorted(chosen))
            p_f = math.prod(coefficients[sid] for sid in chosen)
            best[key] = max(best.get(key, Fraction(0)), p_op / p_f)
    return best


def dummy_operator(coefficients):
    sticks = []
    for i, c in enumerate(coefficients):
        sticks.append(Stick(i, event(0, 2 * i + 1), event(0, 2 * i + 3), Fraction(c), 0))
    return LogicalOperator(tuple(sticks))


@pytest.mark.parametrize("p_f,p_c,expected", [
    (Fraction(1, 9), Fraction(1, 15), 0),
    (Fraction(4, 9), Fraction(4, 9), Fraction(1, 2)),
    (Fraction(1, 15), Fraction(1, 9), 1),
])
def test_scale_factor(p_f, p_c, expected):
    assert scale_factor(p_f, p_c) == expected


def test_faults_of_counts_and_values():
    op = dummy_operator([Fraction(1, 3), Fraction(1, 15), Fraction(1, 3), 1])
    faults = {key: (p_f, p_c) for key, p_f, p_c in faults_of(op)}
    assert len(faults) == 6
    assert faults[(1, 3)] == (Fraction(1, 15), Fraction(1, 9))
    assert op.p_op == Fraction(1, 135)


def test_faults_of_uniform_operator():
    c = Fraction(2, 7)
    for _, p_f, p_c in faults_of(dummy_operator([c] * 4)):
        assert p_f == p_c == c * c
    assert len(faults_of(dummy_operator([c] * 6))) == 20


def test_ladder_operator_per_anchor(ladder):
    n = ladder(1, 2)
    anchors = boundary_sticks(n, A, 4)
    operators = list(enumerate_operators(n, anchors, 2))
    assert len(operators) == len(anchors) == 1
    assert operators[0].sticks[0] == anchors[0]
    assert operators[0].sticks[-1].boundary == B


def test_pruned_anchor_yields_nothing():
    specs = [(A, event(0, 1), 1), (event(0, 1), event(0, 3), 1), (event(0, 3), event(0, 5), 1),
             (event(0, 5), B, 1), (A, event(0, 7), 1), (event(0, 7), event(0, 9), 1),
             (event(0, 9), event(0, 11), 1), (event(0, 11), event(0, 13), 1), (event(0, 13), B, 1)]
    n = Nest.assemble(NestClass.PRIMAL, 1, (A, B), specs)
    far = n.stick_between(A, event(0, 7))
    assert list(enumerate_operators(n, [far], 4)) == []


def test_mixed_anchor_boundaries_rejected(ladder):
    n = ladder(1, 1)
    with pytest.raises(ValueError):
        list(enumerate_operators(n, [n.stick_between(A, event(1, 1)), n.stick_between(event(1, 1), B)], 2))


@pytest.mark.parametrize("c1,c2,expected", [
    (Fraction(1, 3), Fraction(1, 2), Fraction(1, 3)),
    (Fraction(2), Fraction(1, 15), Fraction(1, 15)),
    (Fraction(1, 3), Fraction(1, 3), Fraction(1, 3)),
])
def test_ladder_B(ladder, c1, c2, expected):
    result = analyze_nest(ladder(c1, c2))
    assert result.d == 2
    assert result.B == expected


def test_ladder_base_set(ladder):
    c = Fraction(1, 3)
    n = ladder(c, c)
    base = build_base_set(n, A, 4, 2)
    a, b = n.stick_between(A, event(4, 1)), n.stick_between(event(4, 1), B)
    assert set(base.keys()) == {(a.sid,), (b.sid,)}
    assert base.fault((a.sid,)).p_f == base.fault((a.sid,)).p_c == c


def test_base_set_empty_without_anchors(ladder):
    assert len(build_base_set(ladder(1, 1, window=4), A, 6, 2, margin=None)) == 0


def test_chain_step_set_drops_faults_of_later_rounds(chain):
    n = chain(g=2)
    step, rounds = build_step_set(n, A, 4, 4)
    c4 = n.stick_between(event(4, 3), event(4, 5)).sid
    e4 = n.stick_between(event(4, 5), B).sid
    c5 = n.stick_between(event(5, 3), event(5, 5)).sid
    e5 = n.stick_between(event(5, 5), B).sid
    assert tuple(sorted((c4, e4))) in step
    assert step.fault(tuple(sorted((c4, e4)))).p_c == 2
    assert tuple(sorted((c5, e5))) not in step
    assert rounds == 4


def test_chain_B(chain):
    result = analyze_nest(chain(g=2, window=12))
    assert result.B == Fraction(11, 2)
    assert result.counts == {"scale0": 3, "scaleHalf": 5, "scale1": 3}
    assert result.step_size == 11


def test_chain_B_with_update_policy(chain):
    assert analyze_nest(chain(g=2, window=12), improved="update").B == Fraction(13, 2)


def test_translation_invariant_step_equals_shifted_base(chain):
    n = chain()
    base = build_base_set(n, A, 4, 4)
    step, _ = build_step_set(n, A, 4, 4, base=base)

    def shifted(key):
        moved = []
        for sid in key:
            s = n.sticks[sid]
            moved.append(n.stick_between(*(
                node if node in n.boundaries else event(node.t + 1, node.x) for node in s.endpoints
            )).sid)
        return tuple(sorted(moved))

    assert set(step.keys()) == {shifted(key) for key in base.keys()}


def test_window_guard(chain):
    with pytest.raises(WindowExhaustedError):
        build_step_set(chain(g=2, window=7), A, 4, 4)


@pytest.mark.parametrize("seed", range(60))
def test_enumeration_matches_brute_force(random_nest, seed):
    n = random_nest(seed)
    try:
        d = code_distance(n)
    except BoundariesDisconnectedError:
        pytest.skip("boundaries not connected")
    if d % 2:
        pytest.skip("odd distance")
    for r in range(n.window):
        anchors = boundary_sticks(n, A, r)
        expected = brute_force_operators(n, anchors, d)
        assert {op.key for op in enumerate_operators(n, anchors, d)} == expected
        base = build_base_set(n, A, r, d, margin=None)
        assert {key: base.fault(key).p_c for key in base.keys()} == brute_force_faults(n, expected, d)


def test_enough_random_nests_are_usable(random_nest):
    usable = 0
    for seed in range(60):
        try:
            usable += code_distance(random_nest(seed)) % 2 == 0
        except BoundariesDisconnectedError:
            pass
    assert usable >= 20


def test_surface_enumeration_matches_brute_force(surface_d4):
    primal, _ = build_nests(surface_d4, W=12)
    source, target = primal.boundaries
    anchors = boundary_sticks(primal, source, 6)[:2]
    graph = nest_graph(primal)
    expected = set()
    for anchor in anchors:
        for nodes in nx.all_simple_paths(graph, anchor.other(source), target, cutoff=3):
            if len(nodes) == 4 and source not in nodes:
                expected.add((anchor.sid,) + tuple(primal.stick_between(u, v).sid for u, v in zip(nodes, nodes[1:])))
    assert expected
    assert {op.key for op in enumerate_operators(primal, anchors, 4, margin=1)} == expected


def test_distance_checks(ladder):
    with pytest.raises(DistanceMismatchError):
        analyze_nest(ladder(1, 1), d=4)
    odd = Nest.assemble(NestClass.PRIMAL, 3, (A, B), [(A, event(1, 1), 1), (event(1, 1), event(1, 3), 1),
                                                      (event(1, 3), B, 1)])
    with pytest.raises(InvalidDistanceError):
        analyze_nest(odd, margin=None)


def test_disconnected_nest_has_zero_B():
    n = Nest.assemble(NestClass.PRIMAL, 3, (A, B), [(A, event(1, 1), 1)])
    assert analyze_nest(n).B == 0


def test_empty_error_model_gives_zero(surface_d2):
    c = surface_d2.with_error_model(ErrorModel.empty())
    results = compute_all(c)
    assert all(r.B == 0 for r in results.values())


def test_surface_d2_B_is_deterministic(surface_d2):
    serial = compute_B(surface_d2, None, NestClass.PRIMAL, 2)
    parallel = compute_B(surface_d2, None, NestClass.PRIMAL, 2, workers=2)
    assert serial.B == parallel.B > 0
    assert serial.counts == parallel.counts
    assert serial.rounds_consumed >= 2


def test_compute_B_rejects_odd_distance(surface_d2):
    with pytest.raises(InvalidDistanceError):
        compute_B(surface_d2, None, NestClass.DUAL, 3)


def test_results_document_round_trip():
    result = AnalyticResult(NestClass.DUAL, 4, Fraction(933, 4), {"scale0": 1, "scaleHalf": 2, "scale1": 3}, 5, 12)
    loaded, = load_results(dump_results([result]))
    assert loaded.B == result.B
    assert loaded.cls is NestClass.DUAL
    assert loaded.counts == result.counts
    with pytest.raises(NestFormatError):
        load_results('{"format": "other"}')


def test_surface_d4_coefficients(surface_d4):
    results = compute_all(surface_d4, d=4)
    primal, dual = results[NestClass.PRIMAL], results[NestClass.DUAL]
    assert primal.B == Fraction(13064, 45)
    assert dual.B == Fraction(52376, 225)
    assert (primal.rounds_consumed, dual.rounds_consumed) == (3, 4)
    assert primal.window == dual.window == 16


@pytest.mark.acceptance
@pytest.mark.parametrize("d,primal,dual", [(4, 2.90e2, 2.33e2), (6, 1.08e4, 7.38e3)])
def test_published_coefficients(d, primal, dual):
    c, _ = generate_surface_code(d)
    results = compute_all(c, d=d, workers=4)
    assert results[NestClass.PRIMAL].B_float == pytest.approx(primal, rel=0.25)
    assert results[NestClass.DUAL].B_float == pytest.approx(dual, rel=0.25)


@pytest.mark.acceptance
def test_distance_8_scaling():
    by_distance = {}
    for d in (4, 6, 8):
        c, _ = generate_surface_code(d)
        by_distance[d] = compute_all(c, d=d, workers=4)
    for cls in NestClass:
        low = by_distance[6][cls].B / by_distance[4][cls].B
        high = by_distance[8][cls].B / by_distance[6][cls].B
        assert low / 2 <= high <= low * 2
