import itertools
import math
from functools import lru_cache

import numpy as np
import pytest

from nestline.circuit import NestClass, generate_surface_code
from nestline.decoder_sim import (
    Decoder,
    Matching,
    MatchingInstance,
    SimConfig,
    SimResult,
    decode,
    read_csv,
    run_simulation,
    sample_run,
    solve_matching,
    write_csv,
)
from nestline.errors import BoundariesDisconnectedError
from nestline.fault_enum import compute_all, compute_B
from nestline.nest_analysis import code_distance, correction_syndrome
from nestline.nest_builder import TermLocation, propagate_error

from conftest import A, event


def idle_location(c, x, y, round, term=0):
    q = next(q.index for q in c.qubits if q.position == (x, y))
    return TermLocation(round, 0, c.step_lookup[0][q], term)


def brute_force_weight(instance: MatchingInstance) -> int:
    k = len(instance.events)

    @lru_cache(maxsize=None)
    def best(left: frozenset) -> float:
        if not left:
            return 0
        i = min(left)
        rest = left - {i}
        options = []
        if instance.boundary_weights[i] is not None:
            options.append(instance.boundary_weights[i] + best(rest))
        for j in rest:
            w = instance.pair_weights.get((i, j))
            if w is not None:
                options.append(w + best(rest - {j}))
        return min(options, default=math.inf)

    return best(frozenset(range(k)))


def test_noiseless_runs_have_no_events(surface_d2):
    cfg = SimConfig(surface_d2, p=0.0, runs=5, rounds=3)
    record = sample_run(cfg, 0)
    assert record.events == {NestClass.PRIMAL: set(), NestClass.DUAL: set()}
    assert record.errors == []
    assert all(r.failures == 0 for r in run_simulation(cfg))


def test_forced_error_matches_propagation(surface_d4):
    location = idle_location(surface_d4, 2, 2, round=1)
    cfg = SimConfig(surface_d4, p=0.0, runs=1, rounds=4, forced=location)
    record = sample_run(cfg, 0)
    expected = propagate_error(surface_d4, location, 6)
    assert record.events[NestClass.PRIMAL] | record.events[NestClass.DUAL] == expected
    assert expected
    assert all(r.failures == 0 for r in run_simulation(cfg))


def test_runs_are_deterministic(surface_d2):
    cfg = SimConfig(surface_d2, p=0.01, runs=4, rounds=4, seed=7)
    assert sample_run(cfg, 3) == sample_run(cfg, 3)
    first = run_simulation(cfg)
    again = run_simulation(SimConfig(surface_d2, p=0.01, runs=4, rounds=4, seed=7, workers=2))
    assert [r.failures for r in first] == [r.failures for r in again]


def test_sampled_errors_are_recorded(surface_d2):
    cfg = SimConfig(surface_d2, p=0.05, runs=1, rounds=4, seed=1)
    record = sample_run(cfg, 0)
    assert record.errors
    assert all(location.round < 4 for location in record.errors)


@pytest.mark.parametrize("kwargs", [{"p": 0.5}, {"p": -0.1}, {"runs": 0}, {"rounds": 0}])
def test_config_validation(surface_d2, kwargs):
    settings = {"p": 1e-3, "runs": 10, **kwargs}
    with pytest.raises(ValueError):
        SimConfig(surface_d2, **settings)


def test_runs_cover_the_distance(surface_d4):
    with pytest.raises(ValueError, match="d=4"):
        SimConfig(surface_d4, p=1e-3, runs=10, rounds=3)
    assert SimConfig(surface_d4, p=1e-3, runs=10, rounds=4).rounds == 4


def test_decode_nothing(chain):
    assert decode(chain(window=2), [], 1e-3) == []


def test_adjacent_events_share_a_stick(chain):
    n = chain(window=2)
    u, v = event(0, 1), event(0, 3)
    assert decode(n, [u, v], 1e-3) == [n.stick_between(u, v)]
    assert decode(n, [u], 1e-3) == [n.stick_between(A, u)]


@pytest.mark.parametrize("seed", range(10))
def test_correction_reproduces_syndrome(random_nest, seed):
    n = random_nest(seed)
    try:
        code_distance(n)
    except BoundariesDisconnectedError:
        pytest.skip("boundaries not connected")
    rng = np.random.default_rng(seed)
    events = [e for e in n.event_nodes if rng.random() < 0.3]
    decoder = Decoder(n, 1e-3)
    assert correction_syndrome(n, decoder.decode(events)) == set(events)


def test_matching_of_nothing():
    assert solve_matching(MatchingInstance((), {}, ())) == Matching((), (), 0)


def test_matching_prefers_boundaries_over_long_pairs():
    events = (event(0, 1), event(0, 3))
    result = solve_matching(MatchingInstance(events, {(0, 1): 10}, (3, 4)))
    assert result == Matching((), (0, 1), 7)
    result = solve_matching(MatchingInstance(events, {(0, 1): 5}, (3, 4)))
    assert result == Matching(((0, 1),), (), 5)


def test_matching_matches_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        k = int(rng.integers(1, 11))
        events = tuple(event(0, 2 * i + 1) for i in range(k))
        pair_weights = {
            (i, j): int(rng.integers(1, 50))
            for i, j in itertools.combinations(range(k), 2)
            if rng.random() < 0.7
        }
        boundary = tuple(int(rng.integers(1, 50)) for _ in range(k))
        instance = MatchingInstance(events, pair_weights, boundary)
        result = solve_matching(instance)
        assert result.weight == brute_force_weight(instance)
        covered = sorted(list(result.to_boundary) + [i for pair in result.pairs for i in pair])
        assert covered == list(range(k))


def test_sim_result_rates():
    result = SimResult(NestClass.PRIMAL, 4, 1e-3, 100, 5, 10)
    assert result.fraction == pytest.approx(0.1)
    assert result.p_L == pytest.approx(1 - 0.9 ** 0.2)
    assert result.stderr > 0
    assert SimResult(NestClass.DUAL, 4, 1e-3, 100, 5, 0).p_L == 0


def test_csv_round_trip():
    results = [
        SimResult(NestClass.PRIMAL, 4, 5e-4, 1000, 16, 3, 1.5),
        SimResult(NestClass.DUAL, 4, 5e-4, 1000, 16, 1, 1.5),
    ]
    text = write_csv(results)
    assert text.splitlines()[0] == "class,d,p,runs,rounds_per_run,failures,p_L,stderr,seconds"
    assert read_csv(text) == results


@pytest.mark.acceptance
def test_simulated_rate_follows_analytic_coefficient():
    c, _ = generate_surface_code(2)
    p = 1e-3
    B = compute_B(c, None, NestClass.PRIMAL, 2).B_float
    result, = run_simulation(SimConfig(c, p=p, runs=20000, rounds=8, classes=(NestClass.PRIMAL,), workers=4))
    assert result.p_L / p == pytest.approx(B, rel=0.35)
@pytest.mark.acceptance
def test_simulated_rate_follows_analytic_coefficient_d4():
    c, _ = generate_surface_code(4)
    p = 1e-3
    analytic = compute_all(c, d=4, workers=4)
    results = run_simulation(SimConfig(c, p=p, runs=40000, rounds=16, seed=11, workers=4))
    for result in results:
        assert result.d == 4
        assert result.failures >= 100
        assert result.p_L / p**2 == pytest.approx(analytic[result.cls].B_float, rel=0.3)
