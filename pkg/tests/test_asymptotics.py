import warnings
from fractions import Fraction

import pytest

from nestline.asymptotics import (
    AsymptoticExpression,
    ValidityWarning,
    eval_pL,
    extract_sim_asymptote,
    fit_expression,
    fit_least_squares,
)
from nestline.errors import FitError, MissingDistanceError


def test_fit_primal_coefficients():
    e = fit_expression({4: 290, 6: 10800}, cls="primal")
    assert e.R == pytest.approx(37.24, rel=1e-3)
    assert e.C == pytest.approx(0.209, rel=1e-2)
    assert e.render() == "0.21 (37 p)^(d/2)"
    assert e.distances == (4, 6)


def test_fit_dual_coefficients():
    e = fit_expression({4: 233, 6: 7380})
    assert e.R == pytest.approx(31.67, rel=1e-3)
    assert e.C == pytest.approx(0.232, rel=1e-2)


def test_fit_reproduces_inputs():
    B = {4: Fraction(933, 4), 6: Fraction(29511, 2)}
    e = fit_expression(B)
    for d, value in B.items():
        assert e.C * e.R ** (d // 2) == pytest.approx(float(value))


def test_geometric_toy_has_unit_prefactor():
    c = 0.37
    e = fit_expression({2: c, 4: c * c})
    assert e.C == pytest.approx(1.0)
    assert e.R == pytest.approx(c)


def test_explicit_pair():
    e = fit_expression({2: 3, 4: 30, 6: 900}, pair=(4, 6))
    assert e.R == pytest.approx(30)
    assert e.distances == (4, 6)


def test_missing_distances():
    with pytest.raises(MissingDistanceError):
        fit_expression({4: 290})
    with pytest.raises(MissingDistanceError):
        fit_expression({4: 290, 6: 10800}, pair=(6, 8))


@pytest.mark.parametrize("B", [{4: 290, 8: 10800}, {3: 10, 5: 100}, {4: 0, 6: 10}])
def test_unfittable_inputs(B):
    with pytest.raises(FitError):
        fit_expression(B)


def test_least_squares_on_exact_geometric_data():
    B = {d: 0.5 * 20.0 ** (d // 2) for d in (2, 4, 6, 8)}
    e = fit_least_squares(B)
    assert e.R == pytest.approx(20.0)
    assert e.C == pytest.approx(0.5)
    assert e.distances == (2, 4, 6, 8)


def test_eval_pL():
    e = AsymptoticExpression("primal", 0.21, 37.0, (4, 6))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert eval_pL(e, 4, 1e-5) == pytest.approx(0.21 * (37e-5) ** 2)
    with pytest.warns(ValidityWarning):
        eval_pL(e, 4, 1e-3)
    with pytest.raises(ValueError):
        eval_pL(e, 5, 1e-5)


def test_sim_asymptote_from_settled_points():
    d = 4
    points = [(p, 250 * p * p, 0.05 * 250 * p * p) for p in (1e-4, 2e-4, 4e-4)]
    points.append((1e-2, 0.5, 0.001))
    result = extract_sim_asymptote(points, d)
    assert result.converged
    assert result.A == pytest.approx(250)
    assert len(result.used) == 3


def test_sim_asymptote_not_converged():
    points = [(1e-3, 1e-4, 1e-7), (2e-3, 9e-4, 1e-7)]
    result = extract_sim_asymptote(points, 2)
    assert not result.converged
    assert result.A == pytest.approx(0.1)


def test_sim_asymptote_exact_points():
    result = extract_sim_asymptote([(1e-3, 2e-6, 0.0), (2e-3, 8e-6, 0.0)], 4)
    assert result.converged
    assert result.A == pytest.approx(2.0)
    assert result.stderr == 0.0


def test_sim_asymptote_needs_positive_p():
    with pytest.raises(FitError):
        extract_sim_asymptote([(0.0, 0.0, 0.0)], 2)
