from math import factorial

import numpy as np
import pytest

from hdg2d.quadrature import edge_quadrature, quadrature_rule, triangle_quadrature


def triangle_monomial(a, b):
    """Closed form of the monomial moment over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def test_weights_sum_to_reference_measures():
    for deg in range(0, 21):
        tri = triangle_quadrature(deg)
        assert abs(tri.weights.sum() - 0.5) < 1e-15
        edge = edge_quadrature(deg)
        assert abs(edge.weights.sum() - 1.0) < 1e-15


def test_triangle_constant_and_linear():
    rule = triangle_quadrature(2)
    assert abs(rule.weights.sum() - 0.5) < 1e-15
    x = rule.xy[:, 0]
    assert abs((rule.weights * x).sum() - 1.0 / 6.0) < 1e-15


@pytest.mark.parametrize("deg", [0, 1, 2, 3, 5, 8, 12, 20])
def test_triangle_monomials_match_closed_form(deg):
    rule = triangle_quadrature(deg)
    x, y = rule.xy[:, 0], rule.xy[:, 1]
    for a in range(deg + 1):
        for b in range(deg + 1 - a):
            approx = (rule.weights * x**a * y**b).sum()
            assert abs(approx - triangle_monomial(a, b)) < 1e-13


@pytest.mark.parametrize("deg", [0, 1, 4, 9, 20])
def test_edge_monomials_exact(deg):
    rule = edge_quadrature(deg)
    for a in range(deg + 1):
        assert abs((rule.weights * rule.t**a).sum() - 1.0 / (a + 1)) < 1e-13


def test_barycentric_points_sum_to_one():
    tri = triangle_quadrature(6)
    assert np.abs(tri.points.sum(axis=1) - 1.0).max() < 1e-14
    assert np.all(tri.points > 0)
    edge = edge_quadrature(6)
    assert np.abs(edge.points.sum(axis=1) - 1.0).max() < 1e-14


def test_degree_out_of_range():
    with pytest.raises(ValueError):
        triangle_quadrature(21)
    with pytest.raises(ValueError):
        edge_quadrature(-1)
    with pytest.raises(ValueError):
        quadrature_rule(3, domain="pentagon")
