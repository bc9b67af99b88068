import numpy as np
import pytest

from platedesign.quadrature import (QuadRule, reference_monomial_integral,
                                    triangle_rule_degree6, triangle_rule_tensor)


def rule_monomial_error(rule, max_degree):
    """Max error integrating x^i y^j (i+j <= max_degree) on the reference triangle."""
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    pts = rule.points @ verts
    worst = 0.0
    for i in range(max_degree + 1):
        for j in range(max_degree + 1 - i):
            approx = 0.5 * np.sum(rule.weights * pts[:, 0] ** i * pts[:, 1] ** j)
            worst = max(worst, abs(approx - reference_monomial_integral(i, j)))
    return worst


def test_degree6_rule_shape():
    rule = triangle_rule_degree6()
    assert rule.n_points == 12
    assert np.isclose(rule.weights.sum(), 1.0, atol=1e-15)
    assert np.all(rule.points > 0) and np.all(rule.points < 1)


def test_degree6_rule_exactness():
    assert rule_monomial_error(triangle_rule_degree6(), 6) <= 1e-14


def test_degree6_rule_not_exact_beyond():
    # degree 7 monomials must show real quadrature error (sanity of the check)
    assert rule_monomial_error(triangle_rule_degree6(), 7) > 1e-9


def test_tensor_rule_exactness_degree10():
    assert rule_monomial_error(triangle_rule_tensor(8), 10) <= 1e-13


def test_quadrule_validates():
    with pytest.raises(ValueError):
        QuadRule(points=np.array([[0.5, 0.2, 0.2]]), weights=np.array([1.0]), degree=1)
